"""Saddle-point risk measures with subgradients and an exact oracle.

A risk measure here is written as

    rho(X) = max_z min_y E[G(X, y, z)],      y in Y, z in Z,

with G convex in y and concave in z, Y an interval (the support of X),
and Z an interval or a weight simplex.  Implemented families:

  * CVaR:            G(x, y, z) = y + (1 - alpha)^-1 * max(x - y, 0)
  * OCE:             G(x, y, z) = y - u(y - x)   for a concave utility u
  * CVaR mixture:    G(x, y, z) = sum_i z_i * (y + (1 - alpha_i)^-1 * max(x - y, 0))
  * semi-deviation:  G(x, y, z) = x + iota * max(x - y, 0) + iota * z * (y - x)

For finite distributions every family admits an exact min-max solve:
the objective is convex (piecewise linear or smooth) in the scalar y,
and the inner maximum over z has closed form (interval endpoint, or a
greedy vertex of the weight polytope).  ``exact_risk`` returns the value
and an attaining saddle point; ``duality_gap`` certifies candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

_PROB_TOL = 1e-12
_GRID_RESOLUTION = 1e-4


# ---------------------------------------------------------------------------
# Feasible sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi]; lo == hi encodes a singleton."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("interval bounds must be finite")
        if self.lo > self.hi:
            raise ValueError("interval requires lo <= hi")

    @property
    def dim(self) -> int:
        return 1

    @property
    def diameter(self) -> float:
        return self.hi - self.lo

    @property
    def is_singleton(self) -> bool:
        return self.lo == self.hi

    def clamp(self, v: float) -> float:
        return min(max(v, self.lo), self.hi)

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = float(np.asarray(v).reshape(()))
        return self.lo - tol <= v <= self.hi + tol

    def project(self, v) -> np.ndarray:
        arr = np.atleast_1d(np.asarray(v, dtype=float))
        if arr.shape != (1,):
            raise ValueError(f"interval projection expects dim 1, got {arr.shape}")
        return np.clip(arr, self.lo, self.hi)

    def midpoint(self) -> np.ndarray:
        return np.array([(self.lo + self.hi) / 2.0])


@dataclass(frozen=True)
class BoxSimplex:
    """Probability simplex over m atoms, optionally restricted to a box.

    Feasible points z satisfy lo <= z <= hi and sum(z) = 1.
    """

    m: int
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("simplex needs at least one atom")
        lo = np.zeros(self.m) if self.lo is None else np.asarray(self.lo, dtype=float)
        hi = np.ones(self.m) if self.hi is None else np.asarray(self.hi, dtype=float)
        if lo.shape != (self.m,) or hi.shape != (self.m,):
            raise ValueError("box bounds must have shape (m,)")
        if np.any(lo < 0) or np.any(hi > 1) or np.any(lo > hi):
            raise ValueError("box bounds must satisfy 0 <= lo <= hi <= 1")
        if lo.sum() > 1 + _PROB_TOL or hi.sum() < 1 - _PROB_TOL:
            raise ValueError("box excludes every probability vector")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.m

    @property
    def is_singleton(self) -> bool:
        return self.m == 1 or bool(np.all(self.lo == self.hi))

    @property
    def is_full(self) -> bool:
        return bool(np.all(self.lo == 0.0) and np.all(self.hi == 1.0))

    @property
    def diameter(self) -> float:
        # Conservative bound: the full simplex has diameter sqrt(2); the
        # box cannot stretch the set beyond its own diagonal.
        if self.is_singleton:
            return 0.0
        return min(math.sqrt(2.0), float(np.linalg.norm(self.hi - self.lo)))

    def contains(self, z, tol: float = 1e-9) -> bool:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.m,):
            return False
        return (
            np.all(z >= self.lo - tol)
            and np.all(z <= self.hi + tol)
            and abs(z.sum() - 1.0) <= tol * self.m + tol
        )

    def project(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.m,):
            raise ValueError(f"simplex projection expects dim {self.m}, got {z.shape}")
        if self.m == 1:
            return np.ones(1)
        if self.is_full:
            return _project_simplex_sorted(z)
        return _project_box_simplex(z, self.lo, self.hi)

    def greedy_max(self, weights: np.ndarray) -> np.ndarray:
        """Maximize weights . z over the set (exact: fractional greedy)."""
        z = self.lo.copy()
        budget = 1.0 - z.sum()
        for i in np.argsort(-np.asarray(weights, dtype=float), kind="stable"):
            room = self.hi[i] - z[i]
            take = min(room, budget)
            z[i] += take
            budget -= take
            if budget <= 1e-15:
                break
        return z

    def midpoint(self) -> np.ndarray:
        return self.project(np.full(self.m, 1.0 / self.m))


def _project_simplex_sorted(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the full probability simplex (sorting method)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, len(v) + 1)
    cond = u + (1.0 - css) / idx > 0
    rho = int(np.nonzero(cond)[0][-1]) + 1
    theta = (1.0 - css[rho - 1]) / rho
    return np.maximum(v + theta, 0.0)


def _project_box_simplex(v: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Projection onto {lo <= z <= hi, sum z = 1} by bisection on the multiplier."""
    def mass(theta: float) -> float:
        return float(np.clip(v + theta, lo, hi).sum())

    t_lo = float((lo - v).min()) - 1.0
    t_hi = float((hi - v).max()) + 1.0
    for _ in range(200):
        mid = 0.5 * (t_lo + t_hi)
        if mass(mid) < 1.0:
            t_lo = mid
        else:
            t_hi = mid
        if t_hi - t_lo < 1e-15:
            break
    return np.clip(v + 0.5 * (t_lo + t_hi), lo, hi)


FeasibleSet = Interval | BoxSimplex


def project(set_y: Interval, set_z: FeasibleSet, point: tuple) -> tuple[float, np.ndarray]:
    """Euclidean projection of (y, z) onto Y x Z (componentwise by product structure)."""
    y, z = point
    y_proj = float(set_y.project(y)[0])
    z_proj = set_z.project(np.atleast_1d(np.asarray(z, dtype=float)))
    return y_proj, z_proj


# ---------------------------------------------------------------------------
# Finite distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteDistribution:
    """Finitely supported distribution given as (values, probabilities)."""

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if vals.ndim != 1 or vals.shape != probs.shape or len(vals) == 0:
            raise ValueError("values and probs must be matching nonempty 1-D arrays")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > _PROB_TOL:
            raise ValueError("probabilities must be >= 0 and sum to 1 within 1e-12")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def bernoulli(cls, p: float, lo: float = 0.0, hi: float = 1.0) -> "FiniteDistribution":
        return cls(np.array([lo, hi]), np.array([1.0 - p, p]))

    @classmethod
    def point_mass(cls, value: float) -> "FiniteDistribution":
        return cls(np.array([value]), np.array([1.0]))

    def mean(self) -> float:
        return float(self.values @ self.probs)

    def shifted(self, r: float) -> "FiniteDistribution":
        return FiniteDistribution(self.values + r, self.probs)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        cum = np.cumsum(self.probs)
        u = rng.random() if size is None else rng.random(size)
        idx = np.minimum(np.searchsorted(cum, u, side="right"), len(cum) - 1)
        out = self.values[idx]
        return float(out) if size is None else out


# ---------------------------------------------------------------------------
# Measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SaddleRiskMeasure:
    """A risk measure rho(X) = max_z min_y E[G(X, y, z)].

    ``g_eval``, ``g_subgrad_y``, ``g_subgrad_z`` take a scalar sample x,
    a scalar y, and a z vector of shape (dim_z,).  ``lipschitz_g`` and
    ``subgrad_bound`` are conservative per-family constants derived from
    worst-case partial derivatives over the support; treat them as
    estimates, not tight values.
    """

    family: str
    g_eval: Callable[[float, float, np.ndarray], float]
    g_subgrad_y: Callable[[float, float, np.ndarray], float]
    g_subgrad_z: Callable[[float, float, np.ndarray], np.ndarray]
    domain_y: Interval
    domain_z: FeasibleSet
    lipschitz_g: float
    subgrad_bound: float
    support: tuple[float, float]
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lipschitz_g <= 1.0:
            raise ValueError("lipschitz constant must exceed 1")
        if self.subgrad_bound <= 0.0:
            raise ValueError("subgradient bound must be positive")

    @property
    def dim_z(self) -> int:
        return self.domain_z.dim

    @property
    def z_is_fixed(self) -> bool:
        return self.domain_z.is_singleton

    @property
    def diam_y(self) -> float:
        return self.domain_y.diameter

    @property
    def diam_z(self) -> float:
        return self.domain_z.diameter

    def initial_point(self) -> tuple[float, np.ndarray]:
        """Support midpoint and simplex barycenter; avoids boundary kinks."""
        return float(self.domain_y.midpoint()[0]), self.domain_z.midpoint()

    def expected_g(self, dist: FiniteDistribution, y: float, z: np.ndarray) -> float:
        vals = dist.values
        return float(sum(p * self.g_eval(float(x), y, z) for x, p in zip(vals, dist.probs)))


def _singleton_z() -> Interval:
    # Families without a real dual variable use the degenerate interval
    # [0, 0] so every measure flows through the same (y, z) machinery.
    return Interval(0.0, 0.0)


def make_cvar(alpha: float, support: tuple[float, float]) -> SaddleRiskMeasure:
    """Conditional value-at-risk at level alpha in [0, 1).

    G(x, y, z) = y + (1 - alpha)^-1 * max(x - y, 0); Y is the support
    interval, Z a singleton.  The hinge subgradient at x == y takes the
    zero-side element so runs are reproducible.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    lo, hi = float(support[0]), float(support[1])
    c = 1.0 / (1.0 - alpha)
    zero = np.zeros(1)

    def g_eval(x: float, y: float, z) -> float:
        d = x - y
        return y + c * d if d > 0.0 else y

    def g_subgrad_y(x: float, y: float, z) -> float:
        return 1.0 - c if x > y else 1.0

    def g_subgrad_z(x: float, y: float, z) -> np.ndarray:
        return zero

    by = max(1.0, c - 1.0)
    return SaddleRiskMeasure(
        family="cvar",
        g_eval=g_eval,
        g_subgrad_y=g_subgrad_y,
        g_subgrad_z=g_subgrad_z,
        domain_y=Interval(lo, hi),
        domain_z=_singleton_z(),
        lipschitz_g=1.0 + c + by,
        subgrad_bound=by,
        support=(lo, hi),
        params={"alpha": alpha},
    )


@dataclass(frozen=True)
class Utility:
    """Concave utility for optimized certainty equivalents.

    ``fn`` and ``deriv`` map scalars to scalars; ``deriv_max`` bounds the
    derivative magnitude over inputs in [-width, width].  ``smooth`` is
    False for piecewise-linear utilities (their OCE objective has kinks).
    """

    fn: Callable[[float], float]
    deriv: Callable[[float], float]
    deriv_max: Callable[[float], float]
    smooth: bool = True
    name: str = "custom"


def entropic_utility(lam: float) -> Utility:
    """u(w) = 1 - exp(-lam * w), lam > 0."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    return Utility(
        fn=lambda w: 1.0 - math.exp(-lam * w),
        deriv=lambda w: lam * math.exp(-lam * w),
        deriv_max=lambda width: lam * math.exp(lam * width),
        smooth=True,
        name=f"entropic({lam})",
    )


def cvar_utility(alpha: float) -> Utility:
    """Piecewise-linear utility whose OCE reproduces CVaR at level alpha."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    c = 1.0 / (1.0 - alpha)
    return Utility(
        fn=lambda w: c * w if w < 0.0 else 0.0,
        deriv=lambda w: c if w < 0.0 else 0.0,
        deriv_max=lambda width: c,
        smooth=False,
        name=f"cvar_utility({alpha})",
    )


def make_oce(utility: Utility, support: tuple[float, float]) -> SaddleRiskMeasure:
    """Optimized certainty equivalent: rho(X) = min_y {y - E[u(y - X)]}.

    G(x, y, z) = y - u(y - x); Z is a singleton.
    """
    lo, hi = float(support[0]), float(support[1])
    u, du = utility.fn, utility.deriv
    zero = np.zeros(1)

    def g_eval(x: float, y: float, z) -> float:
        return y - u(y - x)

    def g_subgrad_y(x: float, y: float, z) -> float:
        return 1.0 - du(y - x)

    def g_subgrad_z(x: float, y: float, z) -> np.ndarray:
        return zero

    dmax = utility.deriv_max(hi - lo)
    return SaddleRiskMeasure(
        family="oce",
        g_eval=g_eval,
        g_subgrad_y=g_subgrad_y,
        g_subgrad_z=g_subgrad_z,
        domain_y=Interval(lo, hi),
        domain_z=_singleton_z(),
        lipschitz_g=1.0 + 2.0 * dmax + 1e-9,
        subgrad_bound=1.0 + dmax,
        support=(lo, hi),
        params={"utility": utility.name, "smooth": utility.smooth},
    )


def make_kusuoka(
    alphas,
    support: tuple[float, float],
    weight_set: BoxSimplex | None = None,
) -> SaddleRiskMeasure:
    """CVaR mixture over a weight set (functionally coherent measure).

    G(x, y, z) = sum_i z_i * (y + (1 - alpha_i)^-1 * max(x - y, 0)) with z
    ranging over ``weight_set`` (the full simplex when omitted).  The
    alphas must be strictly increasing within [0, 1).
    """
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise ValueError("need at least one confidence level")
    if any(not 0.0 <= a < 1.0 for a in alphas):
        raise ValueError("confidence levels must lie in [0, 1)")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("confidence levels must be strictly increasing")
    m = len(alphas)
    if weight_set is None:
        weight_set = BoxSimplex(m)
    elif weight_set.m != m:
        raise ValueError("weight set dimension must match the number of levels")
    lo, hi = float(support[0]), float(support[1])
    coeff = np.array([1.0 / (1.0 - a) for a in alphas])

    def g_eval(x: float, y: float, z) -> float:
        d = x - y
        hinge = d if d > 0.0 else 0.0
        return float(z @ (y + coeff * hinge))

    def g_subgrad_y(x: float, y: float, z) -> float:
        if x > y:
            return float(z.sum() - z @ coeff)
        return float(z.sum())

    def g_subgrad_z(x: float, y: float, z) -> np.ndarray:
        d = x - y
        hinge = d if d > 0.0 else 0.0
        return y + coeff * hinge

    c_max = float(coeff.max())
    mag = max(abs(lo), abs(hi))
    by = max(1.0, c_max - 1.0)
    bz = mag + c_max * (hi - lo)
    return SaddleRiskMeasure(
        family="kusuoka",
        g_eval=g_eval,
        g_subgrad_y=g_subgrad_y,
        g_subgrad_z=g_subgrad_z,
        domain_y=Interval(lo, hi),
        domain_z=weight_set,
        lipschitz_g=1.0 + c_max + by + bz,
        subgrad_bound=max(by, bz, 1e-12),
        support=(lo, hi),
        params={"alphas": tuple(alphas)},
    )


def make_abs_semidev(iota: float, support: tuple[float, float]) -> SaddleRiskMeasure:
    """Absolute semi-deviation, rho(X) = E[X] + iota * E[(X - E[X])+].

    G(x, y, z) = x + iota * max(x - y, 0) + iota * z * (y - x);
    Y is the support interval and Z = [0, 1] (as a box simplex over one
    coordinate would pin z, the interval is kept explicit).
    """
    if not 0.0 <= iota <= 1.0:
        raise ValueError("iota must lie in [0, 1]")
    lo, hi = float(support[0]), float(support[1])

    def g_eval(x: float, y: float, z) -> float:
        d = x - y
        hinge = d if d > 0.0 else 0.0
        return x + iota * hinge + iota * float(z[0]) * (y - x)

    def g_subgrad_y(x: float, y: float, z) -> float:
        sub = -iota if x > y else 0.0
        return sub + iota * float(z[0])

    def g_subgrad_z(x: float, y: float, z) -> np.ndarray:
        return np.array([iota * (y - x)])

    width = hi - lo
    bound = max(iota, iota * width, 1e-12)
    return SaddleRiskMeasure(
        family="abs_semidev",
        g_eval=g_eval,
        g_subgrad_y=g_subgrad_y,
        g_subgrad_z=g_subgrad_z,
        domain_y=Interval(lo, hi),
        domain_z=Interval(0.0, 1.0),
        lipschitz_g=1.0 + iota * (2.0 + width) + 1e-9,
        subgrad_bound=bound,
        support=(lo, hi),
        params={"iota": iota},
    )


# ---------------------------------------------------------------------------
# Exact evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RiskSolution:
    """Result of an exact (or flagged approximate) min-max solve."""

    value: float
    y: float
    z: np.ndarray
    exact: bool = True
    grid_resolution: float | None = None


def _y_candidates(measure: SaddleRiskMeasure, dist: FiniteDistribution) -> np.ndarray:
    dom = measure.domain_y
    cands = [dom.lo, dom.hi]
    cands.extend(float(v) for v in dist.values)
    if measure.family == "abs_semidev":
        cands.append(dist.mean())
    arr = np.clip(np.array(sorted(set(cands))), dom.lo, dom.hi)
    return np.unique(arr)


def _phi_bar(measure: SaddleRiskMeasure, dist: FiniteDistribution, y: float) -> tuple[float, np.ndarray]:
    """Inner maximum over z of E[G(X, y, z)], with a maximizing z."""
    vals, probs = dist.values, dist.probs
    fam = measure.family
    if fam == "cvar":
        c = 1.0 / (1.0 - measure.params["alpha"])
        val = y + c * float(probs @ np.maximum(vals - y, 0.0))
        return val, np.zeros(1)
    if fam == "oce":
        val = measure.expected_g(dist, y, np.zeros(1))
        return val, np.zeros(1)
    if fam == "kusuoka":
        hinge = float(probs @ np.maximum(vals - y, 0.0))
        coeff = np.array([1.0 / (1.0 - a) for a in measure.params["alphas"]])
        weights = y + coeff * hinge
        z = measure.domain_z.greedy_max(weights)
        return float(z @ weights), z
    if fam == "abs_semidev":
        iota = measure.params["iota"]
        mean = float(probs @ vals)
        hinge = float(probs @ np.maximum(vals - y, 0.0))
        drift = iota * (y - mean)
        z = 1.0 if drift > 0.0 else 0.0
        return mean + iota * hinge + max(drift, 0.0), np.array([z])
    raise NotImplementedError(f"no exact inner solver for family {fam!r}")


def _phi_bar_many(measure: SaddleRiskMeasure, dist: FiniteDistribution, ys: np.ndarray) -> np.ndarray:
    """Vectorized max_z E[G(X, y, z)] over a vector of candidate y values.

    Only for the piecewise-linear families (their inner maximum has a
    closed form whose y-dependence factors through E[(X - y)+]).
    """
    vals, probs = dist.values, dist.probs
    hinge = np.maximum(vals[None, :] - ys[:, None], 0.0) @ probs
    fam = measure.family
    if fam == "cvar":
        c = 1.0 / (1.0 - measure.params["alpha"])
        return ys + c * hinge
    if fam == "kusuoka":
        coeff = np.array([1.0 / (1.0 - a) for a in measure.params["alphas"]])
        # The greedy-optimal z maximizes the hinge multiplier independent
        # of y (the other weight coordinates only scale y, whose total
        # weight is pinned at 1), so a single LP solve serves every y.
        z = measure.domain_z.greedy_max(coeff)
        return ys * z.sum() + float(z @ coeff) * hinge
    if fam == "abs_semidev":
        iota = measure.params["iota"]
        mean = float(probs @ vals)
        return mean + iota * hinge + np.maximum(iota * (ys - mean), 0.0)
    raise NotImplementedError(fam)


def _phi_under(measure: SaddleRiskMeasure, dist: FiniteDistribution, z: np.ndarray) -> tuple[float, float]:
    """Inner minimum over y of E[G(X, y, z)], with a minimizing y."""
    fam = measure.family
    if fam == "oce" and measure.params.get("smooth", True):
        return _minimize_smooth(measure, dist, z)
    cands = _y_candidates(measure, dist)
    vals = [measure.expected_g(dist, float(y), z) for y in cands]
    i = int(np.argmin(vals))
    best_v, best_y = vals[i], float(cands[i])
    if fam == "oce":
        ref_v, ref_y = _minimize_smooth(measure, dist, z)
        if ref_v < best_v:
            best_v, best_y = ref_v, ref_y
    return best_v, best_y


def _minimize_smooth(measure: SaddleRiskMeasure, dist: FiniteDistribution, z: np.ndarray) -> tuple[float, float]:
    dom = measure.domain_y

    def obj(y: float) -> float:
        return measure.expected_g(dist, float(y), z)

    if dom.is_singleton:
        return obj(dom.lo), dom.lo
    res = minimize_scalar(obj, bounds=(dom.lo, dom.hi), method="bounded",
                          options={"xatol": 1e-11})
    y = float(res.x)
    candidates = [(obj(dom.lo), dom.lo), (obj(dom.hi), dom.hi), (float(res.fun), y)]
    best_v, best_y = min(candidates, key=lambda t: t[0])
    return best_v, best_y


def _optimal_z(measure: SaddleRiskMeasure, dist: FiniteDistribution) -> np.ndarray:
    """A z attaining max_z min_y E[G] (family-specific closed form)."""
    fam = measure.family
    if fam in ("cvar", "oce"):
        return np.zeros(1)
    if fam == "kusuoka":
        coeff = np.array([1.0 / (1.0 - a) for a in measure.params["alphas"]])
        return measure.domain_z.greedy_max(coeff)
    if fam == "abs_semidev":
        mean = dist.mean()
        return np.array([float(dist.probs @ (dist.values > mean))])
    raise NotImplementedError(fam)


def exact_risk(measure: SaddleRiskMeasure, dist: FiniteDistribution) -> RiskSolution:
    """Solve min_y max_z E[G(X, y, z)] exactly for the implemented families.

    Piecewise-linear families scan the kink candidates (atoms, support
    endpoints, and the mean for semi-deviation); the smooth OCE family
    uses bounded 1-D minimization to 1e-10.  Custom measures without an
    exactness certificate fall back to a dense grid and are flagged with
    the grid resolution used.
    """
    lo, hi = measure.support
    if np.any(dist.values < lo - 1e-9) or np.any(dist.values > hi + 1e-9):
        raise ValueError("distribution atoms must lie within the measure support")
    try:
        _phi_bar(measure, dist, measure.domain_y.lo)
    except NotImplementedError:
        return _grid_risk(measure, dist)

    if measure.family == "oce" and measure.params.get("smooth", True):
        def obj(y: float) -> float:
            return _phi_bar(measure, dist, float(y))[0]
        dom = measure.domain_y
        if dom.is_singleton:
            y_star = dom.lo
        else:
            res = minimize_scalar(obj, bounds=(dom.lo, dom.hi), method="bounded",
                                  options={"xatol": 1e-11})
            y_star = float(res.x)
            for edge in (dom.lo, dom.hi):
                if obj(edge) < obj(y_star):
                    y_star = edge
        value = obj(y_star)
    else:
        cands = _y_candidates(measure, dist)
        if measure.family == "oce":
            vals = np.array([_phi_bar(measure, dist, float(y))[0] for y in cands])
        else:
            vals = _phi_bar_many(measure, dist, cands)
        i = int(np.argmin(vals))
        value, y_star = float(vals[i]), float(cands[i])
    z_star = _optimal_z(measure, dist)
    return RiskSolution(value=float(value), y=y_star, z=z_star, exact=True)


def _grid_risk(measure: SaddleRiskMeasure, dist: FiniteDistribution) -> RiskSolution:
    """Dense grid fallback for custom G; flagged approximate."""
    dom_y, dom_z = measure.domain_y, measure.domain_z
    n_y = max(2, int(math.ceil(dom_y.diameter / _GRID_RESOLUTION)) + 1)
    ys = np.linspace(dom_y.lo, dom_y.hi, min(n_y, 200001))
    if isinstance(dom_z, Interval):
        if dom_z.is_singleton:
            zs = [np.array([dom_z.lo])]
        else:
            n_z = max(2, int(math.ceil(dom_z.diameter / 1e-2)) + 1)
            zs = [np.array([z]) for z in np.linspace(dom_z.lo, dom_z.hi, n_z)]
    else:
        zs = [np.eye(dom_z.m)[i] for i in range(dom_z.m)]
        zs.append(dom_z.midpoint())
        zs = [dom_z.project(z) for z in zs]
    best_val, best_y, best_z = math.inf, ys[0], zs[0]
    for y in ys:
        inner = -math.inf
        inner_z = zs[0]
        for z in zs:
            v = measure.expected_g(dist, float(y), z)
            if v > inner:
                inner, inner_z = v, z
        if inner < best_val:
            best_val, best_y, best_z = inner, float(y), inner_z
    return RiskSolution(
        value=best_val, y=best_y, z=best_z, exact=False, grid_resolution=_GRID_RESOLUTION
    )


def exact_risk_maxmin(measure: SaddleRiskMeasure, dist: FiniteDistribution) -> RiskSolution:
    """Solve the max-min order: max_z [min_y E[G]] via the family's optimal z."""
    z_star = _optimal_z(measure, dist)
    value, y_star = _phi_under(measure, dist, z_star)
    return RiskSolution(value=float(value), y=y_star, z=z_star, exact=True)


def duality_gap(
    measure: SaddleRiskMeasure, dist: FiniteDistribution, y: float, z: np.ndarray
) -> float:
    """Quality certificate: max_z' E[G(., y, z')] - min_y' E[G(., y', z)].

    Zero exactly at a saddle point, nonnegative everywhere (up to solver
    tolerance).
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if not measure.domain_y.contains(y):
        raise ValueError(f"y={y} is not feasible")
    if isinstance(measure.domain_z, Interval):
        if z.shape != (1,) or not measure.domain_z.contains(float(z[0])):
            raise ValueError("z is not feasible")
    elif not measure.domain_z.contains(z):
        raise ValueError("z is not feasible")
    upper, _ = _phi_bar(measure, dist, float(y))
    lower, _ = _phi_under(measure, dist, z)
    return float(upper - lower)
