"""Calculators for the method's convergence-rate bounds.

All quantities here are order estimates with unit hidden constants: the
stability and Hausdorff moduli (K_S, K_psi) are user-supplied estimates,
so no tightness is claimed.  The evaluators are pure and total on their
stated domains and raise ValueError with a named constant otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from riskq.saddle import WindowRule


@dataclass(frozen=True)
class TheoryConstants:
    """Scalars feeding the rate bounds.

    k_psi1 / k_psi2 / k_s have no constructive recipe; defaults of 1 / 0 / 0
    are estimates and should be treated as such.  ``kappa`` must satisfy
    kappa * c * k_psi1 < 1.
    """

    k_g: float
    gamma: float
    k_s: float = 0.0
    k_psi1: float = 1.0
    k_psi2: float = 0.0
    kappa: float = 0.5
    kappa0: float = 1.0
    psi: float = 1.0
    delta: float = 0.1
    eps_tilde: float = 0.1
    exploration_eps: float = 0.3
    v_max: float = 1.0
    c: float = 1.0
    alpha: float = 0.5
    k: float = 1.0
    c_g: float = 1.0

    def __post_init__(self):
        if self.k_g <= 1.0:
            raise ValueError("k_g must exceed 1")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.k_s < 0 or self.k_psi1 <= 0 or self.k_psi2 < 0:
            raise ValueError("moduli must satisfy k_s >= 0, k_psi1 > 0, k_psi2 >= 0")
        if self.kappa <= 0 or self.kappa * self.c * self.k_psi1 >= 1.0:
            raise ValueError("kappa must lie in (0, 1 / (c * k_psi1))")
        if self.kappa0 <= 0 or self.psi <= 0 or self.c_g < 0:
            raise ValueError("kappa0 and psi must be positive, c_g nonnegative")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.eps_tilde <= 0 or self.v_max <= 0 or self.c <= 0:
            raise ValueError("eps_tilde, v_max, and c must be positive")
        if not 0.0 < self.exploration_eps < 1.0:
            raise ValueError("exploration_eps must lie in (0, 1)")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0.5 < self.k <= 1.0:
            raise ValueError("k must lie in (1/2, 1]")


def beta_from_saddle_term(consts: TheoryConstants, tau_term: float) -> float:
    """Per-stage contraction factor given tau*(T)**-alpha = tau_term.

    beta = (K_G / 2) * (1 - gamma - sqrt(C*tau_term / (kappa*(1 - C*tau_term*K_psi1*kappa)))
           - K_G * K_S)

    May be negative (invalid regime); the caller checks.  tau_term = 0 is
    the infinite-T proxy where the saddle-error term vanishes.
    """
    if tau_term < 0:
        raise ValueError("tau_term must be nonnegative")
    denom = consts.kappa * (1.0 - consts.c * tau_term * consts.k_psi1 * consts.kappa)
    if denom <= 0:
        raise ValueError("kappa constraint violated at this saddle term (denominator <= 0)")
    root = math.sqrt(consts.c * tau_term / denom)
    return 0.5 * consts.k_g * (1.0 - consts.gamma - root - consts.k_g * consts.k_s)


def beta_t(consts: TheoryConstants, big_t: int, window: WindowRule) -> float:
    """Contraction factor at inner horizon T under the given window rule."""
    if big_t < 1:
        raise ValueError("T must be >= 1")
    tau_term = window.tau(big_t) ** (-consts.alpha)
    return beta_from_saddle_term(consts, tau_term)


@dataclass(frozen=True)
class TConditionRange:
    """Feasible inner-horizon range for the high-probability rate bounds."""

    feasible: bool
    t_min: int | None
    t_max: int | None  # None with feasible=True means unbounded above
    reason: str = ""


def t_condition_range(
    consts: TheoryConstants, window: WindowRule, t_cap: int = 10**9
) -> TConditionRange:
    """Invert the two conditions on tau*(T)**-alpha over integer T.

    Condition (upper): tau_term <= b**2 * kappa / C / (1 + K_psi1 * b**2 * kappa**2)
        with b = 1 - gamma - K_G * K_S; binds T from below.
    Condition (lower): tau_term >= br**2 * kappa / (C * (K_G + br**2 * K_psi1 * kappa**2))
        with br = K_G - K_G*(2*gamma + K_G*K_S) - 2; binds T from above and
        is vacuous when its right side is zero.

    tau_term is nonincreasing in T, so both inversions are monotone
    bisections.  Returns a diagnostic instead of raising when infeasible.
    """
    b = 1.0 - consts.gamma - consts.k_g * consts.k_s
    rhs1 = (b * b * consts.kappa / consts.c) / (
        1.0 + consts.k_psi1 * b * b * consts.kappa * consts.kappa
    )
    br = consts.k_g - consts.k_g * (2.0 * consts.gamma + consts.k_g * consts.k_s) - 2.0
    rhs2 = (br * br * consts.kappa) / (
        consts.c * (consts.k_g + br * br * consts.k_psi1 * consts.kappa * consts.kappa)
    )

    def tau_term(t: int) -> float:
        return window.tau(t) ** (-consts.alpha)

    if rhs1 <= 0:
        return TConditionRange(False, None, None,
                               "upper condition threshold is nonpositive; tau*(T)**-alpha "
                               "is always positive, so no T satisfies it")

    # Smallest T with tau_term(T) <= rhs1.
    if tau_term(1) <= rhs1:
        t_min = 1
    else:
        hi = 2
        while hi <= t_cap and tau_term(hi) > rhs1:
            hi *= 2
        if hi > t_cap:
            return TConditionRange(False, None, None,
                                   f"no T <= {t_cap} satisfies the upper condition")
        lo = hi // 2
        while lo + 1 < hi:
            mid = (lo + hi) // 2
            if tau_term(mid) <= rhs1:
                hi = mid
            else:
                lo = mid
        t_min = hi

    # Largest T with tau_term(T) >= rhs2 (vacuous when rhs2 <= 0).
    if rhs2 <= 0:
        t_max: int | None = None
    elif tau_term(1) < rhs2:
        return TConditionRange(False, None, None,
                               "lower condition exceeds tau*(1)**-alpha; no feasible T")
    else:
        hi = 2
        while hi <= t_cap and tau_term(hi) >= rhs2:
            hi *= 2
        if hi > t_cap:
            t_max = None  # still satisfied at the cap; treat as unbounded in range
        else:
            lo = hi // 2
            while lo + 1 < hi:
                mid = (lo + hi) // 2
                if tau_term(mid) >= rhs2:
                    lo = mid
                else:
                    hi = mid
            t_max = lo
    if t_max is not None and t_min > t_max:
        return TConditionRange(False, None, None,
                               f"conditions cross: T_min={t_min} exceeds T_max={t_max}")
    return TConditionRange(True, t_min, t_max)


def _pos_log(x: float) -> float:
    """ln clamped at zero; the rate terms vanish once the target error
    exceeds the problem scale instead of turning complex."""
    return max(math.log(x), 0.0) if x > 0 else 0.0


def _pow(base: float, exponent: float) -> float:
    """Power that saturates at infinity; the evaluators stay total when a
    bound is astronomically large instead of raising OverflowError."""
    try:
        return base**exponent
    except OverflowError:
        return math.inf


def sample_complexity_poly_terms(
    consts: TheoryConstants, beta: float, num_states: int, num_actions: int
) -> tuple[float, float]:
    """The two summands of the polynomial-rate outer-iteration estimate."""
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    k = consts.k
    if k >= 1.0:
        raise ValueError("polynomial rate requires k in (1/2, 1); "
                         "use sample_complexity_linear for k = 1")
    v, e = consts.v_max, consts.eps_tilde
    eps, delta = consts.exploration_eps, consts.delta
    sa = num_states * num_actions
    log1 = _pos_log(v * sa / (delta * beta * e * (1.0 - eps)))
    term1 = _pow(v * v * sa * log1 / (beta * beta * e * e * (1.0 - eps) ** (1.0 + 3.0 * k)), 1.0 / k)
    log2 = _pos_log(v * math.sqrt(sa) / e)
    term2 = _pow(log2 / ((1.0 - eps) * beta), 1.0 / (1.0 - k))
    return term1, term2


def sample_complexity_poly(
    consts: TheoryConstants, beta: float, num_states: int, num_actions: int
) -> float:
    """Outer iterations for the polynomial learning rate (order estimate).

    N = (V^2 |S||A| ln(V|S||A| / [delta beta eps~ (1-eps)]) / (beta^2 eps~^2 (1-eps)^(1+3k)))^(1/k)
      + ( ln(V sqrt(|S||A|) / eps~) / ((1-eps) beta) )^(1/(1-k))
    """
    t1, t2 = sample_complexity_poly_terms(consts, beta, num_states, num_actions)
    return t1 + t2


def sample_complexity_linear(
    consts: TheoryConstants, beta: float, num_states: int, num_actions: int
) -> float:
    """Outer iterations for the linear learning rate k = 1 (order estimate).

    N = ((2 + Psi - eps) / (1 - eps))^((1/beta) ln(V sqrt(|S||A|) / eps~))
        * V^2 |S||A| ln(V|S||A| / [Psi delta beta eps~ (1-eps)]) / (Psi^2 beta eps~^2 (1-eps)^2)
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if consts.psi <= 0:
        raise ValueError("psi must be positive")
    v, e = consts.v_max, consts.eps_tilde
    eps, delta, psi = consts.exploration_eps, consts.delta, consts.psi
    sa = num_states * num_actions
    base = (2.0 + psi - eps) / (1.0 - eps)
    exponent = _pos_log(v * math.sqrt(sa) / e) / beta
    log1 = _pos_log(v * sa / (psi * delta * beta * e * (1.0 - eps)))
    trailing = v * v * sa * log1 / (psi * psi * beta * e * e * (1.0 - eps) ** 2)
    return _pow(base, exponent) * trailing


def expectation_rate_n(
    consts: TheoryConstants,
    f_t: float,
    num_states: int,
    num_actions: int,
    eps_tilde: float,
) -> float:
    """Outer iterations for the expected-error bound under k = 1.

    N = max( (C_G + (gamma f_T)^2) eps / ((2 - 2 gamma K_G) eps^2 - K_G (gamma - K_S K_G) - eps),
             C_max^2 |S||A| ) / eps~

    Raises with a regime diagnostic when the denominator is nonpositive.
    """
    if eps_tilde <= 0:
        raise ValueError("eps_tilde must be positive")
    if f_t < 0:
        raise ValueError("f_t must be nonnegative")
    eps, g, kg, ks = consts.exploration_eps, consts.gamma, consts.k_g, consts.k_s
    denom = (2.0 - 2.0 * g * kg) * eps * eps - kg * (g - ks * kg) - eps
    if denom <= 0:
        raise ValueError(
            "regime violation: (2 - 2*gamma*K_G)*eps^2 - K_G*(gamma - K_S*K_G) - eps = "
            f"{denom:.6g} must be positive"
        )
    c_max = consts.v_max * (1.0 - g)
    first = (consts.c_g + (g * f_t) ** 2) * eps / denom
    second = c_max * c_max * num_states * num_actions
    return max(first, second) / eps_tilde


def error_envelope(d0: float, beta: float, stages: int) -> list[float]:
    """Geometric envelope D_{m+1} = (1 - beta) D_m for plotting against
    empirical error traces."""
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if d0 < 0 or stages < 0:
        raise ValueError("d0 and stages must be nonnegative")
    out = [float(d0)]
    for _ in range(stages):
        out.append(out[-1] * (1.0 - beta))
    return out
