"""Finite MDP representation, sampling, exploration, and Q-learning step sizes.

States and actions are integer indices.  The transition kernel is a dense
(S, A, S) stochastic tensor; costs are either a deterministic (S, A) table
or that table plus finite two-sided noise (a list of offset/probability
atoms, clipped into the admissible cost range).
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

_PROB_TOL = 1e-12
_MDP_MAGIC = "riskq-mdp 1"


@dataclass(frozen=True)
class CostSpec:
    """Cost model for a tabular MDP.

    mode:
        "deterministic": the realized cost of (s, a) is table[s, a].
        "random": the realized cost is clip(table[s, a] + offset_i, 0, cap)
        where (offset_i, prob_i) ranges over ``noise``.
    """

    mode: str
    table: np.ndarray
    noise: tuple[tuple[float, float], ...] = ()
    cap: float | None = None

    def __post_init__(self):
        if self.mode not in ("deterministic", "random"):
            raise ValueError(f"unknown cost mode {self.mode!r}")
        table = np.asarray(self.table, dtype=float)
        object.__setattr__(self, "table", table)
        if table.ndim != 2:
            raise ValueError("cost table must be 2-D (states x actions)")
        if self.mode == "random":
            if not self.noise:
                raise ValueError("random cost mode requires a noise support")
            probs = np.array([p for _, p in self.noise])
            if np.any(probs < 0) or abs(probs.sum() - 1.0) > _PROB_TOL:
                raise ValueError("noise probabilities must be >= 0 and sum to 1")
        if np.any(self.realized_bounds()[0] < 0):
            raise ValueError("realized costs must be nonnegative")

    def realized_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Elementwise (low, high) bounds on the realized cost per (s, a)."""
        if self.mode == "deterministic":
            return self.table, self.table
        offs = np.array([o for o, _ in self.noise])
        lo = self._clip(self.table + offs.min())
        hi = self._clip(self.table + offs.max())
        return lo, hi

    def _clip(self, values: np.ndarray) -> np.ndarray:
        hi = np.inf if self.cap is None else self.cap
        return np.clip(values, 0.0, hi)

    def realizations(self, s: int, a: int) -> tuple[np.ndarray, np.ndarray]:
        """Finite support of the cost of (s, a): (values, probabilities)."""
        if self.mode == "deterministic":
            return np.array([self.table[s, a]]), np.array([1.0])
        vals = self._clip(self.table[s, a] + np.array([o for o, _ in self.noise]))
        probs = np.array([p for _, p in self.noise])
        return vals, probs


@dataclass(frozen=True)
class TabularMdp:
    """Finite discounted MDP with a dense transition kernel.

    Invariants checked at construction: transition rows are probability
    vectors (within 1e-12), realized costs are finite and nonnegative,
    and the discount lies in (0, 1).
    """

    num_states: int
    num_actions: int
    transition: np.ndarray
    cost: CostSpec
    discount: float

    def __post_init__(self):
        if self.num_states < 1 or self.num_actions < 1:
            raise ValueError("state and action counts must be >= 1")
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        trans = np.asarray(self.transition, dtype=float)
        object.__setattr__(self, "transition", trans)
        expect = (self.num_states, self.num_actions, self.num_states)
        if trans.shape != expect:
            raise ValueError(f"transition shape {trans.shape}, expected {expect}")
        if np.any(trans < 0):
            raise ValueError("transition probabilities must be nonnegative")
        row_sums = trans.sum(axis=2)
        if np.max(np.abs(row_sums - 1.0)) > _PROB_TOL:
            raise ValueError("transition rows must sum to 1 within 1e-12")
        if self.cost.table.shape != (self.num_states, self.num_actions):
            raise ValueError("cost table shape must match (states, actions)")
        if not np.all(np.isfinite(self.cost.realized_bounds()[1])):
            raise ValueError("costs must be bounded")

    @property
    def c_max(self) -> float:
        """Largest realizable cost over all (s, a) pairs."""
        return float(self.cost.realized_bounds()[1].max())

    @property
    def v_max(self) -> float:
        """Upper bound on any discounted value, c_max / (1 - discount)."""
        return self.c_max / (1.0 - self.discount)

    def cost_distribution(self, s: int, a: int) -> tuple[np.ndarray, np.ndarray]:
        return self.cost.realizations(s, a)


def sample_transition(
    mdp: TabularMdp, s: int, a: int, rng: np.random.Generator
) -> tuple[int, float]:
    """Draw (next state, realized cost) for taking action a in state s.

    Draw order is fixed (next state first, then the cost atom) so that
    runs are reproducible under a fixed generator.
    """
    if not 0 <= s < mdp.num_states or not 0 <= a < mdp.num_actions:
        raise ValueError(f"state/action ({s}, {a}) out of range")
    row = mdp.transition[s, a]
    s_next = int(np.searchsorted(np.cumsum(row), rng.random(), side="right"))
    s_next = min(s_next, mdp.num_states - 1)
    if mdp.cost.mode == "deterministic":
        return s_next, float(mdp.cost.table[s, a])
    vals, probs = mdp.cost.realizations(s, a)
    i = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    return s_next, float(vals[min(i, len(vals) - 1)])


def epsilon_greedy_action(
    q: np.ndarray, s: int, epsilon: float, rng: np.random.Generator
) -> int:
    """Exploring action choice: uniform with probability epsilon, else argmin.

    The random branch draws uniformly over *all* actions (including the
    greedy one), so each action has probability at least epsilon / A.
    Argmin ties break to the lowest action index.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if not 0 <= s < q.shape[0]:
        raise ValueError(f"state {s} out of range")
    if rng.random() < epsilon:
        return int(rng.integers(q.shape[1]))
    return int(np.argmin(q[s]))


def q_step_size(visit_count: int, k: float) -> float:
    """Q-update step size 1 / visit_count**k.

    ``visit_count`` is one plus the number of prior visits, so the first
    update uses a full step.  The exponent k must lie in (1/2, 1]; k = 1
    is the linear learning rate, k in (1/2, 1) the polynomial one.
    """
    if not 0.5 < k <= 1.0:
        raise ValueError("learning rate exponent k must lie in (1/2, 1]")
    if visit_count < 1:
        raise ValueError("visit_count must be >= 1")
    return float(visit_count) ** (-k)


def generate_random_mdp(
    num_states: int,
    num_actions: int,
    seed: int,
    cost_mode: str = "deterministic",
    noise_spread: float = 0.25,
    discount: float = 0.9,
) -> TabularMdp:
    """Seeded random MDP: Dirichlet(1, ..., 1) transition rows, uniform costs.

    In random cost mode each base cost gets symmetric two-point noise
    (+/- noise_spread with equal probability) clipped to [0, 1].
    """
    if num_states < 1 or num_actions < 1:
        raise ValueError("sizes must be >= 1")
    rng = np.random.default_rng(seed)
    trans = rng.dirichlet(np.ones(num_states), size=(num_states, num_actions))
    table = rng.uniform(0.0, 1.0, size=(num_states, num_actions))
    if cost_mode == "random":
        noise = ((-noise_spread, 0.5), (noise_spread, 0.5))
        cost = CostSpec("random", table, noise, cap=1.0)
    else:
        cost = CostSpec("deterministic", table)
    return TabularMdp(num_states, num_actions, trans, cost, discount=discount)


def with_discount(mdp: TabularMdp, discount: float) -> TabularMdp:
    """Copy of ``mdp`` with a different discount factor."""
    return TabularMdp(mdp.num_states, mdp.num_actions, mdp.transition, mdp.cost, discount)


def save_mdp(mdp: TabularMdp, path) -> None:
    """Write an MDP file (versioned text; floats use shortest round-trip repr)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_mdp(mdp))


def format_mdp(mdp: TabularMdp) -> str:
    out = io.StringIO()
    out.write(f"{_MDP_MAGIC}\n")
    out.write(f"states {mdp.num_states}\n")
    out.write(f"actions {mdp.num_actions}\n")
    out.write(f"discount {float(mdp.discount)!r}\n")
    out.write(f"cost_mode {mdp.cost.mode}\n")
    cap = mdp.cost.cap
    out.write(f"cost_cap {'none' if cap is None else repr(cap)}\n")
    out.write("transition\n")
    for s in range(mdp.num_states):
        for a in range(mdp.num_actions):
            out.write(" ".join(repr(float(x)) for x in mdp.transition[s, a]) + "\n")
    out.write("costs\n")
    for s in range(mdp.num_states):
        out.write(" ".join(repr(float(x)) for x in mdp.cost.table[s]) + "\n")
    out.write(f"noise {len(mdp.cost.noise)}\n")
    for off, prob in mdp.cost.noise:
        out.write(f"{float(off)!r} {float(prob)!r}\n")
    return out.getvalue()


def load_mdp(path) -> TabularMdp:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    return parse_mdp(lines)


def parse_mdp(lines: list[str]) -> TabularMdp:
    it = iter(lines)

    def next_line() -> str:
        try:
            return next(it)
        except StopIteration:
            raise ValueError("truncated MDP file") from None

    header = next_line()
    if header != _MDP_MAGIC:
        raise ValueError(f"unsupported MDP file header {header!r}")
    num_states = int(next_line().split()[1])
    num_actions = int(next_line().split()[1])
    discount = float(next_line().split()[1])
    mode = next_line().split()[1]
    cap_tok = next_line().split()[1]
    cap = None if cap_tok == "none" else float(cap_tok)
    if next_line() != "transition":
        raise ValueError("expected transition section")
    trans = np.empty((num_states, num_actions, num_states))
    for s in range(num_states):
        for a in range(num_actions):
            trans[s, a] = [float(x) for x in next_line().split()]
    if next_line() != "costs":
        raise ValueError("expected costs section")
    table = np.empty((num_states, num_actions))
    for s in range(num_states):
        table[s] = [float(x) for x in next_line().split()]
    n_noise = int(next_line().split()[1])
    noise = []
    for _ in range(n_noise):
        off, prob = next_line().split()
        noise.append((float(off), float(prob)))
    cost = CostSpec(mode, table, tuple(noise), cap=cap)
    return TabularMdp(num_states, num_actions, trans, cost, discount)
