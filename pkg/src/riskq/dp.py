"""Exact risk-aware dynamic programming.

The risk-aware Bellman operator scores the next-state value through the
measure's exact min-max oracle:

    deterministic costs:  [T v](s) = min_a { c(s,a) + gamma * rho(v(s')) }
    random costs:         [T v](s) = min_a rho( c(s,a,X) + gamma * v(s') )

with s' ~ P(.|s,a).  The operator is a gamma-contraction in the sup norm
whenever rho is a convex risk measure, so value iteration from v = 0
terminates in a bounded number of sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from riskq.mdp import TabularMdp
from riskq.risk import FiniteDistribution, SaddleRiskMeasure, exact_risk


class ConvergenceError(RuntimeError):
    """Raised when value iteration hits its sweep budget; carries the residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def q_backup(mdp: TabularMdp, measure: SaddleRiskMeasure, v: np.ndarray) -> np.ndarray:
    """One exact backup of every (s, a) pair against the value function v."""
    S, A = mdp.num_states, mdp.num_actions
    q = np.empty((S, A))
    random_cost = mdp.cost.mode == "random"
    gamma = mdp.discount
    for s in range(S):
        for a in range(A):
            p_row = mdp.transition[s, a]
            if random_cost:
                c_vals, c_probs = mdp.cost_distribution(s, a)
                vals = (c_vals[:, None] + gamma * v[None, :]).ravel()
                probs = (c_probs[:, None] * p_row[None, :]).ravel()
                dist = FiniteDistribution(vals, probs)
                q[s, a] = exact_risk(measure, dist).value
            else:
                dist = FiniteDistribution(v, p_row)
                q[s, a] = mdp.cost.table[s, a] + gamma * exact_risk(measure, dist).value
    return q


def bellman_apply(mdp: TabularMdp, measure: SaddleRiskMeasure, v: np.ndarray) -> np.ndarray:
    """Apply the risk-aware Bellman operator once."""
    v = np.asarray(v, dtype=float)
    if v.shape != (mdp.num_states,):
        raise ValueError("value function shape must be (num_states,)")
    return q_backup(mdp, measure, v).min(axis=1)


@dataclass(frozen=True)
class ValueIterationResult:
    v: np.ndarray
    q: np.ndarray
    policy: np.ndarray
    iters: int
    residual: float


def default_sweep_budget(mdp: TabularMdp, tol: float) -> int:
    """Contraction-based sweep bound ceil(log(v_max / tol) / log(1 / gamma)) + 1."""
    v_max = mdp.v_max
    if v_max <= tol:
        return 1
    return int(math.ceil(math.log(v_max / tol) / math.log(1.0 / mdp.discount))) + 1


def value_iteration(
    mdp: TabularMdp,
    measure: SaddleRiskMeasure,
    tol: float,
    max_iters: int | None = None,
) -> ValueIterationResult:
    """Iterate the risk-aware Bellman operator from v = 0 until the sup-norm
    residual drops to ``tol``; assemble Q*, v*, and the greedy policy from
    the final backup (so v*(s) == min_a Q*(s, a) exactly).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iters is None:
        max_iters = default_sweep_budget(mdp, tol)
    v = np.zeros(mdp.num_states)
    residual = math.inf
    iters = 0
    for iters in range(1, max_iters + 1):
        v_new = bellman_apply(mdp, measure, v)
        residual = float(np.max(np.abs(v_new - v)))
        v = v_new
        if residual <= tol:
            break
    else:
        raise ConvergenceError(
            f"value iteration did not reach tol={tol} in {max_iters} sweeps "
            f"(last residual {residual:.3e})",
            residual,
        )
    q = q_backup(mdp, measure, v)
    v_star = q.min(axis=1)
    policy = q.argmin(axis=1)
    return ValueIterationResult(v=v_star, q=q, policy=policy, iters=iters, residual=residual)


def contraction_check(
    mdp: TabularMdp,
    measure: SaddleRiskMeasure,
    trials: int,
    rng: np.random.Generator,
) -> float:
    """Empirical contraction modulus of the risk-aware Bellman operator.

    Samples random value-function pairs in [0, v_max]^S and returns the
    largest observed ratio |T v1 - T v2|_inf / |v1 - v2|_inf.  For a
    convex risk measure this never exceeds the discount factor.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    v_max = mdp.v_max
    worst = 0.0
    for _ in range(trials):
        v1 = rng.uniform(0.0, v_max, size=mdp.num_states)
        v2 = rng.uniform(0.0, v_max, size=mdp.num_states)
        denom = float(np.max(np.abs(v1 - v2)))
        if denom == 0.0:
            continue
        num = float(np.max(np.abs(bellman_apply(mdp, measure, v1) - bellman_apply(mdp, measure, v2))))
        worst = max(worst, num / denom)
    return worst


def classical_value_iteration(
    mdp: TabularMdp,
    tol: float,
    max_iters: int | None = None,
) -> ValueIterationResult:
    """Risk-neutral value iteration on expected costs (reference path).

    Kept free of the risk machinery so it can serve as an independent
    check of the risk-aware oracle under a degenerate measure.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iters is None:
        max_iters = default_sweep_budget(mdp, tol)
    S, A = mdp.num_states, mdp.num_actions
    c_bar = np.empty((S, A))
    for s in range(S):
        for a in range(A):
            vals, probs = mdp.cost_distribution(s, a)
            c_bar[s, a] = float(vals @ probs)
    gamma = mdp.discount
    v = np.zeros(S)
    residual = math.inf
    iters = 0
    for iters in range(1, max_iters + 1):
        q = c_bar + gamma * (mdp.transition @ v)
        v_new = q.min(axis=1)
        residual = float(np.max(np.abs(v_new - v)))
        v = v_new
        if residual <= tol:
            break
    else:
        raise ConvergenceError(
            f"classical value iteration did not reach tol={tol} in {max_iters} sweeps "
            f"(last residual {residual:.3e})",
            residual,
        )
    q = c_bar + gamma * (mdp.transition @ v)
    return ValueIterationResult(
        v=q.min(axis=1), q=q, policy=q.argmin(axis=1), iters=iters, residual=residual
    )
