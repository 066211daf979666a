"""Tabular risk-aware MDP toolkit.

Solvers for finite-state, finite-action, discounted MDPs where the
continuation value is scored by a convex risk measure written in
saddle-point form  rho(X) = max_z min_y E[G(X, y, z)].  The package
provides:

  * saddle-point risk measures (CVaR, optimized certainty equivalents,
    CVaR mixtures over a weight simplex, absolute semi-deviation) with
    subgradients and an exact finite-distribution oracle,
  * projected primal-dual stochastic approximation for estimating the
    saddle point from samples,
  * risk-aware Q-learning (inner risk estimation, outer asynchronous
    Q updates) plus a risk-neutral Q-learning baseline,
  * exact risk-aware dynamic programming (value iteration on the
    risk-aware Bellman operator),
  * calculators for the method's convergence-rate bounds,
  * a seeded experiment CLI emitting reproducible CSV traces.
"""

from riskq.mdp import (
    CostSpec,
    TabularMdp,
    epsilon_greedy_action,
    generate_random_mdp,
    load_mdp,
    q_step_size,
    sample_transition,
    save_mdp,
)
from riskq.risk import (
    BoxSimplex,
    FiniteDistribution,
    Interval,
    RiskSolution,
    SaddleRiskMeasure,
    duality_gap,
    exact_risk,
    make_abs_semidev,
    make_cvar,
    make_kusuoka,
    make_oce,
    project,
)
from riskq.saddle import (
    SaspParams,
    SaspState,
    WindowRule,
    gap_bound_f,
    run_sasp,
    sasp_step,
    window_bounds,
)
from riskq.qlearn import (
    RaqlParams,
    RaqlState,
    load_qtable,
    risk_neutral_q_learning,
    run_raql,
    save_qtable,
)
from riskq.dp import (
    ConvergenceError,
    bellman_apply,
    classical_value_iteration,
    contraction_check,
    value_iteration,
)
from riskq.bounds import (
    TheoryConstants,
    beta_from_saddle_term,
    beta_t,
    error_envelope,
    expectation_rate_n,
    sample_complexity_linear,
    sample_complexity_poly,
    t_condition_range,
)

__version__ = "0.1.0"
