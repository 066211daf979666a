"""Risk-aware Q-learning: outer asynchronous Q updates, inner risk estimation.

Each outer epoch n freezes the previous table Q^{n-1}, picks one action
by the exploration policy, and walks the MDP for T inner steps.  Every
inner step refreshes the visited pair's saddle-point estimate of the
risk of the continuation value and blends the resulting cost-to-go
target into that pair's Q entry with step size 1 / (epoch visit count)^k.
Pairs not visited in an epoch keep their previous values bit for bit.

A risk-neutral asynchronous Q-learning baseline with the same step-size
and exploration conventions is included for head-to-head runs.
"""

from __future__ import annotations

import io
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from riskq.mdp import TabularMdp, epsilon_greedy_action, q_step_size
from riskq.risk import SaddleRiskMeasure
from riskq.saddle import SaspParams, sasp_init, sasp_step

_QTABLE_MAGIC = "riskq-qtable 1"


@dataclass(frozen=True)
class RaqlParams:
    """Loop sizes, learning rates, and exploration for a Q-learning run.

    ``cost_mode`` defaults to the MDP's own cost mode; setting it
    explicitly only serves to assert the expectation.  ``q_update``
    selects whether the Q entry is refreshed at every inner step
    ("step", the default) or only on the last inner step of each epoch
    ("epoch", for sensitivity runs).
    """

    outer_iters: int
    inner_iters: int
    learning_rate_k: float = 1.0
    exploration_epsilon: float = 0.3
    sasp: SaspParams = field(default_factory=SaspParams)
    cost_mode: str | None = None
    seed: int = 0
    log_every: int = 10
    q_update: str = "step"

    def __post_init__(self):
        if self.outer_iters < 0 or self.inner_iters < 1:
            raise ValueError("need outer_iters >= 0 and inner_iters >= 1")
        if not 0.5 < self.learning_rate_k <= 1.0:
            raise ValueError("learning_rate_k must lie in (1/2, 1]")
        if not 0.0 < self.exploration_epsilon < 1.0:
            raise ValueError("exploration_epsilon must lie in (0, 1)")
        if self.q_update not in ("step", "epoch"):
            raise ValueError("q_update must be 'step' or 'epoch'")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")


def cost_to_go(
    q_prev: np.ndarray,
    s_next: int,
    cost: float,
    measure: SaddleRiskMeasure,
    averaged: tuple[float, np.ndarray],
    gamma: float,
    mode: str,
) -> float:
    """Estimated Q target given the frozen previous-epoch table.

    deterministic: c + gamma * G(v(s'), y~, z~)
    random:        G(c + gamma * v(s'), y~, z~)

    with v(s') = min_a q_prev(s', a) and (y~, z~) the pair's current
    moving-average saddle estimate.
    """
    y_bar, z_bar = averaged
    v_next = float(q_prev[s_next].min())
    if mode == "random":
        return measure.g_eval(cost + gamma * v_next, y_bar, z_bar)
    return cost + gamma * measure.g_eval(v_next, y_bar, z_bar)


class RaqlState:
    """Mutable per-run state: tables, per-pair saddle estimates, bookkeeping.

    ``q`` is the working table of the current epoch; ``q_prev`` the
    frozen table of the previous epoch; ``v_prev`` its rowwise minimum.
    ``visit_counts`` start at one ("one plus prior visits") and advance
    once per epoch per distinct visited pair.
    """

    __slots__ = (
        "q", "q_prev", "v_prev", "saddles", "visit_counts", "current_state",
        "epoch_action", "visited", "trace", "_cum_rows", "_cost_real",
        "_noise_cum", "_random_cost", "_gamma", "_sup",
    )

    def __init__(self, mdp: TabularMdp, measure: SaddleRiskMeasure):
        S, A = mdp.num_states, mdp.num_actions
        self.q = np.zeros((S, A))
        self.q_prev = np.zeros((S, A))
        self.v_prev = np.zeros(S)
        self.saddles = [[sasp_init(measure) for _ in range(A)] for _ in range(S)]
        self.visit_counts = np.ones((S, A), dtype=np.int64)
        self.current_state = 0
        self.epoch_action = 0
        self.visited: set[tuple[int, int]] = set()
        self.trace: list[tuple[int, float]] = []
        self._gamma = mdp.discount
        self._sup = measure.support
        self._random_cost = mdp.cost.mode == "random"
        self._cum_rows = [
            [np.cumsum(mdp.transition[s, a]).tolist() for a in range(A)] for s in range(S)
        ]
        if self._random_cost:
            probs = [p for _, p in mdp.cost.noise]
            self._noise_cum = np.cumsum(probs).tolist()
            self._cost_real = [
                [tuple(mdp.cost.realizations(s, a)[0]) for a in range(A)] for s in range(S)
            ]
        else:
            self._noise_cum = None
            self._cost_real = [[(float(mdp.cost.table[s, a]),) for a in range(A)] for s in range(S)]

    def begin_epoch(self, action: int) -> None:
        self.epoch_action = action
        self.visited.clear()

    def end_epoch(self) -> None:
        np.copyto(self.q_prev, self.q)
        np.min(self.q_prev, axis=1, out=self.v_prev)
        for s, a in self.visited:
            self.visit_counts[s, a] += 1


def raql_inner_step(
    state: RaqlState,
    mdp: TabularMdp,
    measure: SaddleRiskMeasure,
    params: RaqlParams,
    n: int,
    t: int,
    rng: np.random.Generator,
) -> RaqlState:
    """One inner iteration of epoch n; advances ``state`` in place.

    Samples a transition under the epoch action, forms the cost-to-go
    target from the frozen previous-epoch table at the pair's averaged
    saddle point, updates that pair's Q entry, then advances the pair's
    saddle-point iterate on the freshly observed continuation sample.
    """
    s = state.current_state
    a = state.epoch_action
    gamma = state._gamma

    u = rng.random()
    cum = state._cum_rows[s][a]
    s_next = bisect_right(cum, u)
    if s_next >= len(cum):
        s_next = len(cum) - 1
    reals = state._cost_real[s][a]
    if state._random_cost:
        i = bisect_right(state._noise_cum, rng.random())
        cost = reals[i if i < len(reals) else len(reals) - 1]
    else:
        cost = reals[0]

    pair_state = state.saddles[s][a]
    y_bar, z_bar = pair_state.y_bar, pair_state.z_bar
    v_next = state.v_prev[s_next]
    if state._random_cost:
        sample = cost + gamma * v_next
        q_hat = measure.g_eval(sample, y_bar, z_bar)
    else:
        sample = v_next
        q_hat = cost + gamma * measure.g_eval(v_next, y_bar, z_bar)

    if params.q_update == "step" or t == params.inner_iters:
        theta = float(state.visit_counts[s, a]) ** (-params.learning_rate_k)
        state.q[s, a] = (1.0 - theta) * state.q_prev[s, a] + theta * q_hat
    state.visited.add((s, a))

    # Early-run Q transients can push continuation values a hair past the
    # modeled support; the saddle update only accepts in-support samples.
    lo, hi = state._sup
    if sample > hi:
        sample = hi
    elif sample < lo:
        sample = lo
    sasp_step(pair_state, measure, sample, params.sasp)
    state.current_state = s_next
    return state


def run_raql(
    mdp: TabularMdp,
    measure: SaddleRiskMeasure,
    params: RaqlParams,
    reference_q: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    explore=None,
) -> tuple[np.ndarray, list[tuple[int, float]]]:
    """Run the full inner-outer loop and return (final Q table, error trace).

    The trace holds (epoch, |Q - reference|_2 / |reference|_2) every
    ``log_every`` epochs (and at the final epoch) when ``reference_q``
    is given.  Runs are bit-reproducible for a fixed seed: the only
    draws are the per-epoch action choice and the per-step transition
    and cost-noise uniforms, in that order.

    ``explore`` swaps the behavior policy: a callable
    (q_table, state, rng) -> action drawn once per epoch.  It must give
    every action positive probability; the default is the exploring
    greedy rule at ``exploration_epsilon``.
    """
    if params.cost_mode is not None and params.cost_mode != mdp.cost.mode:
        raise ValueError(
            f"params expect {params.cost_mode} costs but the MDP uses {mdp.cost.mode}"
        )
    if rng is None:
        rng = np.random.default_rng(params.seed)
    state = RaqlState(mdp, measure)
    ref_norm = None if reference_q is None else float(np.linalg.norm(reference_q))
    eps = params.exploration_epsilon
    if explore is None:
        def explore(q, s, gen):
            return epsilon_greedy_action(q, s, eps, gen)
    T = params.inner_iters
    for n in range(1, params.outer_iters + 1):
        action = explore(state.q_prev, state.current_state, rng)
        state.begin_epoch(action)
        for t in range(1, T + 1):
            raql_inner_step(state, mdp, measure, params, n, t, rng)
        state.end_epoch()
        if ref_norm is not None and (n % params.log_every == 0 or n == params.outer_iters):
            err = float(np.linalg.norm(state.q - reference_q)) / ref_norm
            state.trace.append((n, err))
    return state.q.copy(), list(state.trace)


def risk_neutral_q_learning(
    mdp: TabularMdp,
    params: RaqlParams,
    reference_q: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, list[tuple[int, float]]]:
    """Classical asynchronous Q-learning baseline.

    One update per sample with the same step-size rule (1 / visits^k,
    counted per visit) and the same exploring action choice, run for
    outer_iters * inner_iters samples so budgets match the risk-aware
    loop.  Trace epochs count blocks of ``inner_iters`` samples so the
    iteration grid lines up with risk-aware traces.
    """
    if rng is None:
        rng = np.random.default_rng(params.seed)
    S, A = mdp.num_states, mdp.num_actions
    gamma = mdp.discount
    q = np.zeros((S, A))
    counts = np.ones((S, A), dtype=np.int64)
    cum_rows = [[np.cumsum(mdp.transition[s, a]).tolist() for a in range(A)] for s in range(S)]
    random_cost = mdp.cost.mode == "random"
    if random_cost:
        noise_cum = np.cumsum([p for _, p in mdp.cost.noise]).tolist()
        reals = [[tuple(mdp.cost.realizations(s, a)[0]) for a in range(A)] for s in range(S)]
    else:
        noise_cum = None
        reals = [[(float(mdp.cost.table[s, a]),) for a in range(A)] for s in range(S)]
    k = params.learning_rate_k
    eps = params.exploration_epsilon
    total = params.outer_iters * params.inner_iters
    stride = params.log_every * params.inner_iters
    ref_norm = None if reference_q is None else float(np.linalg.norm(reference_q))
    trace: list[tuple[int, float]] = []
    s = 0
    for step in range(1, total + 1):
        a = epsilon_greedy_action(q, s, eps, rng)
        cum = cum_rows[s][a]
        s_next = bisect_right(cum, rng.random())
        if s_next >= len(cum):
            s_next = len(cum) - 1
        row = reals[s][a]
        if random_cost:
            i = bisect_right(noise_cum, rng.random())
            cost = row[i if i < len(row) else len(row) - 1]
        else:
            cost = row[0]
        theta = q_step_size(int(counts[s, a]), k)
        target = cost + gamma * q[s_next].min()
        q[s, a] = (1.0 - theta) * q[s, a] + theta * target
        counts[s, a] += 1
        s = s_next
        if ref_norm is not None and (step % stride == 0 or step == total):
            err = float(np.linalg.norm(q - reference_q)) / ref_norm
            epoch = -(-step // params.inner_iters)
            if not trace or trace[-1][0] != epoch:
                trace.append((epoch, err))
    return q, trace


def save_qtable(q: np.ndarray, path, comments: dict | None = None) -> None:
    """Write a Q table as versioned text (shortest round-trip float repr).

    ``comments`` become ``# key=value`` lines after the magic header so
    harness outputs can embed provenance (config hash and the like).
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_qtable(q, comments))


def format_qtable(q: np.ndarray, comments: dict | None = None) -> str:
    q = np.asarray(q, dtype=float)
    if q.ndim != 2:
        raise ValueError("Q table must be 2-D")
    out = io.StringIO()
    out.write(f"{_QTABLE_MAGIC}\n")
    for key, value in (comments or {}).items():
        out.write(f"# {key}={value}\n")
    out.write(f"shape {q.shape[0]} {q.shape[1]}\n")
    for row in q:
        out.write(" ".join(repr(float(x)) for x in row) + "\n")
    return out.getvalue()


def load_qtable(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    if not lines or lines[0] != _QTABLE_MAGIC:
        raise ValueError("unsupported Q table file header")
    _, s, a = lines[1].split()
    rows = [[float(x) for x in lines[2 + i].split()] for i in range(int(s))]
    q = np.array(rows)
    if q.shape != (int(s), int(a)):
        raise ValueError("Q table shape mismatch")
    return q
