import json

import pytest

from riskq.cli import main
from riskq.experiment import (
    ConfigError,
    compare_traces,
    config_from_dict,
    config_hash,
    load_summary,
    run_experiment,
    trace_body,
    validate_config,
    write_trace,
)
from riskq.mdp import load_mdp
from riskq.qlearn import load_qtable


def _tiny_config(out_dir=None, algorithms=None, seeds=None):
    return {
        "version": 1,
        "mdp": {"generate": {"num_states": 3, "num_actions": 2, "seed": 5,
                              "cost_mode": "random", "discount": 0.2}},
        "measure": {"family": "cvar", "alpha": 0.1},
        "raql": {"outer_iters": 200, "inner_iters": 5, "learning_rate_k": 1.0,
                 "exploration_epsilon": 0.4,
                 "sasp": {"step_scale": 1.0, "step_exponent": 0.5, "window": "half"}},
        "algorithms": algorithms or ["raql", "risk_neutral_ql"],
        "seeds": seeds or [1, 2],
        "log_every": 50,
        "dp_tol": 1e-4,
        **({"out_dir": out_dir} if out_dir else {}),
    }


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

def test_validate_reports_field_paths():
    raw = _tiny_config()
    raw["algorithms"] = []
    raw["seeds"] = []
    raw["measure"] = {"family": "sharpe"}
    issues = validate_config(raw)
    paths = {p for p, _ in issues}
    assert "algorithms" in paths
    assert "seeds" in paths
    assert "measure.family" in paths


def test_validate_missing_mdp_file(tmp_path):
    raw = _tiny_config()
    raw["mdp"] = {"file": "no_such.mdp"}
    issues = validate_config(raw, str(tmp_path))
    assert any(p == "mdp.file" for p, _ in issues)


def test_config_error_raised():
    raw = _tiny_config()
    raw["algorithms"] = []
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_entropic_measure_accepts_lambda_alias():
    raw = _tiny_config()
    raw["measure"] = {"family": "oce_entropic", "lambda": 0.01}
    cfg = config_from_dict(raw)
    assert cfg.raw["measure"]["lambda"] == 0.01
    raw2 = _tiny_config()
    raw2["measure"] = {"family": "oce_entropic", "lam": 0.01}
    config_from_dict(raw2)


def test_config_hash_stable_and_order_free():
    raw = _tiny_config()
    reordered = json.loads(json.dumps(raw, sort_keys=True))
    assert config_hash(raw) == config_hash(reordered)
    other = _tiny_config()
    other["seeds"] = [1, 3]
    assert config_hash(raw) != config_hash(other)


# ---------------------------------------------------------------------------
# gen-mdp CLI
# ---------------------------------------------------------------------------

def test_gen_mdp_round_trip(tmp_path):
    out = tmp_path / "mdp.txt"
    rc = main(["gen-mdp", "--states", "4", "--actions", "3", "--seed", "9",
               "--cost-mode", "random", "--out", str(out)])
    assert rc == 0
    mdp = load_mdp(out)
    assert mdp.num_states == 4 and mdp.num_actions == 3


def test_gen_mdp_seed_determinism(tmp_path):
    a, b = tmp_path / "a.mdp", tmp_path / "b.mdp"
    assert main(["gen-mdp", "--states", "3", "--actions", "2", "--seed", "4",
                 "--out", str(a)]) == 0
    assert main(["gen-mdp", "--states", "3", "--actions", "2", "--seed", "4",
                 "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_mdp_degenerate(tmp_path):
    out = tmp_path / "one.mdp"
    assert main(["gen-mdp", "--states", "1", "--actions", "1", "--out", str(out)]) == 0
    mdp = load_mdp(out)
    assert mdp.transition[0, 0, 0] == 1.0


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def test_solve_writes_artifacts_and_is_deterministic(tmp_path):
    cfg = config_from_dict(_tiny_config())
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    summary1 = run_experiment(cfg, str(out1))
    summary2 = run_experiment(cfg, str(out2))
    assert (out1 / "summary.json").exists()
    assert (out1 / "q_star.txt").exists()
    for alg in ("raql", "risk_neutral_ql"):
        for seed in (1, 2):
            name = f"trace_{alg}_seed{seed}.csv"
            assert (out1 / name).exists()
            assert trace_body(out1 / name) == trace_body(out2 / name)
    assert summary1["config_hash"] == summary2["config_hash"]
    errs1 = [r["final_relative_error"] for r in summary1["runs"]]
    errs2 = [r["final_relative_error"] for r in summary2["runs"]]
    assert errs1 == errs2
    # q_star file loads back
    q = load_qtable(out1 / "q_star.txt")
    assert q.shape == (3, 2)


def test_solve_cli_and_seed_override(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(_tiny_config()))
    out = tmp_path / "runs"
    rc = main(["solve", "--config", str(cfg_path), "--out", str(out), "--seed", "7"])
    assert rc == 0
    assert (out / "trace_raql_seed7.csv").exists()
    assert not (out / "trace_raql_seed1.csv").exists()


def test_solve_cli_validation_exit_code(tmp_path):
    cfg_path = tmp_path / "bad.json"
    bad = _tiny_config()
    bad["algorithms"] = []
    cfg_path.write_text(json.dumps(bad))
    rc = main(["solve", "--config", str(cfg_path), "--out", str(tmp_path / "o")])
    assert rc == 1


def test_solve_cli_runtime_exit_code(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(_tiny_config()))
    # unwritable output location: a file used as a directory
    blocker = tmp_path / "blocked"
    blocker.write_text("x")
    rc = main(["solve", "--config", str(cfg_path), "--out", str(blocker / "sub")])
    assert rc == 2


def test_summary_schema_version_enforced(tmp_path):
    cfg = config_from_dict(_tiny_config(algorithms=["dp_oracle"]))
    run_experiment(cfg, str(tmp_path))
    path = tmp_path / "summary.json"
    summary = load_summary(path)
    assert summary["schema_version"] == 1
    broken = json.loads(path.read_text())
    broken["schema_version"] = 99
    path.write_text(json.dumps(broken))
    with pytest.raises(ValueError):
        load_summary(path)


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

def test_compare_identical_traces_zero_difference(tmp_path):
    rows = [(10, 0.5), (20, 0.25), (30, 0.125)]
    t1, t2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trace(t1, "hash1", "raql", 1, rows)
    write_trace(t2, "hash1", "raql", 1, rows)
    result = compare_traces([str(t1), str(t2)], str(tmp_path / "cmp"))
    with open(result["comparison"]) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    header = lines[0].strip().split(",")
    assert header[-1] == "difference"
    for ln in lines[1:]:
        assert float(ln.strip().split(",")[-1]) == 0.0


def test_compare_refuses_mismatched_hashes(tmp_path):
    t1, t2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trace(t1, "hash1", "raql", 1, [(10, 0.5)])
    write_trace(t2, "hash2", "raql", 2, [(10, 0.5)])
    with pytest.raises(ConfigError):
        compare_traces([str(t1), str(t2)], str(tmp_path / "cmp"))
    rc = main(["compare", str(t1), str(t2), "--out", str(tmp_path / "cmp")])
    assert rc == 1


def test_compare_intersects_iteration_grids(tmp_path):
    t1, t2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trace(t1, "h", "raql", 1, [(10, 0.5), (20, 0.4), (30, 0.3)])
    write_trace(t2, "h", "risk_neutral_ql", 1, [(20, 0.6), (30, 0.2), (40, 0.1)])
    result = compare_traces([str(t1), str(t2)], str(tmp_path / "cmp"))
    assert result["iterations"] == [20, 30]
    with open(result["plot_data"]) as fh:
        rows = [ln.strip().split(",") for ln in fh
                if not ln.startswith("#") and not ln.startswith("algorithm")]
    assert {int(r[2]) for r in rows} == {20, 30}
    assert {r[0] for r in rows} == {"raql", "risk_neutral_ql"}


def test_compare_median_bands(tmp_path):
    paths = []
    for seed, errs in ((1, [0.5, 0.3]), (2, [0.7, 0.1]), (3, [0.6, 0.2])):
        p = tmp_path / f"s{seed}.csv"
        write_trace(p, "h", "raql", seed, [(10, errs[0]), (20, errs[1])])
        paths.append(str(p))
    result = compare_traces(paths, str(tmp_path / "cmp"))
    assert result["final_medians"]["raql"] == pytest.approx(0.2)


# ---------------------------------------------------------------------------
# theory CLI
# ---------------------------------------------------------------------------

def _constants(tmp_path, **overrides):
    raw = {
        "k_g": 2.0, "gamma": 0.1, "k_s": 0.0, "k_psi1": 1.0, "kappa": 0.1,
        "delta": 0.1, "eps_tilde": 0.1, "exploration_eps": 0.1,
        "v_max": 1.0, "c": 1.0, "alpha": 0.5, "k": 0.8,
        "num_states": 10, "num_actions": 10,
        "t_grid": [10, 1000, 100000],
    }
    raw.update(overrides)
    path = tmp_path / "consts.json"
    path.write_text(json.dumps(raw))
    return path


def test_theory_table(tmp_path, capsys):
    path = _constants(tmp_path)
    out_csv = tmp_path / "table.csv"
    rc = main(["theory", "--constants", str(path), "--out", str(out_csv)])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "beta_T" in printed
    assert "feasible inner-horizon range" in printed
    lines = out_csv.read_text().strip().splitlines()
    assert lines[0] == "T,beta_T,N_poly,N_linear"
    last = lines[-1].split(",")
    assert 0.0 < float(last[1]) < 1.0


def test_theory_linear_rate_marks_poly_na(tmp_path, capsys):
    path = _constants(tmp_path, k=1.0)
    rc = main(["theory", "--constants", str(path)])
    assert rc == 0
    printed = capsys.readouterr().out
    row = [ln for ln in printed.splitlines() if ln.startswith("100000")][0]
    assert "n/a" in row


def test_theory_infeasible_block(tmp_path, capsys):
    path = _constants(tmp_path, gamma=0.9, k_s=2.0)
    rc = main(["theory", "--constants", str(path)])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "infeasible" in printed


def test_theory_bad_constants_exit_code(tmp_path):
    path = _constants(tmp_path, k_g=0.5)
    rc = main(["theory", "--constants", str(path)])
    assert rc == 1


# ---------------------------------------------------------------------------
# dp CLI
# ---------------------------------------------------------------------------

def test_dp_cli(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(_tiny_config()))
    out = tmp_path / "dp"
    rc = main(["dp", "--config", str(cfg_path), "--out", str(out)])
    assert rc == 0
    q = load_qtable(out / "q_star.txt")
    assert q.shape == (3, 2)
    info = json.loads((out / "dp.json").read_text())
    assert info["iters"] >= 1
