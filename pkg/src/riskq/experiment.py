"""Experiment harness: validated configs, seeded runs, CSV traces, summaries.

One JSON config drives a full experiment: the MDP (a file or a generator
spec), the risk measure, the Q-learning parameters, the algorithms to
run, and the seeds.  Every emitted file embeds the config hash; CSV
bodies contain only deterministic data so reruns are byte-identical
(timestamps live in comment headers).
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, replace
from datetime import datetime, timezone

import numpy as np

from riskq.dp import classical_value_iteration, value_iteration
from riskq.mdp import TabularMdp, generate_random_mdp, load_mdp
from riskq.qlearn import RaqlParams, risk_neutral_q_learning, run_raql, save_qtable
from riskq.risk import (
    BoxSimplex,
    SaddleRiskMeasure,
    entropic_utility,
    make_abs_semidev,
    make_cvar,
    make_kusuoka,
    make_oce,
)
from riskq.saddle import SaspParams, WindowRule

CONFIG_VERSION = 1
SUMMARY_SCHEMA_VERSION = 1
TRACE_MAGIC = "riskq-trace 1"

ALGORITHMS = ("raql", "risk_neutral_ql", "dp_oracle", "sasp_ablation")
MEASURE_FAMILIES = ("cvar", "oce_entropic", "kusuoka", "abs_semidev")


class ConfigError(ValueError):
    """Validation failure with (field path, message) pairs."""

    def __init__(self, issues: list[tuple[str, str]]):
        self.issues = issues
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in issues))


def config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def validate_config(raw: dict, base_dir: str = ".") -> list[tuple[str, str]]:
    issues: list[tuple[str, str]] = []

    def check(cond: bool, path: str, msg: str) -> bool:
        if not cond:
            issues.append((path, msg))
        return cond

    if not check(isinstance(raw, dict), "", "config must be a JSON object"):
        return issues
    check(raw.get("version") == CONFIG_VERSION, "version",
          f"expected version {CONFIG_VERSION}")

    mdp_spec = raw.get("mdp")
    if check(isinstance(mdp_spec, dict), "mdp", "required object"):
        has_file = "file" in mdp_spec
        has_gen = "generate" in mdp_spec
        check(has_file != has_gen, "mdp", "exactly one of 'file' or 'generate'")
        if has_file:
            path = os.path.join(base_dir, mdp_spec["file"])
            check(os.path.exists(path), "mdp.file", f"no such file: {path}")
        if has_gen and check(isinstance(mdp_spec["generate"], dict), "mdp.generate", "must be an object"):
            gen = mdp_spec["generate"]
            for key in ("num_states", "num_actions", "seed"):
                check(isinstance(gen.get(key), int) and gen.get(key, 0) >= (1 if key != "seed" else 0),
                      f"mdp.generate.{key}", "required nonnegative integer (sizes >= 1)")
            check(gen.get("cost_mode", "deterministic") in ("deterministic", "random"),
                  "mdp.generate.cost_mode", "must be 'deterministic' or 'random'")
            disc = gen.get("discount", 0.9)
            check(isinstance(disc, (int, float)) and 0 < disc < 1,
                  "mdp.generate.discount", "must lie in (0, 1)")

    meas = raw.get("measure")
    if check(isinstance(meas, dict), "measure", "required object"):
        family = meas.get("family")
        if check(family in MEASURE_FAMILIES, "measure.family",
                 f"must be one of {MEASURE_FAMILIES}"):
            if family == "cvar":
                a = meas.get("alpha")
                check(isinstance(a, (int, float)) and 0 <= a < 1, "measure.alpha",
                      "required, in [0, 1)")
            elif family == "oce_entropic":
                lam = meas.get("lam", meas.get("lambda"))
                check(isinstance(lam, (int, float)) and lam > 0, "measure.lam",
                      "required, positive (key 'lam' or 'lambda')")
            elif family == "kusuoka":
                alphas = meas.get("alphas")
                ok = isinstance(alphas, list) and alphas and all(
                    isinstance(a, (int, float)) and 0 <= a < 1 for a in alphas
                )
                ok = ok and all(b > a for a, b in zip(alphas, alphas[1:]))
                check(ok, "measure.alphas", "required strictly increasing list in [0, 1)")
            elif family == "abs_semidev":
                iota = meas.get("iota")
                check(isinstance(iota, (int, float)) and 0 <= iota <= 1, "measure.iota",
                      "required, in [0, 1]")
        sup = meas.get("support")
        if sup is not None:
            check(isinstance(sup, list) and len(sup) == 2 and sup[0] <= sup[1],
                  "measure.support", "must be [lo, hi] with lo <= hi")

    rq = raw.get("raql")
    if check(isinstance(rq, dict), "raql", "required object"):
        check(isinstance(rq.get("outer_iters"), int) and rq.get("outer_iters", -1) >= 0,
              "raql.outer_iters", "required integer >= 0")
        check(isinstance(rq.get("inner_iters"), int) and rq.get("inner_iters", 0) >= 1,
              "raql.inner_iters", "required integer >= 1")
        k = rq.get("learning_rate_k", 1.0)
        check(isinstance(k, (int, float)) and 0.5 < k <= 1.0,
              "raql.learning_rate_k", "must lie in (1/2, 1]")
        eps = rq.get("exploration_epsilon", 0.3)
        check(isinstance(eps, (int, float)) and 0 < eps < 1,
              "raql.exploration_epsilon", "must lie in (0, 1)")
        sasp = rq.get("sasp", {})
        if check(isinstance(sasp, dict), "raql.sasp", "must be an object"):
            win = sasp.get("window", "half")
            check(win in ("half", "full", "fraction"), "raql.sasp.window",
                  "must be 'half', 'full', or 'fraction'")

    algs = raw.get("algorithms")
    if check(isinstance(algs, list) and len(algs) > 0, "algorithms",
             "at least one algorithm required"):
        for i, alg in enumerate(algs):
            check(alg in ALGORITHMS, f"algorithms[{i}]", f"must be one of {ALGORITHMS}")

    seeds = raw.get("seeds")
    if check(isinstance(seeds, list) and len(seeds) > 0, "seeds", "nonempty list required"):
        for i, s in enumerate(seeds):
            check(isinstance(s, int), f"seeds[{i}]", "must be an integer")

    log_every = raw.get("log_every", 10)
    check(isinstance(log_every, int) and log_every >= 1, "log_every", "integer >= 1")
    dp_tol = raw.get("dp_tol", 0.01)
    check(isinstance(dp_tol, (int, float)) and dp_tol > 0, "dp_tol", "positive number")
    return issues


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    base_dir: str = "."

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    @property
    def algorithms(self) -> list[str]:
        return list(self.raw["algorithms"])

    @property
    def seeds(self) -> list[int]:
        return list(self.raw["seeds"])

    @property
    def log_every(self) -> int:
        return int(self.raw.get("log_every", 10))

    @property
    def dp_tol(self) -> float:
        return float(self.raw.get("dp_tol", 0.01))

    @property
    def out_dir(self) -> str | None:
        return self.raw.get("out_dir")


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    base_dir = os.path.dirname(os.path.abspath(path))
    issues = validate_config(raw, base_dir)
    if issues:
        raise ConfigError(issues)
    return ExperimentConfig(raw=raw, base_dir=base_dir)


def config_from_dict(raw: dict, base_dir: str = ".") -> ExperimentConfig:
    issues = validate_config(raw, base_dir)
    if issues:
        raise ConfigError(issues)
    return ExperimentConfig(raw=raw, base_dir=base_dir)


def build_mdp(cfg: ExperimentConfig) -> TabularMdp:
    spec = cfg.raw["mdp"]
    if "file" in spec:
        return load_mdp(os.path.join(cfg.base_dir, spec["file"]))
    gen = spec["generate"]
    return generate_random_mdp(
        gen["num_states"],
        gen["num_actions"],
        seed=gen["seed"],
        cost_mode=gen.get("cost_mode", "deterministic"),
        noise_spread=gen.get("noise_spread", 0.25),
        discount=gen.get("discount", 0.9),
    )


def build_measure(spec: dict, default_support: tuple[float, float]) -> SaddleRiskMeasure:
    support = tuple(spec.get("support", default_support))
    family = spec["family"]
    if family == "cvar":
        return make_cvar(spec["alpha"], support)
    if family == "oce_entropic":
        return make_oce(entropic_utility(spec.get("lam", spec.get("lambda"))), support)
    if family == "kusuoka":
        alphas = spec["alphas"]
        weight_set = None
        if "weight_lo" in spec or "weight_hi" in spec:
            m = len(alphas)
            weight_set = BoxSimplex(
                m,
                np.asarray(spec.get("weight_lo", [0.0] * m), dtype=float),
                np.asarray(spec.get("weight_hi", [1.0] * m), dtype=float),
            )
        return make_kusuoka(alphas, support, weight_set)
    if family == "abs_semidev":
        return make_abs_semidev(spec["iota"], support)
    raise ConfigError([("measure.family", f"unknown family {family!r}")])


def build_raql_params(cfg: ExperimentConfig, mdp: TabularMdp, seed: int) -> RaqlParams:
    rq = cfg.raw["raql"]
    sa = rq.get("sasp", {})
    window_kind = sa.get("window", "half")
    if window_kind == "fraction":
        window = WindowRule.fraction(sa.get("window_fraction", 0.5))
    else:
        window = WindowRule(window_kind)
    sasp = SaspParams(
        step_scale=sa.get("step_scale", 1.0),
        step_exponent=sa.get("step_exponent", 0.5),
        window=window,
        scale_y=sa.get("scale_y", 1.0),
        scale_z=sa.get("scale_z", 1.0),
        use_moving_average=sa.get("use_moving_average", True),
    )
    return RaqlParams(
        outer_iters=rq["outer_iters"],
        inner_iters=rq["inner_iters"],
        learning_rate_k=rq.get("learning_rate_k", 1.0),
        exploration_epsilon=rq.get("exploration_epsilon", 0.3),
        sasp=sasp,
        cost_mode=mdp.cost.mode,
        seed=seed,
        log_every=cfg.log_every,
        q_update=rq.get("q_update", "step"),
    )


# ---------------------------------------------------------------------------
# Trace files
# ---------------------------------------------------------------------------

def write_trace(path, cfg_hash: str, algorithm: str, seed: int,
                rows: list[tuple[int, float]]) -> None:
    """CSV trace with comment headers; the body is deterministic."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {TRACE_MAGIC}\n")
        fh.write(f"# config_hash={cfg_hash}\n")
        fh.write(f"# algorithm={algorithm}\n")
        fh.write(f"# seed={seed}\n")
        fh.write(f"# generated={datetime.now(timezone.utc).isoformat()}\n")
        fh.write("outer_iter,relative_error\n")
        for it, err in rows:
            fh.write(f"{it},{err!r}\n")


def read_trace(path) -> tuple[dict, list[tuple[int, float]]]:
    meta: dict = {}
    rows: list[tuple[int, float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, val = body.split("=", 1)
                    meta[key.strip()] = val.strip()
                continue
            if line.startswith("outer_iter") or not line:
                continue
            it, err = line.split(",")
            rows.append((int(it), float(err)))
    return meta, rows


def trace_body(path) -> bytes:
    """The deterministic portion of a trace file (everything but # headers)."""
    with open(path, "rb") as fh:
        return b"".join(ln for ln in fh if not ln.startswith(b"#"))


# ---------------------------------------------------------------------------
# Solve
# ---------------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig, out_dir: str) -> dict:
    """Run every (algorithm, seed) in the config; write traces and a summary.

    The exact DP oracle runs first whenever any traced algorithm needs a
    reference table.  Returns the summary dict (also written as JSON).
    """
    os.makedirs(out_dir, exist_ok=True)
    mdp = build_mdp(cfg)
    measure = build_measure(cfg.raw["measure"], (0.0, mdp.v_max))
    cfg_hash = cfg.hash
    algorithms = cfg.algorithms

    needs_risk_ref = any(a in ("raql", "sasp_ablation", "dp_oracle") for a in algorithms)
    needs_neutral_ref = "risk_neutral_ql" in algorithms

    summary: dict = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "config_hash": cfg_hash,
        "config": cfg.raw,
        "runs": [],
    }

    q_star = None
    if needs_risk_ref:
        t0 = time.perf_counter()
        vi = value_iteration(mdp, measure, tol=cfg.dp_tol)
        dp_ms = 1000.0 * (time.perf_counter() - t0)
        q_star = vi.q
        save_qtable(q_star, os.path.join(out_dir, "q_star.txt"),
                    {"config_hash": cfg_hash})
        summary["dp_oracle"] = {
            "iters": vi.iters,
            "residual": vi.residual,
            "wall_clock_ms": dp_ms,
            "q_star_file": "q_star.txt",
        }
    q_star_neutral = None
    if needs_neutral_ref:
        t0 = time.perf_counter()
        vi_n = classical_value_iteration(mdp, tol=cfg.dp_tol)
        dp_ms = 1000.0 * (time.perf_counter() - t0)
        q_star_neutral = vi_n.q
        save_qtable(q_star_neutral, os.path.join(out_dir, "q_star_neutral.txt"),
                    {"config_hash": cfg_hash})
        summary["dp_neutral"] = {
            "iters": vi_n.iters,
            "residual": vi_n.residual,
            "wall_clock_ms": dp_ms,
            "q_star_file": "q_star_neutral.txt",
        }

    for algorithm in algorithms:
        if algorithm == "dp_oracle":
            continue  # recorded above; deterministic, not per-seed
        for seed in cfg.seeds:
            params = build_raql_params(cfg, mdp, seed)
            if algorithm == "sasp_ablation":
                params = replace(params, sasp=replace(params.sasp, use_moving_average=False))
            rng = np.random.default_rng(seed)
            t0 = time.perf_counter()
            if algorithm == "risk_neutral_ql":
                q, trace = risk_neutral_q_learning(mdp, params, q_star_neutral, rng)
                ref = q_star_neutral
            else:
                q, trace = run_raql(mdp, measure, params, q_star, rng)
                ref = q_star
            wall_ms = 1000.0 * (time.perf_counter() - t0)
            trace_file = f"trace_{algorithm}_seed{seed}.csv"
            write_trace(os.path.join(out_dir, trace_file), cfg_hash, algorithm, seed, trace)
            final_err = trace[-1][1] if trace else (
                float(np.linalg.norm(q - ref) / np.linalg.norm(ref)) if ref is not None else None
            )
            summary["runs"].append({
                "algorithm": algorithm,
                "seed": seed,
                "final_relative_error": final_err,
                "trace_file": trace_file,
                "wall_clock_ms": wall_ms,
                "config_hash": cfg_hash,
            })

    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def load_summary(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        summary = json.load(fh)
    major = summary.get("schema_version")
    if major != SUMMARY_SCHEMA_VERSION:
        raise ValueError(f"unsupported summary schema version {major!r}")
    return summary


# ---------------------------------------------------------------------------
# Compare
# ---------------------------------------------------------------------------

def compare_traces(paths: list[str], out_dir: str) -> dict:
    """Merge traces onto a common iteration grid and emit plot data.

    Writes ``plot_data.csv`` (long format: algorithm, seed, iteration,
    relative_error) and ``comparison.csv`` (per-iteration median and
    quartiles per algorithm; plus a first-minus-second difference column
    when exactly two trace files are given).  Refuses traces whose
    config hashes differ.
    """
    if not paths:
        raise ConfigError([("traces", "at least one trace file required")])
    parsed = []
    for path in paths:
        meta, rows = read_trace(path)
        if not rows:
            raise ConfigError([(str(path), "trace has no data rows")])
        parsed.append((meta, rows))
    hashes = {meta.get("config_hash") for meta, _ in parsed}
    if len(hashes) > 1:
        raise ConfigError([
            ("traces", f"config hashes differ ({sorted(hashes)}); "
                       "refusing to compare runs of different experiments")
        ])
    grids = [set(it for it, _ in rows) for _, rows in parsed]
    common = sorted(set.intersection(*grids))
    if not common:
        raise ConfigError([("traces", "no common iteration grid to compare on")])

    os.makedirs(out_dir, exist_ok=True)
    cfg_hash = hashes.pop()

    long_rows = []
    for meta, rows in parsed:
        alg = meta.get("algorithm", "unknown")
        seed = meta.get("seed", "0")
        table = dict(rows)
        for it in common:
            long_rows.append((alg, seed, it, table[it]))
    plot_path = os.path.join(out_dir, "plot_data.csv")
    with open(plot_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {TRACE_MAGIC}\n# config_hash={cfg_hash}\n")
        fh.write("algorithm,seed,iteration,relative_error\n")
        for alg, seed, it, err in long_rows:
            fh.write(f"{alg},{seed},{it},{err!r}\n")

    by_alg: dict[str, list[dict]] = {}
    for meta, rows in parsed:
        by_alg.setdefault(meta.get("algorithm", "unknown"), []).append(dict(rows))
    alg_names = sorted(by_alg)
    comp_path = os.path.join(out_dir, "comparison.csv")
    pairwise = len(parsed) == 2
    with open(comp_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {TRACE_MAGIC}\n# config_hash={cfg_hash}\n")
        cols = ["iteration"]
        for alg in alg_names:
            cols += [f"{alg}_median", f"{alg}_q25", f"{alg}_q75"]
        if pairwise:
            cols.append("difference")
        fh.write(",".join(cols) + "\n")
        for it in common:
            fields = [str(it)]
            for alg in alg_names:
                vals = np.array([tab[it] for tab in by_alg[alg]])
                med, q25, q75 = (float(np.median(vals)),
                                 float(np.percentile(vals, 25)),
                                 float(np.percentile(vals, 75)))
                fields += [repr(med), repr(q25), repr(q75)]
            if pairwise:
                d = dict(parsed[0][1])[it] - dict(parsed[1][1])[it]
                fields.append(repr(d))
            fh.write(",".join(fields) + "\n")
    medians = {
        alg: float(np.median([tab[common[-1]] for tab in by_alg[alg]]))
        for alg in alg_names
    }
    return {
        "plot_data": plot_path,
        "comparison": comp_path,
        "iterations": common,
        "final_medians": medians,
    }
