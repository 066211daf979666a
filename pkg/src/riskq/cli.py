"""Command-line entry point.

Subcommands:
  gen-mdp   write a seeded random MDP file
  solve     run the algorithms in a config; emit traces and a summary
  compare   merge trace CSVs into plot data and median bands
  theory    evaluate the convergence-rate bounds over a T grid
  dp        run only the exact DP oracle for a config

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from riskq import bounds
from riskq.dp import value_iteration
from riskq.experiment import (
    ConfigError,
    ExperimentConfig,
    build_mdp,
    build_measure,
    compare_traces,
    load_config,
    run_experiment,
)
from riskq.mdp import generate_random_mdp, save_mdp
from riskq.qlearn import save_qtable
from riskq.saddle import WindowRule


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riskq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen-mdp", help="generate a seeded random MDP file")
    p_gen.add_argument("--states", type=int, required=True)
    p_gen.add_argument("--actions", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--cost-mode", choices=["deterministic", "random"],
                       default="deterministic")
    p_gen.add_argument("--discount", type=float, default=0.9)
    p_gen.add_argument("--noise-spread", type=float, default=0.25)
    p_gen.add_argument("--out", required=True)

    p_solve = sub.add_parser("solve", help="run the experiment in a config file")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--out", help="output directory (overrides config out_dir)")
    p_solve.add_argument("--seed", type=int,
                         help="run only this seed instead of the config's list")

    p_cmp = sub.add_parser("compare", help="merge trace CSVs into comparison data")
    p_cmp.add_argument("traces", nargs="+")
    p_cmp.add_argument("--out", required=True)

    p_th = sub.add_parser("theory", help="evaluate rate bounds over a T grid")
    p_th.add_argument("--constants", required=True, help="JSON constants file")
    p_th.add_argument("--out", help="also write the table as CSV here")

    p_dp = sub.add_parser("dp", help="exact DP oracle only")
    p_dp.add_argument("--config", required=True)
    p_dp.add_argument("--out", help="output directory (overrides config out_dir)")
    return parser


def _resolve_out(args, cfg: ExperimentConfig | None = None) -> str:
    out = getattr(args, "out", None)
    if out is None and cfg is not None:
        out = cfg.out_dir
    if out is None:
        raise ConfigError([("out", "no output directory given (flag --out or config out_dir)")])
    return out


def _cmd_gen_mdp(args) -> int:
    mdp = generate_random_mdp(
        args.states, args.actions, seed=args.seed, cost_mode=args.cost_mode,
        noise_spread=args.noise_spread, discount=args.discount,
    )
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    save_mdp(mdp, args.out)
    print(f"wrote {args.out} ({args.states} states, {args.actions} actions, "
          f"{args.cost_mode} costs)")
    return 0


def _cmd_solve(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        raw = dict(cfg.raw)
        raw["seeds"] = [args.seed]
        cfg = ExperimentConfig(raw=raw, base_dir=cfg.base_dir)
    out_dir = _resolve_out(args, cfg)
    summary = run_experiment(cfg, out_dir)
    for run in summary["runs"]:
        err = run["final_relative_error"]
        err_s = "n/a" if err is None else f"{err:.4f}"
        print(f"{run['algorithm']} seed={run['seed']}: final relative error {err_s} "
              f"({run['wall_clock_ms']:.0f} ms)")
    print(f"summary: {os.path.join(out_dir, 'summary.json')}")
    return 0


def _cmd_compare(args) -> int:
    result = compare_traces(args.traces, args.out)
    for alg, med in result["final_medians"].items():
        print(f"{alg}: final median relative error {med:.4f}")
    print(f"wrote {result['plot_data']} and {result['comparison']}")
    return 0


def _cmd_dp(args) -> int:
    cfg = load_config(args.config)
    out_dir = _resolve_out(args, cfg)
    os.makedirs(out_dir, exist_ok=True)
    mdp = build_mdp(cfg)
    measure = build_measure(cfg.raw["measure"], (0.0, mdp.v_max))
    vi = value_iteration(mdp, measure, tol=cfg.dp_tol)
    save_qtable(vi.q, os.path.join(out_dir, "q_star.txt"), {"config_hash": cfg.hash})
    info = {
        "config_hash": cfg.hash,
        "iters": vi.iters,
        "residual": vi.residual,
        "policy": vi.policy.tolist(),
        "value": vi.v.tolist(),
    }
    with open(os.path.join(out_dir, "dp.json"), "w", encoding="utf-8") as fh:
        json.dump(info, fh, indent=2)
        fh.write("\n")
    print(f"value iteration converged in {vi.iters} sweeps (residual {vi.residual:.2e})")
    print(f"wrote {os.path.join(out_dir, 'q_star.txt')}")
    return 0


def _saddle_f(saddle: dict, c: float, alpha: float, window: WindowRule, t: int) -> float:
    ky, kz = saddle["k_y"], saddle["k_z"]
    hy, hz = saddle.get("h_y", 1.0), saddle.get("h_z", 1.0)
    big_l = saddle["l"]
    tau = window.tau(t)
    w = t - tau + 1
    return ((ky / hy + kz / hz) * t**alpha / (c * w)
            + (ky + kz) * big_l / math.sqrt(w)
            + c * (ky + kz) ** 2 * big_l**2 * (hy * ky + hz * kz) * tau ** (-alpha))


def _cmd_theory(args) -> int:
    with open(args.constants, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    const_fields = {f for f in bounds.TheoryConstants.__dataclass_fields__}
    kwargs = {k: v for k, v in raw.items() if k in const_fields}
    try:
        consts = bounds.TheoryConstants(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError([("constants", str(exc))]) from exc
    ns = int(raw.get("num_states", 1))
    na = int(raw.get("num_actions", 1))
    window_kind = raw.get("window", "half")
    window = (WindowRule.fraction(raw.get("window_fraction", 0.5))
              if window_kind == "fraction" else WindowRule(window_kind))
    t_grid = raw.get("t_grid", [10, 100, 1000, 10**4, 10**5, 10**6])
    saddle = raw.get("saddle")

    rng_info = bounds.t_condition_range(consts, window)
    if rng_info.feasible:
        hi = "unbounded" if rng_info.t_max is None else str(rng_info.t_max)
        print(f"feasible inner-horizon range: T in [{rng_info.t_min}, {hi}]")
    else:
        print("infeasible constants for the horizon conditions:")
        print(f"  {rng_info.reason}")

    header = ["T", "beta_T", "N_poly", "N_linear"]
    if saddle:
        header.append("N_expect")
    rows = []
    for t in t_grid:
        row = [str(t)]
        try:
            beta = bounds.beta_t(consts, int(t), window)
            row.append(f"{beta:.6g}")
        except ValueError:
            beta = None
            row.append("domain-error")
        if beta is None or not 0.0 < beta < 1.0:
            row += ["n/a", "n/a"] + (["n/a"] if saddle else [])
            rows.append(row)
            continue
        if consts.k >= 1.0:
            row.append("n/a")
        else:
            row.append(f"{bounds.sample_complexity_poly(consts, beta, ns, na):.6g}")
        row.append(f"{bounds.sample_complexity_linear(consts, beta, ns, na):.6g}")
        if saddle:
            f_t = _saddle_f(saddle, consts.c, consts.alpha, window, int(t))
            try:
                n_exp = bounds.expectation_rate_n(consts, f_t, ns, na, consts.eps_tilde)
                row.append(f"{n_exp:.6g}")
            except ValueError:
                row.append("regime-violation")
        rows.append(row)

    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(header)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        print("  ".join(f.ljust(w) for f, w in zip(row, widths)))
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(row) + "\n")
        print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "gen-mdp": _cmd_gen_mdp,
    "solve": _cmd_solve,
    "compare": _cmd_compare,
    "theory": _cmd_theory,
    "dp": _cmd_dp,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for path, msg in exc.issues:
            print(f"  {path or '<root>'}: {msg}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures map to exit code 2
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
