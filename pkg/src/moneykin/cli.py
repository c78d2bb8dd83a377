"""Command-line entry point.

Subcommands: simulate, fit, fp-solve, oracle, report. Exit codes: 0 success,
2 configuration/input error, 3 invariant failure detected in outputs. The
environment variable MONEYKIN_THREADS caps replica parallelism.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, engine
from .exact import (build_master, detailed_balance_residual, marginal_money,
                    state_count, stationary, stationarity_residual)
from .fitting import ingest_income_table, two_class_decompose
from .fokker_planck import FpProblem, fp_step, fp_stationary, table_function
from .kernels import ExchangeKernel, TIME_REVERSIBLE
from .ledger import ConfigError, UsageError
from . import serialize

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="moneykin",
                                description="conserved-money exchange economies")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(required=True)

    sim = sub.add_parser("simulate", help="run the Monte Carlo engine")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--seed", type=int, default=None,
                     help="override the config seed")
    sim.add_argument("--replicas", type=int, default=None)
    sim.add_argument("--quiet", action="store_true")
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="two-class income decomposition")
    fit.add_argument("--data", required=True)
    fit.add_argument("--out", required=True)
    fit.add_argument("--tail-policy", default="purity",
                     choices=["purity", "quantile", "ks-scan"])
    fit.add_argument("--quiet", action="store_true")
    fit.set_defaults(func=cmd_fit)

    fp = sub.add_parser("fp-solve", help="drift-diffusion PDE solve")
    fp.add_argument("--config", required=True)
    fp.add_argument("--out", required=True)
    fp.add_argument("--quiet", action="store_true")
    fp.set_defaults(func=cmd_fp_solve)

    orc = sub.add_parser("oracle", help="exact small-instance reference")
    orc.add_argument("--agents", type=int, required=True)
    orc.add_argument("--total", type=int, required=True)
    orc.add_argument("--kernel", default="additive-fixed")
    orc.add_argument("--delta0", type=int, default=1)
    orc.add_argument("--gamma", type=float, default=0.05)
    orc.add_argument("--delta-max", type=int, default=1)
    orc.add_argument("--m-min", type=int, default=0)
    orc.add_argument("--out", required=True)
    orc.add_argument("--quiet", action="store_true")
    orc.set_defaults(func=cmd_oracle)

    rep = sub.add_parser("report", help="summarize a completed run directory")
    rep.add_argument("--run-dir", required=True)
    rep.add_argument("--quiet", action="store_true")
    rep.set_defaults(func=cmd_report)
    return p


def _say(args, msg):
    if not args.quiet:
        print(msg)


def cmd_simulate(args) -> int:
    config, raw = serialize.load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.replicas is not None:
        overrides["replicas"] = args.replicas
    if overrides:
        raw = dict(raw, **overrides)
        config = serialize.config_from_dict(
            {k: v for k, v in raw.items() if k != "debug_inject_fault"})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    traj = engine.run(config)

    if raw.get("debug_inject_fault") == "conservation":
        # testing hook: corrupt one balance after the run so the invariant
        # checks must catch it
        traj[0].final_money[0] += 1

    outputs = []
    checks = {}
    scale = max(config.temperature, 1.0)
    for rep in traj.replicas:
        tag = f"r{rep.replica}"
        ent = rep.entropy_series()
        temp = rep.mean_series(config.n)
        ks = rep.ks_exp_series(scale)
        gini = _gini_or_nan(rep)
        acc = _acceptance_series(rep)
        tpath = out / f"trajectory_{tag}.csv"
        serialize.write_trajectory_csv(tpath, rep.ticks, ent, temp, gini, ks, acc)
        outputs.append(tpath.name)
        hpath = out / f"histogram_{tag}.csv"
        support = "signed" if rep.hist_lo < 0 else "nonnegative"
        serialize.write_histogram_csv(hpath, rep.estimate(-1, support))
        outputs.append(hpath.name)
        spath = out / f"final_state_{tag}.csv"
        ens = _final_ensemble(config, rep)
        serialize.write_snapshot_csv(spath, ens, rep.final_debt)
        outputs.append(spath.name)
        outputs.append(spath.name + ".json")
        if config.credit is not None:
            vpath = out / f"variance_{tag}.csv"
            _write_variance_csv(vpath, rep.ticks, rep.variance_series(config.n))
            outputs.append(vpath.name)
        checks.update(_invariant_checks(config, rep, tag))

    wall = time.perf_counter() - t0
    serialize.write_manifest(out / "manifest.json", raw, config.seed,
                             outputs, wall, checks)
    _say(args, f"wrote {len(outputs)} files to {out} "
               f"({wall:.2f}s, checks {'pass' if all(checks.values()) else 'FAIL'})")
    return EXIT_OK if all(checks.values()) else EXIT_INVARIANT


def _final_ensemble(config, rep):
    from .ledger import Ensemble, FluxEntry

    ens = Ensemble(rep.final_money, m_min=config.m_min, m_max=config.m_max)
    ens.flux_log.append(FluxEntry(0, -1, config.n * config.per_capita, "genesis"))
    return ens


def _gini_or_nan(rep):
    try:
        return rep.gini_series()
    except UsageError:
        return np.full(rep.ticks.size, np.nan)


def _acceptance_series(rep):
    acc = np.zeros(rep.ticks.size)
    ticks = rep.ticks.astype(np.float64)
    acc[1:] = rep.accepted[1:] / np.maximum(ticks[1:], 1.0)
    return acc


def _invariant_checks(config, rep, tag) -> dict[str, bool]:
    total = config.n * config.per_capita
    checks = {}
    if rep.final_debt is None:
        checks[f"{tag}:conservation"] = int(rep.final_money.sum()) == total
    else:
        checks[f"{tag}:conservation"] = int(rep.final_money.sum()) == total
        checks[f"{tag}:debt_zero_sum"] = int(rep.final_debt.sum()) == 0
        checks[f"{tag}:cash_nonnegative"] = bool((rep.final_money >= 0).all())
    checks[f"{tag}:acceptance_in_range"] = 0.0 <= rep.acceptance_rate <= 1.0
    return checks


def cmd_fit(args) -> int:
    table = ingest_income_table(args.data)
    fit = two_class_decompose(table.incomes, table.weights,
                              tail_policy=args.tail_policy)
    serialize.write_fit_json(args.out, fit)
    _say(args, f"T={fit.temperature:.4g} alpha={fit.alpha:.4g} "
               f"f={fit.f:.4g} G_pred={fit.gini_predicted:.4g} "
               f"G_emp={fit.gini_empirical:.4g} -> {args.out}")
    return EXIT_OK


def _coefficient(spec, name):
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError(f"{name} must be an object with a 'type'")
    if spec["type"] == "constant":
        value = float(spec["value"])
        return lambda m: np.full_like(np.asarray(m, dtype=float), value)
    if spec["type"] == "table":
        return table_function(spec["m"], spec["values"], name)
    raise ConfigError(f"unknown {name} type {spec['type']!r}")


def cmd_fp_solve(args) -> int:
    with open(args.config) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON at line "
                              f"{exc.lineno} column {exc.colno}: {exc.msg}")
    for key in ("grid_min", "grid_max", "cells", "drift", "diffusion"):
        if key not in raw:
            raise ConfigError(f"{args.config}: missing field {key!r}")
    problem = FpProblem(float(raw["grid_min"]), float(raw["grid_max"]),
                        int(raw["cells"]),
                        _coefficient(raw["drift"], "drift"),
                        _coefficient(raw["diffusion"], "diffusion"))
    mode = raw.get("mode", "stationary")
    if mode == "stationary":
        profile = fp_stationary(problem)
    else:
        if not isinstance(mode, dict) or "dt" not in mode or "steps" not in mode:
            raise ConfigError("mode must be 'stationary' or {dt, steps}")
        sol = fp_step(problem, float(mode["dt"]), int(mode["steps"]))
        profile = sol.final()
    serialize.write_fp_profile_csv(args.out, problem.centers, profile)
    _say(args, f"wrote {problem.cells}-cell profile to {args.out}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    kernel = ExchangeKernel(args.kernel, delta0=args.delta0,
                            delta_max=args.delta_max, gamma=args.gamma)
    n_states = state_count(args.agents, args.total, args.m_min)
    space, q = build_master(args.agents, args.total, kernel, m_min=args.m_min)
    pi = stationary(q)
    values, probs = marginal_money(space, pi)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    serialize.write_fp_profile_csv(out / "marginal.csv", values, probs)
    db = detailed_balance_residual(q, pi)
    report = {
        "states": n_states,
        "stationarity_residual": stationarity_residual(q, pi),
        "detailed_balance_residual": db,
        "detailed_balance_holds": bool(db < 1e-12),
        "declared_symmetry": kernel.symmetry_class,
        "agrees_with_declaration": bool(
            (db < 1e-12) == (kernel.symmetry_class == TIME_REVERSIBLE)),
    }
    with open(out / "detailed_balance.json", "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
        fh.write("\n")
    _say(args, f"{n_states} states; detailed balance residual {db:.3g}")
    return EXIT_OK


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"{run_dir} is not a completed run directory "
                          f"(no manifest.json)")
    manifest = serialize.read_manifest(manifest_path)
    lines = [
        "# Run report",
        "",
        f"- config hash: `{manifest['config_hash']}`",
        f"- seed: {manifest['seed']}",
        f"- invariant checks: "
        f"{'all passed' if manifest['passed'] else 'FAILED'}",
        "",
    ]
    for tpath in sorted(run_dir.glob("trajectory_r*.csv")):
        cols = serialize.read_trajectory_csv(tpath)
        ticks = cols["tick"]
        ent = cols["entropy"]
        eq_tick = engine.equilibration_detect(ticks, ent, window=5,
                                              tolerance=5e-3)
        var_line = _variance_growth_line(run_dir, tpath, cols)
        lines += [
            f"## {tpath.stem}",
            "",
            f"- final temperature (mean balance): {cols['temperature'][-1]:.4f}",
            f"- entropy: start {ent[0]:.4f}, final {ent[-1]:.4f}",
            f"- KS distance to the exponential law: {cols['ks_exp'][-1]:.4f}",
            f"- final Gini: {cols['gini'][-1]:.4f}",
            f"- acceptance rate: {cols['acceptance_rate'][-1]:.4f}",
            "- equilibration: " + (
                f"tick {int(eq_tick)}" if eq_tick is not None
                else "not reached (non-stationary over this run)"),
        ]
        if var_line:
            lines.append(var_line)
        lines.append("")
    report = "\n".join(lines)
    out = run_dir / "report.md"
    out.write_text(report)
    _say(args, report)
    return EXIT_OK


def _write_variance_csv(path, ticks, variance):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tick", "variance"])
        for t, v in zip(ticks, variance):
            w.writerow([int(t), repr(float(v))])


def _variance_growth_line(run_dir, tpath, cols):
    """For credit runs, a linear fit of net-worth variance growth."""
    vpath = run_dir / tpath.name.replace("trajectory", "variance")
    if not vpath.exists():
        return None
    data = serialize.read_trajectory_csv(vpath)  # same two-column reader
    ticks, var = data["tick"], data["variance"]
    if ticks.size < 4:
        return None
    slope, intercept = np.polyfit(ticks, var, 1)
    pred = slope * ticks + intercept
    ss_res = ((var - pred) ** 2).sum()
    ss_tot = ((var - var.mean()) ** 2).sum()
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return (f"- net-worth variance growth: {slope:.4g} per event, "
            f"linear fit R^2 = {r2:.4f}")


if __name__ == "__main__":
    sys.exit(main())
