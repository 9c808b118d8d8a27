"""Command-line entry point: ``congestion-lab <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import estimate as est
from .errors import ConfigError, DataError
from .gradient import asymptotic_variance, policy_gradient
from .harness import (
    ExperimentConfig, NonstationaryConfig, build_environment, run_mc, run_nonstationary_study,
    run_scenario_gallery, write_rows,
)
from .model import scenario_preset, steady_state
from .sim import EventLog, build_ed_trace, design_from_dict, simulate, write_trace_csv

ESTIMATE_HEADER = ("estimator", "value", "sigma2_hat", "ci_low", "ci_high", "skipped_states")


def _parse_params(items: list[str] | None) -> dict:
    params = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    return params


def _load_json(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def cmd_analytic(args) -> None:
    params = _parse_params(args.param)
    if args.family:
        params["family"] = args.family
    model = scenario_preset(args.scenario, params)
    if args.numeric:
        model = model.without_derivatives()
    ss = steady_state(model, args.p)
    g = policy_gradient(model, args.p)
    v = asymptotic_variance(model, args.p)
    out = {
        "scenario": args.scenario,
        "p": args.p,
        "mu": model.mu,
        "K": model.K,
        "throughput": ss.throughput,
        "gradient": {"model_free": g.value_model_free, "idle_time": g.value_idle_time,
                     "weighted_direct": g.value_weighted_direct},
        "sigma2": v.as_dict(),
        "pi": ss.pi.tolist(),
    }
    print(json.dumps(out, indent=2))


def cmd_simulate(args) -> None:
    """Config keys: scenario/params or trace, design, horizon_T, seed, initial_state, burn_in, output."""
    cfg = _load_json(args.config)
    try:
        env = build_environment(cfg)
        design = design_from_dict(cfg["design"])
        horizon = float(cfg["horizon_T"])
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc}") from exc
    log = simulate(env, design, horizon, cfg.get("seed", 0), int(cfg.get("initial_state", 0)),
                   float(cfg.get("burn_in", 0.0)))
    out = args.out or cfg.get("output") or "events.csv"
    log.write(out)
    print(out)


def estimate_rows(log: EventLog, alpha: float = 0.05, kernel_lengths=(), truncation_C=None) -> list[dict]:
    summary = est.summarize(log)
    rows = []
    for name in est.applicable_estimators(summary):
        e = est.estimate_with_ci(summary, name, alpha)
        rows.append(_estimate_row(e))
    wkind = "ur" if summary.is_user_level else "wde"
    for s in kernel_lengths:
        rows.append(_estimate_row(est.windowed_estimate(log, s, wkind, truncation_C)))
    return rows


def _estimate_row(e: est.Estimate) -> dict:
    return {"estimator": e.name, "value": e.value, "sigma2_hat": e.sigma2_hat, "ci_low": e.ci_low,
            "ci_high": e.ci_high, "skipped_states": " ".join(str(k) for k in e.skipped_states)}


def cmd_estimate(args) -> None:
    log = EventLog.read(args.log)
    rows = estimate_rows(log, args.alpha, args.kernel or (), args.truncation)
    text = write_rows(args.out, ESTIMATE_HEADER, rows)
    if args.out is None:
        sys.stdout.write(text)


def cmd_mc(args) -> None:
    cfg = ExperimentConfig.load(args.config)
    out = args.out or cfg.output
    if out is None:
        raise ConfigError("mc needs an output path (config 'output' or --out)")
    result = run_mc(cfg, workers=args.workers, output=out)
    sys.stdout.write(result.aggregate_csv())


def cmd_trace(args) -> None:
    if args.build != "ed":
        raise ConfigError(f"unknown trace builder {args.build!r}")
    trace = build_ed_trace(args.weeks, args.grid)
    grid = np.asarray(trace.multipliers).reshape(-1, 48)
    write_trace_csv(grid, args.out)
    print(args.out)


def cmd_gallery(args) -> None:
    run_scenario_gallery(args.out_dir)
    print(Path(args.out_dir) / "scenario_gallery.csv")


def cmd_nonstationary(args) -> None:
    cfg = NonstationaryConfig.from_dict(_load_json(args.config) if args.config else {})
    if args.out:
        cfg.output = args.out
    rows = run_nonstationary_study(cfg, workers=args.workers)
    if cfg.output is None:
        sys.stdout.write(write_rows(None, list(rows[0]), rows))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="congestion-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="exact steady state, gradient and variances for a preset")
    p.add_argument("--scenario", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--family", choices=("linear", "quadratic", "constant"))
    p.add_argument("--numeric", action="store_true", help="use finite-difference rate derivatives")
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("simulate", help="simulate one experiment and write its event log")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimators with intervals from an event log")
    p.add_argument("--log", required=True)
    p.add_argument("--out")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--kernel", type=float, action="append", help="add a windowed estimate (repeatable)")
    p.add_argument("--truncation", type=float, help="clamp constant for windowed estimates")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("mc", help="Monte Carlo replication")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("trace", help="write a non-stationary arrival trace")
    p.add_argument("--build", required=True)
    p.add_argument("--weeks", type=int, default=4)
    p.add_argument("--grid", help="day,slot,multiplier CSV replacing the synthetic template")
    p.add_argument("--out", default="trace.csv")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("gallery", help="analytic data for the scenario panels")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_gallery)

    p = sub.add_parser("nonstationary", help="RMSE vs interval and kernel length on the ED trace")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_nonstationary)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (OSError, TypeError) as exc:
        # unreadable inputs and malformed config values
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
