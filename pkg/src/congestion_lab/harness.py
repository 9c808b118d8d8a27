"""Monte Carlo replication, scenario gallery and the non-stationary study."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import estimate as est
from .errors import CongestionLabError, ConfigError
from .gradient import asymptotic_variance, variance_gap_identity
from .model import RateModel, scenario_preset, steady_state
from .rng import derive
from .sim import (
    Grid, PiecewiseConstant, build_ed_trace, design_from_dict, ed_base_model, read_trace_csv, simulate,
    trace_policy_gradient, validate_design,
)

THREADS_ENV = "CONGESTION_LAB_THREADS"


def default_workers() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        return max(1, n)
    return os.cpu_count() or 1


def zeta_rule(T: float, c: float = 0.5, gamma: float = 0.3) -> float:
    """``zeta_T = c * T^-gamma``; ``gamma`` in (0.25, 0.5) keeps ``sqrt(T) zeta -> inf`` and ``sqrt(T) zeta^2 -> 0``."""
    if not 0.25 < gamma < 0.5:
        raise ConfigError(f"gamma must lie in (0.25, 0.5), got {gamma}")
    return c * T ** (-gamma)


def fmt(x: Any) -> str:
    """Deterministic CSV cell text; floats use the shortest round-trip repr."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_rows(path: str | Path | None, header: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(r.get(h)) for h in header])
    text = buf.getvalue()
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


# ---------------------------------------------------------------------------
# configuration


def build_environment(block: Mapping[str, Any]) -> RateModel | PiecewiseConstant | Grid:
    """Environment from a config block.

    Either ``{"scenario": name, "params": {...}}`` or a ``trace`` block:
    ``{"trace": {"kind": "piecewise", "breakpoints": [...], "regimes": [{"scenario": ..., "params": ...}]}}``,
    ``{"trace": {"kind": "ed", "weeks": 4, "grid_csv": optional}}`` or
    ``{"trace": {"kind": "grid_csv", "path": ..., "slot_length": 0.5}}``.
    """
    trace = block.get("trace")
    if trace is None:
        if "scenario" not in block:
            raise ConfigError("config needs a 'scenario' or a 'trace' block")
        return scenario_preset(block["scenario"], block.get("params") or {})
    kind = trace.get("kind")
    if kind == "piecewise":
        models = [scenario_preset(r["scenario"], r.get("params") or {}) for r in trace["regimes"]]
        return PiecewiseConstant(tuple(trace["breakpoints"]), tuple(models))
    if kind == "ed":
        return build_ed_trace(int(trace.get("weeks", 4)), trace.get("grid_csv"), int(trace.get("K", 30)))
    if kind == "grid_csv":
        grid = read_trace_csv(trace["path"])
        return Grid(ed_base_model(int(trace.get("K", 30))), grid.ravel(), float(trace.get("slot_length", 0.5)))
    raise ConfigError(f"unknown trace kind {kind!r}")


@dataclass
class ExperimentConfig:
    scenario: str | None = "mm1"
    params: dict = field(default_factory=dict)
    trace: dict | None = None
    design: dict = field(default_factory=lambda: {"kind": "regenerative", "p": 1.0})
    horizon_T: float = 20000.0
    zeta: float | None = None
    zeta_c: float = 0.5
    zeta_gamma: float = 0.3
    replications: int = 100
    master_seed: int = 0
    kernel_lengths: list = field(default_factory=list)
    truncation_C: float | None = None
    alpha: float = 0.05
    initial_state: int = 0
    burn_in: float = 0.0
    output: str | None = None

    def __post_init__(self):
        if int(self.replications) != self.replications or self.replications < 1:
            raise ConfigError("replications must be a positive integer")
        if not self.horizon_T > 0:
            raise ConfigError("horizon_T must be positive")
        if self.zeta is None:
            zeta_rule(self.horizon_T, self.zeta_c, self.zeta_gamma)
        elif not self.zeta > 0:
            raise ConfigError("zeta must be positive")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if any(not s > 0 for s in self.kernel_lengths):
            raise ConfigError("kernel lengths must be positive")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @property
    def effective_zeta(self) -> float:
        return self.zeta if self.zeta is not None else zeta_rule(self.horizon_T, self.zeta_c, self.zeta_gamma)

    def environment(self):
        block = {"trace": self.trace} if self.trace else {"scenario": self.scenario, "params": self.params}
        return build_environment(block)

    def build_design(self):
        d = dict(self.design)
        if d.get("kind") != "fixed":
            d.setdefault("zeta", self.effective_zeta)
        if d.get("kind") == "interval" and "num_intervals" in d:
            n = int(d.pop("num_intervals"))
            if n < 1:
                raise ConfigError("num_intervals must be positive")
            d["interval_length"] = self.horizon_T / n
        return design_from_dict(d)


# ---------------------------------------------------------------------------
# Monte Carlo

REPLICATE_HEADER = ("replicate", "estimator", "estimate", "sigma2_hat", "ci_low", "ci_high", "covered", "error")
AGGREGATE_HEADER = ("estimator", "n_ok", "n_failed", "truth", "mean", "bias", "variance", "mc_se", "mse",
                    "scaled_mse", "scaled_variance", "coverage")


@dataclass
class McResult:
    config: ExperimentConfig
    truth: float
    zeta: float
    rows: list[dict]
    aggregates: list[dict]
    metadata: dict

    def aggregate(self, name: str) -> dict:
        for a in self.aggregates:
            if a["estimator"] == name:
                return a
        raise KeyError(name)

    def replicate_csv(self) -> str:
        return write_rows(None, REPLICATE_HEADER, self.rows)

    def aggregate_csv(self) -> str:
        return write_rows(None, AGGREGATE_HEADER, self.aggregates)

    def write(self, path: str | Path) -> list[Path]:
        """Replicate rows to ``path``; aggregates and metadata alongside."""
        path = Path(path)
        agg = path.with_name(path.stem + "_summary.csv")
        meta = path.with_name(path.stem + "_meta.json")
        write_rows(path, REPLICATE_HEADER, self.rows)
        write_rows(agg, AGGREGATE_HEADER, self.aggregates)
        meta.write_text(json.dumps(self.metadata, indent=2, sort_keys=True) + "\n")
        return [path, agg, meta]


def _window_label(kind: str, s: float, truncated: bool) -> str:
    return f"{kind}_s={s:g}" + ("_trunc" if truncated else "")


def _replicate(cfg: ExperimentConfig, env, design, truth: float, r: int) -> list[dict]:
    """All estimator rows for replicate ``r``; failures become rows with an ``error`` entry."""
    log = simulate(env, design, cfg.horizon_T, derive(cfg.master_seed, r), cfg.initial_state, cfg.burn_in)
    summary = est.summarize(log)
    if summary.is_user_level:
        plain, wkind = ["ur"], "ur"
    else:
        plain, wkind = ["model_free", "idle_time", "wde"], "wde"
    jobs = [(name, lambda name=name: est.estimate_with_ci(summary, name, cfg.alpha)) for name in plain]
    truncated = cfg.truncation_C is not None
    for s in cfg.kernel_lengths:
        jobs.append((_window_label(wkind, s, truncated),
                     lambda s=s: est.windowed_estimate(log, float(s), wkind, cfg.truncation_C)))
    rows = []
    for name, job in jobs:
        row = {"replicate": r, "estimator": name}
        try:
            e = job()
        except CongestionLabError as exc:
            row["error"] = type(exc).__name__
            rows.append(row)
            continue
        row.update(estimate=e.value, sigma2_hat=e.sigma2_hat, ci_low=e.ci_low, ci_high=e.ci_high)
        if e.ci_low is not None:
            row["covered"] = e.ci_low <= truth <= e.ci_high
        rows.append(row)
    return rows


def aggregate(rows: Sequence[Mapping[str, Any]], truth: float, T: float, zeta: float) -> list[dict]:
    """Per-estimator bias, variance, MSE (also scaled by ``T zeta^2``) and CI coverage."""
    order: list[str] = []
    groups: dict[str, list] = {}
    for r in rows:
        name = r["estimator"]
        if name not in groups:
            order.append(name)
            groups[name] = []
        groups[name].append(r)
    out = []
    scale = T * zeta ** 2
    for name in order:
        g = groups[name]
        vals = np.array([r["estimate"] for r in g if r.get("estimate") is not None], dtype=float)
        cov = [bool(r["covered"]) for r in g if r.get("covered") is not None]
        n = len(vals)
        a = {"estimator": name, "n_ok": n, "n_failed": len(g) - n, "truth": truth}
        if n:
            mean = math.fsum(vals) / n
            var = math.fsum((vals - mean) ** 2) / (n - 1) if n > 1 else 0.0
            mse = math.fsum((vals - truth) ** 2) / n
            a.update(mean=mean, bias=mean - truth, variance=var, mc_se=math.sqrt(var / n), mse=mse,
                     scaled_mse=scale * mse, scaled_variance=scale * var)
        if cov:
            a["coverage"] = sum(cov) / len(cov)
        out.append(a)
    return out


def _warm_up() -> None:
    # compile the event loop once before threads race for it
    simulate(scenario_preset("mm1", {"K": 2}), design_from_dict({"kind": "fixed", "p": 1.0}), 1.0, 0)


def run_mc(config: ExperimentConfig | Mapping[str, Any], workers: int | None = None,
           output: str | Path | None = None) -> McResult:
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    env = cfg.environment()
    design = cfg.build_design()
    base = env if isinstance(env, RateModel) else env.base
    validate_design(design, base)
    zeta = getattr(design, "zeta", 0.0)
    truth = trace_policy_gradient(env, design.p, cfg.horizon_T)
    workers = default_workers() if workers is None else max(1, int(workers))
    _warm_up()
    reps = range(int(cfg.replications))
    if workers == 1:
        chunks = [_replicate(cfg, env, design, truth, r) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda r: _replicate(cfg, env, design, truth, r), reps))
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: r["replicate"])  # stable: estimator order kept within a replicate
    # fixed-price runs have no perturbation; scale by T alone
    aggregates = aggregate(rows, truth, cfg.horizon_T, zeta if zeta > 0 else 1.0)
    metadata = {
        "config": cfg.to_dict(),
        "zeta": zeta,
        "truth": truth,
        "truth_method": "analytic V'(p); time-weighted over regimes/slots for traces",
        "seeding": "Philox stream SeedSequence(master_seed, spawn_key=(replicate,))",
        "ci": "value +- z * sqrt(sigma2_hat) / sqrt(T zeta^2)",
    }
    result = McResult(cfg, truth, zeta, rows, aggregates, metadata)
    out = output or cfg.output
    if out:
        result.write(out)
    return result


# ---------------------------------------------------------------------------
# scenario gallery

GALLERY_PANELS = {
    # scenario: (varied parameter, value for the pi bars, grid for the variance curves, extra curve params)
    "mm1": ("lam", 0.5, tuple(np.round(np.arange(0.05, 0.951, 0.05), 10)), {"K": 400}),
    "zero_modified": ("lam0", 1.0, tuple(np.round(np.arange(0.1, 2.001, 0.1), 10)), {}),
    "power_law": ("alpha", 0.4, tuple(np.round(np.arange(0.0, 1.001, 0.05), 10)), {}),
    "conformity": ("lam", 2.0, tuple(np.round(np.arange(0.5, 3.001, 0.1), 10)), {}),
}
# The mm1 curves use a deep truncation so the untruncated M/M/1 overlap of the
# model-free and weighted-direct variances is visible up to lam = 0.95.
GALLERY_HEADER = ("scenario", "parameter", "k_or_estimator", "value")


def run_scenario_gallery(out_dir: str | Path | None = None, p: float = 1.0) -> list[dict]:
    """Stationary laws at the panel parameter and variance curves over the parameter grid."""
    rows = []
    for name, (param, fixed, grid, curve_params) in GALLERY_PANELS.items():
        pi = steady_state(scenario_preset(name, {param: fixed}), p).pi
        rows += [{"scenario": name, "parameter": fixed, "k_or_estimator": k, "value": float(v)}
                 for k, v in enumerate(pi)]
        for x in grid:
            m = scenario_preset(name, {**curve_params, param: float(x)})
            v = asymptotic_variance(m, p)
            for label, val in (("model_free", v.sigma2_model_free), ("idle_time", v.sigma2_idle),
                               ("wde", v.sigma2_wde)):
                rows.append({"scenario": name, "parameter": float(x), "k_or_estimator": label, "value": val})
            rows.append({"scenario": name, "parameter": float(x), "k_or_estimator": "gap_identity",
                         "value": variance_gap_identity(steady_state(m, p).pi, m.mu)})
    if out_dir is not None:
        write_rows(Path(out_dir) / "scenario_gallery.csv", GALLERY_HEADER, rows)
    return rows


# ---------------------------------------------------------------------------
# non-stationary study

HOURS_PER_WEEK = 168.0


@dataclass
class NonstationaryConfig:
    weeks: int = 4
    p: float = 1.0
    zeta: float = 0.1
    interval_lengths: list = field(default_factory=lambda: [0.5, 2.0, 6.0, 12.0, 24.0, 72.0])
    kernel_lengths: list = field(default_factory=lambda: [0.5, 2.0, 8.0, 24.0, 168.0])
    assignment: str = "iid_coin"
    replications: int = 200
    master_seed: int = 0
    grid_csv: str | None = None
    truncation_C: float | None = None
    output: str | None = None

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "NonstationaryConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


NONSTATIONARY_HEADER = ("design", "estimator", "length", "n_ok", "truth", "bias", "sd", "rmse")


def _rmse_row(design: str, name: str, length: float, vals: list[float], truth: float) -> dict:
    v = np.array(vals, dtype=float)
    row = {"design": design, "estimator": name, "length": length, "n_ok": len(v), "truth": truth}
    if len(v):
        row.update(bias=float(v.mean() - truth), sd=float(v.std(ddof=1)) if len(v) > 1 else 0.0,
                   rmse=math.sqrt(math.fsum((v - truth) ** 2) / len(v)))
    return row


def run_nonstationary_study(config: NonstationaryConfig | Mapping[str, Any] | None = None,
                            workers: int | None = None) -> list[dict]:
    """RMSE against interval length (switchback; model-free and idle-time) and kernel length (user-level)."""
    cfg = config if isinstance(config, NonstationaryConfig) else NonstationaryConfig.from_dict(config or {})
    trace = build_ed_trace(cfg.weeks, cfg.grid_csv)
    T = cfg.weeks * HOURS_PER_WEEK
    truth = trace_policy_gradient(trace, cfg.p, T)
    workers = default_workers() if workers is None else max(1, int(workers))
    _warm_up()

    def run_many(fn):
        if workers == 1:
            return [fn(r) for r in range(cfg.replications)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, range(cfg.replications)))

    rows = []
    for j, length in enumerate(cfg.interval_lengths):
        design = design_from_dict({"kind": "interval", "p": cfg.p, "zeta": cfg.zeta,
                                   "interval_length": float(length), "assignment": cfg.assignment})

        def one(r, design=design, j=j):
            s = est.summarize(simulate(trace, design, T, derive(cfg.master_seed, 1, j, r)))
            out = {}
            for name in ("model_free", "idle_time"):
                try:
                    out[name] = est.ESTIMATORS[name](s).value
                except CongestionLabError:
                    pass
            return out

        res = run_many(one)
        for name in ("model_free", "idle_time"):
            rows.append(_rmse_row("interval", name, float(length), [x[name] for x in res if name in x], truth))

    user = design_from_dict({"kind": "user", "p": cfg.p, "zeta": cfg.zeta})
    logs = run_many(lambda r: simulate(trace, user, T, derive(cfg.master_seed, 2, r)))
    for s in cfg.kernel_lengths:
        vals = []
        for log in logs:
            try:
                vals.append(est.windowed_estimate(log, float(s), "ur", cfg.truncation_C).value)
            except CongestionLabError:
                pass
        rows.append(_rmse_row("user", "ur", float(s), vals, truth))
    if cfg.output:
        write_rows(cfg.output, NONSTATIONARY_HEADER, rows)
    return rows


def nonstationary_checks(rows: Sequence[Mapping[str, Any]], slack: float = 1.1) -> dict:
    """Kernel-length U-shape and best kernel vs best interval (model-free), from study rows."""
    kern = sorted((r["length"], r["rmse"]) for r in rows if r["design"] == "user")
    mf = [r["rmse"] for r in rows if r["design"] == "interval" and r["estimator"] == "model_free"]
    rmse = [v for _, v in kern]
    i_min = int(np.argmin(rmse))
    best_kernel, best_interval = rmse[i_min], min(mf)
    return {
        "best_kernel_length": kern[i_min][0],
        "best_kernel_rmse": best_kernel,
        "best_interval_rmse": best_interval,
        "u_shape": 0 < i_min < len(rmse) - 1,
        "kernel_beats_interval": best_kernel <= slack * best_interval,
    }
