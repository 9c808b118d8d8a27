"""Gradient estimators computed from event logs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from statistics import NormalDist

import numpy as np

from .errors import CorruptLog, EmptyArm, EmptyCell, InvalidAlpha, InvalidDesign, KernelTooLong, WrongDesign
from .gradient import variances_from_pi
from .sim import ARRIVAL, BASE, LABEL_CODES, MINUS, PLUS, SWITCH, EventLog


@dataclass(frozen=True, eq=False)
class Summary:
    """Occupancy times and arrival counts of one log (or one window of it).

    ``arm_time[a, k]`` is the time spent in state ``k`` with arm ``a``
    (0 for ``p + zeta``, 1 for ``p - zeta``; fixed-price logs book everything
    on arm 0).  It is ``None`` for user-level logs, where the price is drawn per
    customer and time has no arm.  ``arrivals[a, k]`` counts arrivals from
    pre-arrival state ``k`` with arm ``a``.
    """

    horizon_T: float
    mu: float
    zeta: float
    design_kind: str
    T_k: np.ndarray
    arrivals: np.ndarray
    arm_time: np.ndarray | None

    @property
    def K_obs(self) -> int:
        return len(self.T_k) - 1

    @property
    def is_user_level(self) -> bool:
        return self.arm_time is None

    @property
    def T_plus(self) -> float | None:
        return None if self.arm_time is None else float(self.arm_time[PLUS].sum())

    @property
    def T_minus(self) -> float | None:
        return None if self.arm_time is None else float(self.arm_time[MINUS].sum())

    @property
    def T_k_plus(self) -> np.ndarray | None:
        return None if self.arm_time is None else self.arm_time[PLUS]

    @property
    def T_k_minus(self) -> np.ndarray | None:
        return None if self.arm_time is None else self.arm_time[MINUS]

    @property
    def N_k_plus(self) -> np.ndarray:
        return self.arrivals[PLUS]

    @property
    def N_k_minus(self) -> np.ndarray:
        return self.arrivals[MINUS]

    @property
    def N_plus(self) -> int:
        return int(self.arrivals[PLUS].sum())

    @property
    def N_minus(self) -> int:
        return int(self.arrivals[MINUS].sum())


@dataclass(frozen=True, eq=False)
class WindowedSummary:
    kernel_length: float
    horizon_T: float
    windows: list[Summary]

    @property
    def coverage(self) -> float:
        return len(self.windows) * self.kernel_length / self.horizon_T if self.horizon_T > 0 else 0.0


@dataclass(frozen=True)
class Estimate:
    name: str
    value: float
    scale: float
    sigma2_hat: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    skipped_states: tuple[int, ...] = ()
    windows: int = 1
    coverage: float = 1.0
    extra: dict = field(default_factory=dict, compare=False)


# ---------------------------------------------------------------------------
# summaries


def _log_arrays(log: EventLog):
    """Piecewise-constant (state, arm) path: boundaries ``b``, state and arm on ``[b_j, b_{j+1})``."""
    states_after = log.states_after()
    states = np.concatenate(([log.initial_state], states_after))
    if np.any(states < 0):
        raise CorruptLog("trajectory goes below zero")
    if log.initial_label is None:
        arm_after = np.zeros(len(log.t) + 1, dtype=np.int64)
    else:
        init = LABEL_CODES[log.initial_label]
        init = PLUS if init == BASE else init
        arm_after = np.full(len(log.t) + 1, init, dtype=np.int64)
        sw = np.flatnonzero(log.kind == SWITCH)
        if sw.size:
            seg = np.searchsorted(sw, np.arange(len(log.t)), side="right") - 1
            has = seg >= 0
            arm_after[1:][has] = log.label[sw[seg[has]]]
    bounds = np.concatenate(([0.0], log.t, [log.horizon]))
    return bounds, states, arm_after


def _accumulate(log: EventLog, edges: np.ndarray, K_obs: int | None = None):
    """Occupancy ``(W, 2, K+1)``, per-state ``(W, K+1)`` and arrivals ``(W, 2, K+1)`` per window."""
    bounds, states, arms = _log_arrays(log)
    K = int(states.max()) if K_obs is None else K_obs
    n = K + 1
    W = len(edges) - 1
    pts = np.sort(np.concatenate((bounds, edges)), kind="mergesort")
    lengths = np.diff(pts)
    left = pts[:-1]
    seg = np.searchsorted(bounds, left, side="right") - 1
    seg = np.minimum(seg, len(states) - 1)
    win = np.searchsorted(edges, left, side="right") - 1
    keep = (lengths > 0) & (win >= 0) & (win < W)
    idx = (win[keep] * 2 + arms[seg[keep]]) * n + states[seg[keep]]
    occ = np.bincount(idx, weights=lengths[keep], minlength=W * 2 * n).reshape(W, 2, n)

    a = log.kind == ARRIVAL
    at, ak, al = log.t[a], log.pre_state[a], log.label[a].astype(np.int64)
    al = np.where(al == BASE, PLUS, al)
    aw = np.searchsorted(edges, at, side="right") - 1
    keep = (aw >= 0) & (aw < W)
    idx = (aw[keep] * 2 + al[keep]) * n + ak[keep]
    arr = np.bincount(idx, minlength=W * 2 * n).reshape(W, 2, n)
    return occ, arr


def _design_info(log: EventLog) -> tuple[str, float]:
    kind = log.design.get("kind", "unknown") if log.design else "unknown"
    if log.initial_label is None:
        kind = "user"
    return kind, float(log.design.get("zeta", 0.0)) if log.design else 0.0


def summarize(log: EventLog, zeta: float | None = None) -> Summary:
    """Exact occupancy and arrival accounting along the reconstructed path."""
    log.validate()
    kind, z = _design_info(log)
    occ, arr = _accumulate(log, np.array([0.0, log.horizon]))
    occ, arr = occ[0], arr[0]
    return Summary(
        horizon_T=log.horizon, mu=log.mu, zeta=z if zeta is None else zeta, design_kind=kind,
        T_k=occ.sum(axis=0), arrivals=arr, arm_time=None if kind == "user" else occ,
    )


def _num_windows(T: float, s: float) -> int:
    return math.floor(T / s * (1 + 1e-12))


def summarize_windows(log: EventLog, kernel_length: float, zeta: float | None = None) -> WindowedSummary:
    """Per-window summaries over consecutive windows of length ``kernel_length``; the tail is dropped."""
    if not kernel_length > 0:
        raise KernelTooLong("kernel length must be positive")
    log.validate()
    W = _num_windows(log.horizon, kernel_length)
    if W < 1:
        raise KernelTooLong(f"kernel length {kernel_length} exceeds horizon {log.horizon}")
    kind, z = _design_info(log)
    z = z if zeta is None else zeta
    edges = kernel_length * np.arange(W + 1, dtype=float)
    if abs(edges[-1] - log.horizon) <= 1e-12 * log.horizon:
        edges[-1] = log.horizon
    K_obs = int(max(log.initial_state, log.states_after().max(initial=0)))
    occ, arr = _accumulate(log, edges, K_obs)
    wins = [
        Summary(horizon_T=float(edges[w + 1] - edges[w]), mu=log.mu, zeta=z, design_kind=kind,
                T_k=occ[w].sum(axis=0), arrivals=arr[w], arm_time=None if kind == "user" else occ[w])
        for w in range(W)
    ]
    return WindowedSummary(kernel_length, log.horizon, wins)


# ---------------------------------------------------------------------------
# point estimators


def _scale(s: Summary) -> float:
    return math.sqrt(s.horizon_T * s.zeta ** 2)


def _arm_times(s: Summary) -> tuple[float, float]:
    if s.arm_time is None:
        raise WrongDesign("estimator needs arm occupancy times; this is a user-level log")
    tp, tm = s.T_plus, s.T_minus
    if not (tp > 0 and tm > 0):
        raise EmptyArm(f"arm occupancy T+={tp}, T-={tm}")
    return tp, tm


def tau_model_free(s: Summary) -> Estimate:
    tp, tm = _arm_times(s)
    value = (s.N_plus / tp - s.N_minus / tm) / (2 * s.zeta)
    return Estimate("model_free", float(value), _scale(s))


def tau_idle_time(s: Summary) -> Estimate:
    tp, tm = _arm_times(s)
    value = -(s.mu / (2 * s.zeta)) * (s.arm_time[PLUS, 0] / tp - s.arm_time[MINUS, 0] / tm)
    return Estimate("idle_time", float(value), _scale(s))


def delta_k(s: Summary, k: int) -> float:
    """Finite-difference estimate of ``lambda_k'/lambda_k`` from a switchback log."""
    if s.arm_time is None:
        raise WrongDesign("delta_k needs arm occupancy times; use delta_ur_k for user-level logs")
    if k > s.K_obs:
        raise EmptyCell(f"state {k} never visited")
    tp, tm = s.arm_time[PLUS, k], s.arm_time[MINUS, k]
    if not (tp > 0 and tm > 0):
        raise EmptyCell(f"state {k}: T+={tp}, T-={tm}")
    rp, rm = s.arrivals[PLUS, k] / tp, s.arrivals[MINUS, k] / tm
    if not rp + rm > 0:
        raise EmptyCell(f"state {k}: no arrivals in either arm")
    return float((rp - rm) / (rp + rm) / s.zeta)


def delta_ur_k(s: Summary, k: int) -> float:
    """Share-of-labels estimate of ``lambda_k'/lambda_k`` from a user-level log."""
    if k > s.K_obs:
        raise EmptyCell(f"state {k} never visited")
    n_p, n_m = s.arrivals[PLUS, k], s.arrivals[MINUS, k]
    if n_p + n_m == 0:
        raise EmptyCell(f"state {k}: no arrivals")
    return float((n_p - n_m) / (s.zeta * (n_p + n_m)))


def _weighted_direct(s: Summary, delta) -> tuple[float, tuple[int, ...]]:
    """``(T_0/T) * sum_k delta_k * sum_{i>k} T_i/T`` and the skipped states (no factor ``mu``)."""
    T = s.horizon_T
    frac = s.T_k / T
    tail = np.cumsum(frac[::-1])[::-1]
    terms, skipped = [], []
    for k in range(s.K_obs):
        try:
            terms.append(delta(s, k) * tail[k + 1])
        except EmptyCell:
            skipped.append(k)
    return frac[0] * math.fsum(terms), tuple(skipped)


def tau_wde(s: Summary) -> Estimate:
    if s.arm_time is None:
        raise WrongDesign("tau_wde needs a switchback or fixed-price log; use tau_ur")
    _arm_times(s)
    if not s.T_k[0] > 0:
        raise EmptyCell("queue never empty")
    inner, skipped = _weighted_direct(s, delta_k)
    return Estimate("wde", float(s.mu * inner), _scale(s), skipped_states=skipped)


def tau_ur(s: Summary) -> Estimate:
    if s.arm_time is not None:
        raise WrongDesign("tau_ur needs a user-level log")
    if not s.T_k[0] > 0:
        raise EmptyCell("queue never empty")
    inner, skipped = _weighted_direct(s, delta_ur_k)
    return Estimate("ur", float(s.mu * inner), _scale(s), skipped_states=skipped)


def windowed_estimate(log: EventLog, kernel_length: float, kind: str = "ur",
                      truncation_C: float | None = None, zeta: float | None = None) -> Estimate:
    """Locally stationary weighted-direct-effect estimate over windows of length ``kernel_length``.

    Each window contributes ``(T_0w/s) * sum_k delta_kw * sum_{i>k} T_iw/s``,
    clamped to ``[-C, C]`` when ``truncation_C`` is given; the estimate is
    ``mu * s/T`` times the sum over complete windows.
    """
    if kind not in ("wde", "ur"):
        raise ValueError(f"kind must be 'wde' or 'ur', got {kind!r}")
    ws = summarize_windows(log, kernel_length, zeta)
    if kind == "ur" and not ws.windows[0].is_user_level:
        raise WrongDesign("ur kind needs a user-level log")
    if kind == "wde" and ws.windows[0].is_user_level:
        raise WrongDesign("wde kind needs a switchback or fixed-price log")
    if kind == "wde":
        arm_total = sum(w.arm_time.sum(axis=1) for w in ws.windows)
        if not (arm_total > 0).all():
            raise EmptyArm(f"arm occupancy T+={arm_total[0]}, T-={arm_total[1]}")
    delta = delta_ur_k if kind == "ur" else delta_k
    inners, skipped = [], set()
    clamped = 0
    for w in ws.windows:
        if not w.T_k[0] > 0:
            continue
        inner, sk = _weighted_direct(w, delta)
        skipped.update(sk)
        if truncation_C is not None and abs(inner) > truncation_C:
            inner = math.copysign(truncation_C, inner)
            clamped += 1
        inners.append(inner)
    s0 = ws.windows[0]
    value = log.mu * min(1.0, kernel_length / log.horizon) * math.fsum(inners)
    name = f"{kind}_s={kernel_length:g}" + ("" if truncation_C is None else "_trunc")
    return Estimate(name, float(value), math.sqrt(log.horizon * s0.zeta ** 2), skipped_states=tuple(sorted(skipped)),
                    windows=len(ws.windows), coverage=ws.coverage, extra={"clamped_windows": clamped})


def truncated_ur(log: EventLog, kernel_length: float, C: float | None = None, zeta: float | None = None) -> Estimate:
    """Clamped windowed user-level estimate; ``C`` defaults to ``10 * mu``."""
    return windowed_estimate(log, kernel_length, "ur", 10.0 * log.mu if C is None else C, zeta)


# ---------------------------------------------------------------------------
# variances and intervals


def variance_estimates(s: Summary) -> tuple[float, float, float]:
    """Plug-in ``(sigma2_model_free, sigma2_idle, sigma2_wde)`` with ``pi_k = T_k / T``."""
    empty = np.flatnonzero(~(s.T_k > 0))
    if empty.size:
        raise EmptyCell(f"states {empty.tolist()} have zero occupancy")
    return variances_from_pi(s.T_k / s.T_k.sum(), s.mu)


def confidence_interval(e: Estimate, sigma2_hat: float, T: float, zeta: float, alpha: float = 0.05) -> Estimate:
    """``value +- z_{alpha/2} * sqrt(sigma2_hat) / sqrt(T zeta^2)``."""
    if not 0 < alpha < 1:
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")
    if not zeta > 0:
        raise InvalidDesign(f"confidence interval needs a positive perturbation zeta, got {zeta}")
    if not sigma2_hat >= 0:
        raise ValueError(f"sigma2_hat must be non-negative, got {sigma2_hat}")
    z = NormalDist().inv_cdf(1 - alpha / 2)
    half = z * math.sqrt(sigma2_hat) / math.sqrt(T * zeta ** 2)
    return replace(e, sigma2_hat=float(sigma2_hat), ci_low=e.value - half, ci_high=e.value + half)


ESTIMATORS = {"model_free": tau_model_free, "idle_time": tau_idle_time, "wde": tau_wde, "ur": tau_ur}
_SIGMA_INDEX = {"model_free": 0, "idle_time": 1, "wde": 2, "ur": 2}


def estimate_with_ci(s: Summary, name: str, alpha: float = 0.05) -> Estimate:
    """Point estimate plus plug-in variance and normal interval."""
    e = ESTIMATORS[name](s)
    sigma2 = variance_estimates(s)[_SIGMA_INDEX[name]]
    return confidence_interval(e, sigma2, s.horizon_T, s.zeta, alpha)


def applicable_estimators(s: Summary) -> tuple[str, ...]:
    return ("ur",) if s.is_user_level else ("model_free", "idle_time", "wde")
