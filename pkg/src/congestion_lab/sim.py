"""Event-driven simulation of the queue under the experiment designs.

The chain is sampled exactly with competing exponential clocks.  Deterministic
schedule points (interval boundaries, trace breakpoints, grid slots) cut the
current clock, which is redrawn afterwards; memorylessness makes this exact.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from numba import njit

from .errors import BadTraceCSV, CorruptLog, InvalidDesign, InvalidTrace
from .model import RateModel
from .rng import Seed, normalize_seed, stream

ARRIVAL, DEPARTURE, SWITCH = 0, 1, 2
PLUS, MINUS, BASE, NOLABEL = 0, 1, 2, -1
KIND_CODES = {"A": ARRIVAL, "D": DEPARTURE, "S": SWITCH}
KIND_NAMES = {v: k for k, v in KIND_CODES.items()}
LABEL_CODES = {"+": PLUS, "-": MINUS, "base": BASE, "": NOLABEL}
LABEL_NAMES = {v: k for k, v in LABEL_CODES.items()}

ASSIGNMENTS = ("iid_coin", "balanced_permutation", "efron_biased_coin")


# ---------------------------------------------------------------------------
# designs


@dataclass(frozen=True)
class FixedPrice:
    p: float
    kind = "fixed"


@dataclass(frozen=True)
class IntervalSwitchback:
    p: float
    zeta: float
    interval_length: float
    assignment: str = "iid_coin"
    bias: float = 2.0 / 3.0
    kind = "interval"


@dataclass(frozen=True)
class RegenerativeSwitchback:
    p: float
    zeta: float
    regeneration_state: int = 0
    kind = "regenerative"


@dataclass(frozen=True)
class UserLevel:
    p: float
    zeta: float
    kind = "user"


Design = Union[FixedPrice, IntervalSwitchback, RegenerativeSwitchback, UserLevel]
_DESIGNS = {cls.kind: cls for cls in (FixedPrice, IntervalSwitchback, RegenerativeSwitchback, UserLevel)}


def design_to_dict(design: Design) -> dict:
    return {"kind": design.kind, **asdict(design)}


def design_from_dict(d: dict) -> Design:
    d = dict(d)
    try:
        cls = _DESIGNS[d.pop("kind")]
    except KeyError as exc:
        raise InvalidDesign(f"unknown or missing design kind in {d}") from exc
    try:
        return cls(**d)
    except TypeError as exc:
        raise InvalidDesign(str(exc)) from exc


def design_zeta(design: Design) -> float:
    return getattr(design, "zeta", 0.0)


def validate_design(design: Design, model: RateModel) -> None:
    if isinstance(design, FixedPrice):
        prices = [design.p]
    else:
        if not design.zeta > 0:
            raise InvalidDesign(f"zeta must be positive, got {design.zeta}")
        prices = [design.p - design.zeta, design.p + design.zeta]
    lo, hi = model.price_range
    for q in prices:
        if not lo < q < hi:
            raise InvalidDesign(f"price {q} outside valid range ({lo}, {hi})")
    if isinstance(design, IntervalSwitchback):
        if not design.interval_length > 0:
            raise InvalidDesign("interval_length must be positive")
        if design.assignment not in ASSIGNMENTS:
            raise InvalidDesign(f"unknown assignment {design.assignment!r}")
        if not 0 <= design.bias <= 1:
            raise InvalidDesign("bias must lie in [0, 1]")
    if isinstance(design, RegenerativeSwitchback) and not 0 <= design.regeneration_state <= model.K:
        raise InvalidDesign(f"regeneration state {design.regeneration_state} outside 0..{model.K}")


def assignment_sequence(design: IntervalSwitchback | str, num_intervals: int, rng: np.random.Generator,
                        bias: float | None = None) -> np.ndarray:
    """Arm per interval: 0 for ``p + zeta``, 1 for ``p - zeta``."""
    if isinstance(design, IntervalSwitchback):
        scheme, b = design.assignment, design.bias if bias is None else bias
    else:
        scheme, b = design, 2.0 / 3.0 if bias is None else bias
    n = int(num_intervals)
    if n < 1:
        raise ValueError("num_intervals must be at least 1")
    if scheme == "iid_coin":
        return (rng.random(n) >= 0.5).astype(np.int8)
    if scheme == "balanced_permutation":
        labels = np.array([PLUS] * ((n + 1) // 2) + [MINUS] * (n // 2), dtype=np.int8)
        return rng.permutation(labels)
    if scheme == "efron_biased_coin":
        out = np.empty(n, dtype=np.int8)
        plus = minus = 0
        for i in range(n):
            # the lagging arm gets probability b; with b = 1/2 this is the iid coin draw for draw
            p_plus = 0.5 if plus == minus else (b if plus < minus else 1.0 - b)
            lab = PLUS if rng.random() < p_plus else MINUS
            out[i] = lab
            plus += lab == PLUS
            minus += lab == MINUS
        return out
    raise InvalidDesign(f"unknown assignment {scheme!r}")


# ---------------------------------------------------------------------------
# time-varying environments


@dataclass(frozen=True, eq=False)
class PiecewiseConstant:
    """Regime ``b`` holds on ``(t_{b-1} T, t_b T]``; breakpoints are fractions of the horizon."""

    breakpoints: Sequence[float]
    models: Sequence[RateModel]

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        if len(bp) != len(self.models) + 1 or len(self.models) == 0:
            raise InvalidTrace("need one more breakpoint than regimes")
        if bp[0] != 0.0 or bp[-1] != 1.0 or np.any(np.diff(bp) <= 0):
            raise InvalidTrace("breakpoints must increase strictly from 0 to 1")
        if len({(m.K, m.mu) for m in self.models}) != 1:
            raise InvalidTrace("all regimes must share K and mu")

    @property
    def base(self) -> RateModel:
        return self.models[0]

    def segments(self, T: float) -> tuple[np.ndarray, list[RateModel]]:
        return np.asarray(self.breakpoints[1:], dtype=float) * T, list(self.models)


@dataclass(frozen=True, eq=False)
class Grid:
    """Arrival rates of ``base`` multiplied by ``multipliers[i]`` on slot ``i`` (length ``slot_length``)."""

    base: RateModel
    multipliers: np.ndarray
    slot_length: float

    def __post_init__(self):
        m = np.asarray(self.multipliers, dtype=float)
        if m.ndim != 1 or m.size == 0 or not np.all(m > 0) or not np.all(np.isfinite(m)):
            raise InvalidTrace("multipliers must be a non-empty vector of positive numbers")
        if not self.slot_length > 0:
            raise InvalidTrace("slot_length must be positive")

    @property
    def horizon(self) -> float:
        return len(self.multipliers) * self.slot_length

    def segments(self, T: float) -> tuple[np.ndarray, list[RateModel]]:
        if T > self.horizon * (1 + 1e-12):
            raise InvalidTrace(f"grid covers {self.horizon} time units, horizon is {T}")
        ends = self.slot_length * np.arange(1, len(self.multipliers) + 1)
        return ends, [self.base.arrival_scaled(float(m)) for m in self.multipliers]


Trace = Union[PiecewiseConstant, Grid]

ED_WEEK_FACTORS = (0.9, 1.0, 1.1, 1.2)
SLOTS_PER_DAY = 48


def synthetic_ed_grid() -> np.ndarray:
    """7 x 48 half-hourly multipliers: day-night sinusoid, lighter and later on Saturday (day 5)."""
    hours = np.arange(SLOTS_PER_DAY) * 0.5
    grid = np.empty((7, SLOTS_PER_DAY))
    for d in range(7):
        shift, scale = (9.0, 0.75) if d == 5 else (6.0, 1.0)
        grid[d] = scale * np.maximum(1 + 0.6 * np.sin(2 * np.pi * (hours - shift) / 24), 0.2)
    return grid


def read_trace_csv(path: str | Path) -> np.ndarray:
    """Parse ``day,slot,multiplier`` rows into a ``(days, 48)`` array."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        cells = {(int(r["day"]), int(r["slot"])): float(r["multiplier"]) for r in rows}
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise BadTraceCSV(f"{path}: {exc}") from exc
    if not cells:
        raise BadTraceCSV(f"{path}: no rows")
    days = max(d for d, _ in cells) + 1
    if len(cells) != len(rows) or len(cells) != days * SLOTS_PER_DAY:
        raise BadTraceCSV(f"{path}: expected {SLOTS_PER_DAY} distinct slots for each of {days} days")
    grid = np.empty((days, SLOTS_PER_DAY))
    for (d, s), v in cells.items():
        if not (0 <= s < SLOTS_PER_DAY and d >= 0) or not (v > 0 and math.isfinite(v)):
            raise BadTraceCSV(f"{path}: bad cell day={d} slot={s} multiplier={v}")
        grid[d, s] = v
    return grid


def write_trace_csv(grid: np.ndarray, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["day", "slot", "multiplier"])
        for d in range(grid.shape[0]):
            for s in range(grid.shape[1]):
                w.writerow([d, s, repr(float(grid[d, s]))])


def ed_base_model(K: int = 30) -> RateModel:
    """``lambda_k(p) = 4 (2 - p) / (1 + k)`` with ``mu = 2``."""
    base = 4.0 / (np.arange(K) + 1.0)
    return RateModel(2.0, K, lambda p: base * (2.0 - p), lambda p: -base, kind="scenario preset",
                     price_range=(0.0, 2.0), name="ed_proportional_balking")


def build_ed_trace(weeks: int = 4, grid: np.ndarray | str | Path | None = None, K: int = 30) -> Grid:
    """Half-hourly emergency-department style trace; time unit is one hour.

    ``grid`` is a ``(7, 48)`` weekly template (tiled across weeks) or a
    ``(7 * weeks, 48)`` full grid; defaults to :func:`synthetic_ed_grid`.
    """
    if weeks < 1:
        raise InvalidTrace("weeks must be at least 1")
    if grid is None:
        grid = synthetic_ed_grid()
    elif not isinstance(grid, np.ndarray):
        grid = read_trace_csv(grid)
    if grid.shape == (7, SLOTS_PER_DAY):
        grid = np.tile(grid, (weeks, 1))
    if grid.shape != (7 * weeks, SLOTS_PER_DAY):
        raise BadTraceCSV(f"grid has shape {grid.shape}; need 7 or {7 * weeks} days of {SLOTS_PER_DAY} slots")
    a = np.array([ED_WEEK_FACTORS[w % len(ED_WEEK_FACTORS)] for w in range(weeks)])
    mult = (grid.reshape(weeks, 7 * SLOTS_PER_DAY) * a[:, None]).ravel()
    return Grid(ed_base_model(K), mult, 0.5)


def trace_policy_gradient(env: RateModel | Trace, p: float, T: float) -> float:
    """Time-weighted average of the per-regime ``V'(p)`` over ``[0, T]``."""
    from .gradient import policy_gradient

    if isinstance(env, RateModel):
        return policy_gradient(env, p).value
    ends, models = env.segments(T)
    starts = np.concatenate(([0.0], ends[:-1]))
    total = 0.0
    for a, b, m in zip(starts, np.minimum(ends, T), models):
        if b > a:
            total += (b - a) * policy_gradient(m, p).value
    return total / T


# ---------------------------------------------------------------------------
# event log


@dataclass(eq=False)
class EventLog:
    """Time-ordered trajectory.

    Columns ``t``, ``kind`` (A/D/S codes), ``pre_state`` (queue length just
    before the event; current length for S) and ``label`` (arm code, ``-1`` for
    departures).  ``initial_label`` is the arm in force at time 0 (``None``
    for user-level logs).  A switch may share its timestamp with the arrival or
    departure that triggered it and is then listed after it.
    """

    horizon: float
    initial_state: int
    initial_label: str | None
    t: np.ndarray
    kind: np.ndarray
    pre_state: np.ndarray
    label: np.ndarray
    mu: float
    design: dict = field(default_factory=dict)
    seed: tuple[int, ...] | None = None
    model_id: str = ""

    def __len__(self) -> int:
        return len(self.t)

    def records(self):
        for t, k, s, lab in zip(self.t.tolist(), self.kind.tolist(), self.pre_state.tolist(), self.label.tolist()):
            yield {"t": t, "kind": KIND_NAMES[k], "pre_state": s, "label": LABEL_NAMES[lab]}

    def states_after(self) -> np.ndarray:
        step = np.where(self.kind == ARRIVAL, 1, np.where(self.kind == DEPARTURE, -1, 0))
        return self.initial_state + np.cumsum(step)

    def validate(self, K: int | None = None) -> None:
        """Raise :class:`CorruptLog` unless the trajectory is internally consistent."""
        n = len(self.t)
        if not (len(self.kind) == len(self.pre_state) == len(self.label) == n):
            raise CorruptLog("column lengths differ")
        if not self.horizon >= 0 or self.initial_state < 0:
            raise CorruptLog("negative horizon or initial state")
        if self.initial_label not in (None, "+", "-", "base"):
            raise CorruptLog(f"bad initial label {self.initial_label!r}")
        if n == 0:
            return
        t = self.t
        if not np.all(np.isfinite(t)) or t[0] < 0 or t[-1] > self.horizon:
            raise CorruptLog("event time outside [0, horizon]")
        dt = np.diff(t)
        if np.any(dt < 0):
            raise CorruptLog("event times decrease")
        moves = self.kind != SWITCH
        if np.any(np.diff(t[moves]) <= 0):
            raise CorruptLog("arrival/departure times are not strictly increasing")
        if np.any(~np.isin(self.kind, (ARRIVAL, DEPARTURE, SWITCH))):
            raise CorruptLog("unknown event kind")
        before = np.concatenate(([self.initial_state], self.states_after()[:-1]))
        if np.any(before != self.pre_state):
            raise CorruptLog("pre_state does not match the reconstructed trajectory")
        if np.any(self.pre_state[self.kind == DEPARTURE] == 0):
            raise CorruptLog("departure from an empty queue")
        if K is not None and np.any(self.pre_state[self.kind == ARRIVAL] >= K):
            raise CorruptLog(f"arrival from state >= K={K}")
        arr_labels = self.label[self.kind == ARRIVAL]
        if self.initial_label is None:
            if np.any(self.kind == SWITCH) or np.any((arr_labels != PLUS) & (arr_labels != MINUS)):
                raise CorruptLog("user-level log must label every arrival +/- and contain no switches")
        else:
            arm = np.full(n, LABEL_CODES[self.initial_label], dtype=np.int64)
            sw = np.flatnonzero(self.kind == SWITCH)
            if sw.size:
                if np.any((self.label[sw] != PLUS) & (self.label[sw] != MINUS)):
                    raise CorruptLog("switch to a non +/- arm")
                # arm in force at each event index (a switch applies from its own row on)
                seg = np.searchsorted(sw, np.arange(n), side="right") - 1
                has = seg >= 0
                arm[has] = self.label[sw[seg[has]]]
            if np.any(arr_labels != arm[self.kind == ARRIVAL]):
                raise CorruptLog("arrival label disagrees with the price-switch history")

    # -- serialization -----------------------------------------------------

    def sidecar(self) -> dict:
        return {
            "horizon": self.horizon,
            "initial_state": self.initial_state,
            "initial_label": self.initial_label,
            "mu": self.mu,
            "design": self.design,
            "seed": list(self.seed) if self.seed is not None else None,
            "model_id": self.model_id,
        }

    def write(self, path: str | Path) -> Path:
        """Write ``path`` (CSV) and its JSON sidecar ``path.with_suffix('.json')``."""
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "kind", "pre_state", "label"])
            for t, k, s, lab in zip(self.t.tolist(), self.kind.tolist(), self.pre_state.tolist(), self.label.tolist()):
                w.writerow([repr(t), KIND_NAMES[k], s, LABEL_NAMES[lab]])
        sidecar_path(path).write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def read(cls, path: str | Path) -> "EventLog":
        path = Path(path)
        try:
            meta = json.loads(sidecar_path(path).read_text())
            with open(path, newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader)
                if header != ["t", "kind", "pre_state", "label"]:
                    raise CorruptLog(f"bad header {header}")
                rows = list(reader)
            t = np.array([float(r[0]) for r in rows], dtype=float)
            kind = np.array([KIND_CODES[r[1]] for r in rows], dtype=np.int8)
            state = np.array([int(r[2]) for r in rows], dtype=np.int64)
            label = np.array([LABEL_CODES[r[3]] for r in rows], dtype=np.int8)
            log = cls(
                horizon=float(meta["horizon"]), initial_state=int(meta["initial_state"]),
                initial_label=meta["initial_label"], t=t, kind=kind, pre_state=state, label=label,
                mu=float(meta["mu"]), design=meta.get("design") or {},
                seed=None if meta.get("seed") is None else tuple(meta["seed"]),
                model_id=meta.get("model_id", ""),
            )
        except CorruptLog:
            raise
        except (OSError, KeyError, IndexError, ValueError, StopIteration, json.JSONDecodeError) as exc:
            raise CorruptLog(f"{path}: {exc}") from exc
        log.validate()
        return log


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


# ---------------------------------------------------------------------------
# event loop

MODE_FIXED, MODE_INTERVAL, MODE_REGEN, MODE_USER = 0, 1, 2, 3


@njit(nogil=True, cache=True)
def _event_loop(gen, horizon, mu, seg_ends, rates, mode, x0, arm0, sw_times, sw_labels, k_r,
                out_t, out_kind, out_state, out_label):
    cap = out_t.shape[0]
    n = 0
    t = 0.0
    x = x0
    arm = arm0
    seg = 0
    nseg = seg_ends.shape[0]
    while seg < nseg - 1 and seg_ends[seg] <= 0.0:
        seg += 1
    sw = 0
    nsw = sw_times.shape[0]
    while True:
        boundary = horizon
        if seg_ends[seg] < boundary:
            boundary = seg_ends[seg]
        if mode == MODE_INTERVAL and sw < nsw and sw_times[sw] < boundary:
            boundary = sw_times[sw]
        if mode == MODE_USER:
            a = rates[seg, 0, x]
            b = rates[seg, 1, x]
            r = 0.5 * (a + b)
        else:
            a = 0.0
            b = 0.0
            r = rates[seg, arm, x]
        d = mu if x > 0 else 0.0
        total = r + d
        if total > 0.0:
            dt = gen.exponential(1.0) / total
        else:
            dt = np.inf
        if t + dt >= boundary:
            t = boundary
            if t >= horizon:
                break
            while seg < nseg - 1 and seg_ends[seg] <= t:
                seg += 1
            while mode == MODE_INTERVAL and sw < nsw and sw_times[sw] <= t:
                new = sw_labels[sw]
                sw += 1
                if new != arm:
                    if n >= cap:
                        return -1
                    arm = new
                    out_t[n] = t
                    out_kind[n] = 2
                    out_state[n] = x
                    out_label[n] = arm
                    n += 1
            continue
        t += dt
        if n >= cap:
            return -1
        out_t[n] = t
        out_state[n] = x
        if gen.random() * total < r:
            out_kind[n] = 0
            if mode == MODE_USER:
                out_label[n] = 0 if gen.random() * (a + b) < a else 1
            elif mode == MODE_FIXED:
                out_label[n] = 2
            else:
                out_label[n] = arm
            x += 1
        else:
            out_kind[n] = 1
            out_label[n] = -1
            x -= 1
        n += 1
        if mode == MODE_REGEN and x == k_r:
            new = 0 if gen.random() < 0.5 else 1
            if new != arm:
                if n >= cap:
                    return -1
                arm = new
                out_t[n] = t
                out_kind[n] = 2
                out_state[n] = x
                out_label[n] = arm
                n += 1
    return n


def _rate_tables(env: RateModel | Trace, design: Design, T: float) -> tuple[np.ndarray, np.ndarray, RateModel]:
    if isinstance(design, FixedPrice):
        prices = (design.p, design.p)
    else:
        prices = (design.p + design.zeta, design.p - design.zeta)
    if isinstance(env, Grid):
        # slot tables are scalar multiples of the base rates
        if T > env.horizon * (1 + 1e-12):
            raise InvalidTrace(f"grid covers {env.horizon} time units, horizon is {T}")
        ends = env.slot_length * np.arange(1, len(env.multipliers) + 1, dtype=float)
        ends[-1] = max(ends[-1], T)
        base_tab = np.stack([env.base.rates(q) for q in prices])
        if np.any(base_tab < 0) or not np.all(np.isfinite(base_tab)):
            raise InvalidTrace(f"invalid arrival rates at prices {prices}")
        tables = np.asarray(env.multipliers, dtype=float)[:, None, None] * base_tab[None]
        return ends, tables, env.base
    if isinstance(env, RateModel):
        ends, models = np.array([np.inf]), [env]
    elif isinstance(env, (PiecewiseConstant, Grid)):
        ends, models = env.segments(T)
        ends = ends.copy()
        ends[-1] = max(ends[-1], T)
    else:
        raise InvalidTrace(f"unsupported environment {type(env).__name__}")
    tables = np.empty((len(models), 2, models[0].K + 1))
    for i, m in enumerate(models):
        for j, q in enumerate(prices):
            lam = m.rates(q)
            if np.any(lam < 0) or not np.all(np.isfinite(lam)):
                raise InvalidTrace(f"invalid arrival rates at price {q}")
            tables[i, j] = lam
    return np.asarray(ends, dtype=float), tables, models[0]


def simulate(env: RateModel | Trace, design: Design, horizon: float, seed: Seed, initial_state: int = 0,
             burn_in: float = 0.0) -> EventLog:
    """Simulate one experiment; the result is a deterministic function of the arguments."""
    base = env if isinstance(env, RateModel) else env.base
    validate_design(design, base)
    if not horizon >= 0 or not burn_in >= 0:
        raise InvalidDesign("horizon and burn_in must be non-negative")
    if not 0 <= initial_state <= base.K:
        raise InvalidDesign(f"initial state {initial_state} outside 0..{base.K}")
    total = horizon + burn_in
    ends, tables, base = _rate_tables(env, design, total)
    seed = normalize_seed(seed)
    model_id = base.name or base.kind

    mode = {FixedPrice: MODE_FIXED, IntervalSwitchback: MODE_INTERVAL,
            RegenerativeSwitchback: MODE_REGEN, UserLevel: MODE_USER}[type(design)]
    max_rate = float(tables.max()) + base.mu
    expected = max_rate * total
    cap = int(expected + 10 * math.sqrt(expected) + 64)

    while True:
        gen = stream(seed)
        sw_times = np.empty(0)
        sw_labels = np.empty(0, dtype=np.int64)
        k_r = -1
        if mode == MODE_FIXED:
            arm0 = BASE
        elif mode == MODE_USER:
            arm0 = PLUS
        elif mode == MODE_INTERVAL:
            n_int = max(1, math.ceil(total / design.interval_length))
            labels = assignment_sequence(design, n_int, gen).astype(np.int64)
            arm0 = int(labels[0])
            sw_times = design.interval_length * np.arange(1, n_int, dtype=float)
            sw_labels = labels[1:]
        else:
            k_r = design.regeneration_state
            arm0 = PLUS if gen.random() < 0.5 else MINUS
        n_cap = cap + len(sw_times)
        out_t = np.empty(n_cap)
        out_kind = np.empty(n_cap, dtype=np.int8)
        out_state = np.empty(n_cap, dtype=np.int64)
        out_label = np.empty(n_cap, dtype=np.int8)
        table_arm0 = PLUS if arm0 == BASE else arm0
        n = _event_loop(gen, float(total), float(base.mu), ends, tables, mode, int(initial_state), table_arm0,
                        sw_times, sw_labels, k_r, out_t, out_kind, out_state, out_label)
        if n >= 0:
            break
        cap *= 2

    t, kind, state, label = out_t[:n], out_kind[:n], out_state[:n], out_label[:n]
    init_label = {MODE_FIXED: "base", MODE_USER: None}.get(mode, LABEL_NAMES[arm0])
    x0 = int(initial_state)
    if burn_in > 0:
        cut = int(np.searchsorted(t, burn_in, side="left"))
        head_kind = kind[:cut]
        x0 += int(np.sum(head_kind == ARRIVAL) - np.sum(head_kind == DEPARTURE))
        if init_label in ("+", "-"):
            sw = np.flatnonzero(head_kind == SWITCH)
            if sw.size:
                init_label = LABEL_NAMES[int(label[sw[-1]])]
        t, kind, state, label = t[cut:] - burn_in, kind[cut:], state[cut:], label[cut:]
    return EventLog(
        horizon=float(horizon), initial_state=x0, initial_label=init_label,
        t=t.copy(), kind=kind.copy(), pre_state=state.copy(), label=label.copy(),
        mu=float(base.mu), design=design_to_dict(design), seed=seed, model_id=model_id,
    )
