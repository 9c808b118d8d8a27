"""Queueing environments and their exact stationary quantities.

A :class:`RateModel` is a single-server birth-death queue: service rate ``mu``,
capacity ``K`` and state-dependent arrival rates ``lambda_k(p)`` for
``k = 0..K-1`` (``lambda_K = 0``).  Everything here is a pure function of the
model and a price.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, InvalidPrice, InvalidProbability, NonPositiveRate, SingularSystem, UnknownScenario

RateFn = Callable[[float], np.ndarray]

PRESETS = ("mm1", "zero_modified", "power_law", "conformity", "appendix_linear", "appendix_quadratic")


@dataclass(frozen=True, eq=False)
class RateModel:
    """Birth-death queue with price-dependent arrival rates.

    ``rate_fn(p)`` returns the ``K`` arrival rates ``lambda_0(p)..lambda_{K-1}(p)``;
    ``deriv_fn(p)`` their price derivatives (central differences are used when
    it is ``None``).  ``price_range`` is an open interval.
    """

    mu: float
    K: int
    rate_fn: RateFn
    deriv_fn: RateFn | None = None
    kind: str = "table"
    price_range: tuple[float, float] = (-math.inf, math.inf)
    name: str = ""
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not self.mu > 0:
            raise NonPositiveRate(f"mu must be positive, got {self.mu}")
        if int(self.K) != self.K or self.K < 1:
            raise ConfigError(f"K must be a positive integer, got {self.K}")

    @property
    def has_analytic_derivatives(self) -> bool:
        return self.deriv_fn is not None

    def check_price(self, p: float) -> None:
        lo, hi = self.price_range
        if not (lo < p < hi):
            raise InvalidPrice(f"price {p} outside valid range ({lo}, {hi})")

    def rates(self, p: float) -> np.ndarray:
        """Arrival rates for states ``0..K`` (the last entry is always 0)."""
        lam = np.asarray(self.rate_fn(p), dtype=float)
        if lam.shape != (self.K,):
            raise ValueError(f"rate_fn returned shape {lam.shape}, expected ({self.K},)")
        return np.append(lam, 0.0)

    def rate(self, k: int, p: float) -> float:
        if k < 0:
            raise IndexError(k)
        if k >= self.K:
            return 0.0
        return float(self.rates(p)[k])

    def rate_derivatives(self, p: float) -> np.ndarray:
        """``lambda_k'(p)`` for ``k = 0..K`` (0 at ``K``)."""
        if self.deriv_fn is not None:
            d = np.asarray(self.deriv_fn(p), dtype=float)
        else:
            h = 1e-6 * max(1.0, abs(p))
            d = (np.asarray(self.rate_fn(p + h), dtype=float) - np.asarray(self.rate_fn(p - h), dtype=float)) / (2 * h)
        return np.append(d, 0.0)

    def without_derivatives(self) -> "RateModel":
        """Copy of the model that falls back to numeric derivatives."""
        return RateModel(self.mu, self.K, self.rate_fn, None, self.kind, self.price_range, self.name, self.params)

    def arrival_scaled(self, c: float) -> "RateModel":
        """Arrival rates multiplied by ``c``; service rate unchanged."""
        rf, df = self.rate_fn, self.deriv_fn
        return RateModel(
            self.mu, self.K,
            lambda p: c * np.asarray(rf(p), dtype=float),
            None if df is None else (lambda p: c * np.asarray(df(p), dtype=float)),
            self.kind, self.price_range, self.name, dict(self.params, multiplier=c),
        )

    def scaled(self, c: float) -> "RateModel":
        """All rates (arrival and service) multiplied by ``c``."""
        rf, df = self.rate_fn, self.deriv_fn
        return RateModel(
            self.mu * c, self.K,
            lambda p: c * np.asarray(rf(p), dtype=float),
            None if df is None else (lambda p: c * np.asarray(df(p), dtype=float)),
            self.kind, self.price_range, self.name, self.params,
        )


@dataclass(frozen=True, eq=False)
class SteadyState:
    pi: np.ndarray
    tail_sums: np.ndarray
    throughput: float
    price: float

    @property
    def K(self) -> int:
        return len(self.pi) - 1


def _checked_rates(model: RateModel, p: float) -> np.ndarray:
    model.check_price(p)
    lam = model.rates(p)
    bad = np.flatnonzero(~(lam[:-1] > 0))
    if bad.size:
        k = int(bad[0])
        raise NonPositiveRate(f"lambda_{k}({p}) = {lam[k]} is not positive")
    return lam


def stationary_from_rates(lam: np.ndarray, mu: float) -> np.ndarray:
    """Stationary law of the birth-death chain with birth rates ``lam[:-1]``."""
    logw = np.concatenate(([0.0], np.cumsum(np.log(lam[:-1]) - math.log(mu))))
    w = np.exp(logw - logw.max())
    return w / math.fsum(w)


def tail_sums(pi: np.ndarray) -> np.ndarray:
    """``S_k = sum_{j >= k} pi_j``."""
    return np.cumsum(pi[::-1])[::-1]


def steady_state(model: RateModel, p: float) -> SteadyState:
    lam = _checked_rates(model, p)
    pi = stationary_from_rates(lam, model.mu)
    return SteadyState(pi=pi, tail_sums=tail_sums(pi), throughput=math.fsum(pi * lam), price=p)


def rate_matrix(model: RateModel, p: float) -> np.ndarray:
    """Tridiagonal generator; the diagonal is minus the off-diagonal row sum."""
    lam = _checked_rates(model, p)
    n = model.K + 1
    Q = np.zeros((n, n))
    idx = np.arange(model.K)
    Q[idx, idx + 1] = lam[:-1]
    Q[idx + 1, idx] = model.mu
    Q[np.arange(n), np.arange(n)] = -(Q.sum(axis=1))
    return Q


def group_inverse_closed_form(model: RateModel, p: float) -> np.ndarray:
    ss = steady_state(model, p)
    pi, S, mu = ss.pi, ss.tail_sums, model.mu
    ratio = np.concatenate(([0.0], S[1:] / pi[1:]))
    inv = np.concatenate(([0.0], 1.0 / pi[1:]))
    C = np.cumsum(ratio)  # C[k] = sum_{j=1}^k S_j/pi_j
    D = np.cumsum(inv)  # D[m] = sum_{j=1}^m 1/pi_j
    E = math.fsum(S[1:] ** 2 / pi[1:])
    k = np.arange(model.K + 1)
    kk, ii = np.meshgrid(k, k, indexing="ij")
    return (pi[None, :] / mu) * (-D[np.minimum(kk, ii)] + C[:, None] + C[None, :] - E)


def group_inverse_oracle(Q: np.ndarray, pi: np.ndarray | SteadyState) -> np.ndarray:
    """Dense-solve group inverse ``-(1 pi^T - Q)^{-1} (I - 1 pi^T)``."""
    if isinstance(pi, SteadyState):
        pi = pi.pi
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    proj = np.outer(np.ones(n), pi)
    try:
        out = -np.linalg.solve(proj - Q, np.eye(n) - proj)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(out)):
        raise SingularSystem("non-finite group inverse")
    return out


def stationary_oracle(Q: np.ndarray) -> np.ndarray:
    """Solve ``pi^T Q = 0, sum(pi) = 1`` by least squares on the stacked system."""
    n = Q.shape[0]
    A = np.vstack([Q.T, np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    return np.linalg.lstsq(A, b, rcond=None)[0]


# ---------------------------------------------------------------------------
# constructors


_FAMILIES: dict[str, tuple[Callable[[float], float], Callable[[float], float], tuple[float, float]]] = {
    "linear": (lambda p: 2.0 - p, lambda p: -1.0, (0.0, 2.0)),
    "quadratic": (lambda p: (2.0 - p) + (1.0 - p) ** 2, lambda p: -1.0 - 2.0 * (1.0 - p), (0.0, 2.0)),
    "constant": (lambda p: 1.0, lambda p: 0.0, (-math.inf, math.inf)),
}


def table_model(base_rates: Sequence[float], mu: float = 1.0, family: str = "linear", *,
                name: str = "table", params: Mapping[str, object] | None = None) -> RateModel:
    """``lambda_k(p) = base_k * f(p)`` with ``f`` from the named price family.

    ``linear`` is ``2 - p`` and ``quadratic`` is ``(2 - p) + (1 - p)^2``; both equal
    1 at ``p = 1`` so ``base_rates`` are the rates at unit price.
    """
    try:
        f, df, prange = _FAMILIES[family]
    except KeyError:
        raise UnknownScenario(f"unknown price family {family!r}") from None
    base = np.array(base_rates, dtype=float)
    base.setflags(write=False)
    return RateModel(
        mu=float(mu), K=len(base),
        rate_fn=lambda p: base * f(p),
        deriv_fn=lambda p: base * df(p),
        kind="closed-form table", price_range=prange, name=name,
        params=dict(params or {}, family=family),
    )


def custom_model(rate: Callable[[int, float], float], mu: float, K: int,
                 derivative: Callable[[int, float], float] | None = None, *,
                 price_range: tuple[float, float] = (-math.inf, math.inf), name: str = "custom") -> RateModel:
    """Wrap a scalar evaluator ``rate(k, p)`` (and optionally ``derivative(k, p)``)."""
    ks = range(K)
    rf = lambda p: np.array([rate(k, p) for k in ks], dtype=float)
    df = None if derivative is None else (lambda p: np.array([derivative(k, p) for k in ks], dtype=float))
    return RateModel(mu, K, rf, df, kind="custom", price_range=price_range, name=name)


def join_probability_model(lambda_raw: float, prob: Callable[[int, float, float], float], K: int,
                           mu: float = 1.0, prob_derivative: Callable[[int, float, float], float] | None = None, *,
                           price_range: tuple[float, float] = (-math.inf, math.inf),
                           name: str = "join") -> RateModel:
    """Raw Poisson arrivals thinned by a join probability ``prob(k, mu, p)``."""
    ks = range(K)

    def rf(p):
        q = np.array([prob(k, mu, p) for k in ks], dtype=float)
        if np.any(q < 0) or np.any(q > 1) or np.any(np.isnan(q)):
            raise InvalidProbability(f"join probability outside [0, 1] at p={p}")
        return lambda_raw * q

    df = None
    if prob_derivative is not None:
        df = lambda p: lambda_raw * np.array([prob_derivative(k, mu, p) for k in ks], dtype=float)
    return RateModel(mu, K, rf, df, kind="join-probability", price_range=price_range, name=name,
                     params={"lambda_raw": lambda_raw})


def waiting_cost_prob(U: float, c: float):
    """Join rule ``u >= c k / mu + p`` with ``u ~ Uniform[0, U]`` and a fixed cost ``c``.

    Returns ``(prob, prob_derivative)``.
    """
    def prob(k, mu, p):
        return min(1.0, max(0.0, (U - c * k / mu - p) / U))

    def dprob(k, mu, p):
        x = (U - c * k / mu - p) / U
        return -1.0 / U if 0.0 < x < 1.0 else 0.0

    return prob, dprob


def proportional_balking_prob(k: int, mu: float, p: float) -> float:
    return 1.0 / (k + 1)


def state_dependent_pricing(base_prices: Sequence[float], demand: Callable[[int, float], float], mu: float,
                            demand_derivative: Callable[[int, float], float] | None = None, *,
                            price_range: tuple[float, float] = (0.0, math.inf)) -> RateModel:
    """State ``k`` charges ``b_k * p``; ``demand(k, price)`` is the arrival rate at that price.

    ``p`` then acts as a multiplicative price level, so ``V'(1)`` is the response
    to a uniform percentage price change.
    """
    b = np.array(base_prices, dtype=float)
    K = len(b)
    rf = lambda p: np.array([demand(k, b[k] * p) for k in range(K)], dtype=float)
    df = None
    if demand_derivative is not None:
        df = lambda p: np.array([b[k] * demand_derivative(k, b[k] * p) for k in range(K)], dtype=float)
    return RateModel(mu, K, rf, df, kind="state-dependent-pricing", price_range=price_range,
                     name="state_dependent_pricing", params={"base_prices": b.tolist()})


def preset_base_rates(name: str, params: Mapping[str, object] | None = None) -> tuple[np.ndarray, float]:
    """Unit-price arrival table and service rate for a named scenario."""
    params = dict(params or {})
    params.pop("family", None)
    if name == "mm1":
        lam, K = float(params.pop("lam", 0.5)), int(params.pop("K", 30))
        base, mu = np.full(K, lam), float(params.pop("mu", 1.0))
    elif name == "zero_modified":
        lam0, lam, K = float(params.pop("lam0", 1.0)), float(params.pop("lam", 0.5)), int(params.pop("K", 30))
        base = np.full(K, lam)
        base[0] = lam0
        mu = float(params.pop("mu", 1.0))
    elif name == "power_law":
        alpha, K = float(params.pop("alpha", 0.4)), int(params.pop("K", 15))
        base = float(params.pop("scale", 2.0)) * (np.arange(K) + 1.0) ** (-alpha)
        mu = float(params.pop("mu", 1.0))
    elif name == "conformity":
        lam, K = float(params.pop("lam", 2.0)), int(params.pop("K", 15))
        base = lam * (0.5 + (np.arange(K) - 7) / 200)
        mu = float(params.pop("mu", 1.0))
    elif name in ("appendix_linear", "appendix_quadratic"):
        # proportional balking 4/(1+k) with mu = 2 (non-stationary simulator at unit multipliers)
        if "base_rates" in params:
            base = np.array(params.pop("base_rates"), dtype=float)
        else:
            K = int(params.pop("K", 30))
            base = float(params.pop("scale", 4.0)) / (np.arange(K) + 1.0)
        mu = float(params.pop("mu", 2.0))
    else:
        raise UnknownScenario(f"unknown scenario {name!r}; expected one of {PRESETS}")
    if params:
        raise UnknownScenario(f"unknown parameters for {name}: {sorted(params)}")
    return base, mu


def scenario_preset(name: str, params: Mapping[str, object] | None = None) -> RateModel:
    """Named scenario with unit-price table scaled by the ``linear`` or ``quadratic`` price family."""
    params = dict(params or {})
    default_family = "quadratic" if name == "appendix_quadratic" else "linear"
    family = str(params.get("family", default_family))
    base, mu = preset_base_rates(name, params)
    return table_model(base, mu, family, name=name, params=params)
