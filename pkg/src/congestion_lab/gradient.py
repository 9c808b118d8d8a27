"""Exact policy gradients and asymptotic variances of the gradient estimators."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import RateModel, steady_state, tail_sums


@dataclass(frozen=True)
class GradientReport:
    """``V'(p)`` computed three ways: d/dp of throughput, idle time, weighted direct effect."""

    value_model_free: float
    value_idle_time: float
    value_weighted_direct: float

    @property
    def max_pairwise_gap(self) -> float:
        v = (self.value_model_free, self.value_idle_time, self.value_weighted_direct)
        return max(abs(a - b) for a in v for b in v)

    @property
    def value(self) -> float:
        return self.value_weighted_direct


@dataclass(frozen=True)
class AsymptoticVariances:
    """Limit variances of ``sqrt(T zeta^2) * (estimate - V'(p))``."""

    sigma2_model_free: float
    sigma2_idle: float
    sigma2_wde: float
    sigma2_ur: float

    def as_dict(self) -> dict[str, float]:
        return {
            "model_free": self.sigma2_model_free,
            "idle_time": self.sigma2_idle,
            "wde": self.sigma2_wde,
            "ur": self.sigma2_ur,
        }


def _central(f, p: float) -> float:
    h = 1e-6 * max(1.0, abs(p))
    return (f(p + h) - f(p - h)) / (2 * h)


def policy_gradient(model: RateModel, p: float) -> GradientReport:
    ss = steady_state(model, p)
    pi, S, mu = ss.pi, ss.tail_sums, model.mu
    lam = model.rates(p)
    dlam = model.rate_derivatives(p)
    K = model.K
    r = dlam[:K] / lam[:K]  # lambda_k'/lambda_k
    wde = mu * pi[0] * math.fsum(r * S[1:])

    if model.has_analytic_derivatives:
        # d log pi_k / dp = d log pi_0 / dp + sum_{i<k} r_i
        g = np.concatenate(([0.0], np.cumsum(r)))
        dlog_pi0 = -math.fsum(pi * g)
        dpi = pi * (dlog_pi0 + g)
        model_free = math.fsum(dlam * pi) + math.fsum(dpi * lam)
        idle = -mu * pi[0] * dlog_pi0
    else:
        model_free = _central(lambda q: steady_state(model, q).throughput, p)
        idle = -mu * _central(lambda q: steady_state(model, q).pi[0], p)
    return GradientReport(float(model_free), float(idle), float(wde))


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # states whose probability underflowed to 0 have a vanishing tail too; their terms are 0
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def variances_from_pi(pi: np.ndarray, mu: float) -> tuple[float, float, float]:
    """``(sigma2_model_free, sigma2_idle, sigma2_wde)`` for a stationary law ``pi``.

    Works for true and plug-in ``pi`` alike.
    """
    pi = np.asarray(pi, dtype=float)
    S = tail_sums(pi)
    pi0 = pi[0]
    sq = math.fsum(_ratio(S[1:] ** 2, pi[1:]))
    cross = math.fsum(_ratio(S[1:-1] * S[2:], pi[1:-1]))
    sigma2_mf = (1 - pi0) * mu + 2 * mu * pi0 * (cross - (1 - pi0) * sq)
    sigma2_wde = mu * pi0 ** 2 * sq
    return float(sigma2_mf), float(2 * sigma2_wde), float(sigma2_wde)


def asymptotic_variance(model: RateModel, p: float) -> AsymptoticVariances:
    mf, idle, wde = variances_from_pi(steady_state(model, p).pi, model.mu)
    return AsymptoticVariances(mf, idle, wde, wde)


def variance_gap_identity(pi: np.ndarray, mu: float) -> float:
    """``mu * sum_{k>=1} (sqrt(pi_k) - pi_0 S_k / sqrt(pi_k))^2``, the model-free minus WDE gap."""
    pi = np.asarray(pi, dtype=float)
    S = tail_sums(pi)
    root = np.sqrt(pi[1:])
    return mu * math.fsum((root - pi[0] * _ratio(S[1:], root)) ** 2)


def variance_ordering_report(model: RateModel, price_grid) -> list[dict[str, float]]:
    rows = []
    for p in price_grid:
        pi = steady_state(model, p).pi
        mf, idle, wde = variances_from_pi(pi, model.mu)
        gap = mf - wde
        if gap < -1e-12:
            raise ArithmeticError(f"model-free variance below WDE variance at p={p}: gap={gap}")
        rows.append({
            "price": float(p),
            "sigma2_model_free": mf,
            "sigma2_idle": idle,
            "sigma2_wde": wde,
            "gap": gap,
            "gap_identity": variance_gap_identity(pi, model.mu),
        })
    return rows
