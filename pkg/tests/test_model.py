from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from congestion_lab.errors import (
    ConfigError, InvalidPrice, InvalidProbability, NonPositiveRate, SingularSystem, UnknownScenario,
)
from congestion_lab.model import (
    PRESETS, group_inverse_closed_form, group_inverse_oracle, join_probability_model, proportional_balking_prob,
    rate_matrix, scenario_preset, state_dependent_pricing, stationary_from_rates, stationary_oracle,
    steady_state, table_model, waiting_cost_prob,
)

rate_tables = st.lists(st.floats(0.05, 5.0), min_size=1, max_size=30)
mus = st.floats(0.2, 5.0)


def mm1_k2():
    return table_model([0.5, 0.5], mu=1.0)


def fraction_stationary(lam, mu):
    """Exact rational stationary law from detailed balance."""
    w = [Fraction(1)]
    for x in lam:
        w.append(w[-1] * Fraction(x) / Fraction(mu))
    total = sum(w)
    return [x / total for x in w]


def test_uniform_law_when_rho_is_one():
    ss = steady_state(table_model([1.0, 1.0, 1.0], family="constant"), 0.3)
    np.testing.assert_allclose(ss.pi, 0.25, rtol=0, atol=1e-15)


def test_mm1_k2_law_and_throughput():
    ss = steady_state(mm1_k2(), 1.0)
    exact = fraction_stationary([0.5, 0.5], 1)
    assert exact == [Fraction(4, 7), Fraction(2, 7), Fraction(1, 7)]
    np.testing.assert_allclose(ss.pi, [float(x) for x in exact], rtol=1e-15)
    np.testing.assert_allclose(ss.pi, stationary_oracle(rate_matrix(mm1_k2(), 1.0)), atol=1e-14)
    assert ss.throughput == pytest.approx(3 / 7, abs=1e-15)
    assert 1.0 * (1 - ss.pi[0]) == pytest.approx(3 / 7, abs=1e-15)


def test_rate_matrix_small_cases():
    Q1 = rate_matrix(table_model([0.7], mu=1.3), 1.0)
    np.testing.assert_array_equal(Q1, [[-0.7, 0.7], [1.3, -1.3]])
    Q2 = rate_matrix(mm1_k2(), 1.0)
    np.testing.assert_array_equal(Q2[1], [1.0, -1.5, 0.5])


@given(st.lists(st.integers(1, 64), min_size=1, max_size=30), st.integers(1, 64))
def test_rate_matrix_rows_sum_to_zero_exactly_for_dyadic_rates(nums, m):
    model = table_model([n / 8 for n in nums], mu=m / 8, family="constant")
    assert np.all(rate_matrix(model, 0.0).sum(axis=1) == 0.0)


@given(rate_tables, mus)
def test_rate_matrix_rows_sum_to_zero(lam, mu):
    Q = rate_matrix(table_model(lam, mu=mu, family="constant"), 0.0)
    assert np.all(np.abs(Q.sum(axis=1)) <= 4 * np.finfo(float).eps * np.abs(Q).max())


@given(rate_tables, mus)
def test_stationary_law_properties(lam, mu):
    pi = steady_state(table_model(lam, mu=mu, family="constant"), 0.0).pi
    assert np.all(pi >= 0)
    assert pi.sum() == pytest.approx(1.0, abs=1e-12)
    # detailed balance
    np.testing.assert_allclose(pi[:-1] * np.array(lam), pi[1:] * mu, rtol=1e-10, atol=1e-300)


@settings(max_examples=50)
@given(st.lists(st.integers(1, 9), min_size=1, max_size=8), st.integers(1, 9))
def test_stationary_law_matches_exact_rationals(nums, m):
    lam = [Fraction(n, 4) for n in nums]
    exact = fraction_stationary(lam, Fraction(m, 4))
    pi = stationary_from_rates(np.array([float(x) for x in lam] + [0.0]), m / 4)
    np.testing.assert_allclose(pi, [float(x) for x in exact], rtol=1e-13)


def test_log_space_solve_survives_extreme_ratios():
    pi = steady_state(table_model([50.0] * 400, mu=0.5, family="constant"), 0.0).pi
    assert np.isfinite(pi).all() and pi[-1] == pytest.approx(1 - 0.01, rel=1e-12)


def test_group_inverse_two_state():
    model = table_model([1.0], mu=1.0)
    expected = np.array([[-0.25, 0.25], [0.25, -0.25]])
    np.testing.assert_allclose(group_inverse_closed_form(model, 1.0), expected, atol=1e-15)
    Q = rate_matrix(model, 1.0)
    np.testing.assert_allclose(Q / 4, expected, atol=1e-15)
    oracle = group_inverse_oracle(Q, steady_state(model, 1.0))
    np.testing.assert_allclose(oracle, group_inverse_closed_form(model, 1.0), atol=1e-12)


def test_group_inverse_mm1_k2():
    model = mm1_k2()
    G = group_inverse_closed_form(model, 1.0)
    assert G[0, 0] == pytest.approx(-22 / 49, abs=1e-14)
    ss = steady_state(model, 1.0)
    Q = rate_matrix(model, 1.0)
    oracle = group_inverse_oracle(Q, ss.pi)
    np.testing.assert_allclose(oracle, G, atol=1e-10)
    np.testing.assert_allclose(ss.pi @ oracle, 0, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.2, 2.0), min_size=1, max_size=30), st.floats(0.3, 3.0))
def test_group_inverse_identities(rho, mu):
    # load ratios in [0.2, 2] keep pi_0 away from underflow; beyond that the dense oracle loses digits too
    model = table_model([r * mu for r in rho], mu=mu, family="constant")
    ss = steady_state(model, 0.0)
    Q = rate_matrix(model, 0.0)
    G = group_inverse_closed_form(model, 0.0)
    n = len(ss.pi)
    proj = np.outer(np.ones(n), ss.pi)
    np.testing.assert_allclose(Q @ G, np.eye(n) - proj, atol=1e-9)
    np.testing.assert_allclose(ss.pi @ G, 0, atol=1e-9)
    np.testing.assert_allclose(G, group_inverse_oracle(Q, ss), atol=1e-9)


def test_group_inverse_oracle_singular():
    with pytest.raises(SingularSystem):
        group_inverse_oracle(np.zeros((2, 2)), np.array([1.0, 0.0]))


def test_preset_rates_at_unit_price():
    k = np.arange(15)
    power = scenario_preset("power_law", {"alpha": 0.4})
    np.testing.assert_allclose(power.rates(1.0)[:-1], 2 * (k + 1) ** -0.4, rtol=1e-15)
    assert (power.K, power.mu) == (15, 1.0)
    conf = scenario_preset("conformity", {"lam": 2.0})
    np.testing.assert_allclose(conf.rates(1.0)[:-1], 2 * (0.5 + (k - 7) / 200), rtol=1e-15)
    mm1 = scenario_preset("mm1")
    assert mm1.K == 30 and mm1.mu == 1.0 and np.all(mm1.rates(1.0)[:-1] == 0.5)
    zm = scenario_preset("zero_modified")
    assert zm.rates(1.0)[0] == 1.0 and np.all(zm.rates(1.0)[1:-1] == 0.5)
    assert mm1.rates(1.0)[-1] == 0.0


@pytest.mark.parametrize("name", PRESETS)
def test_presets_unit_price_slope(name):
    m = scenario_preset(name)
    np.testing.assert_allclose(m.rate_derivatives(1.0), -m.rates(1.0), rtol=1e-15)


def test_quadratic_family_shape():
    m = table_model([1.0], family="quadratic")
    assert m.rates(0.5)[0] == pytest.approx(1.5 + 0.25)
    assert m.rate_derivatives(0.5)[0] == pytest.approx(-2.0)


def test_numeric_derivative_fallback():
    m = scenario_preset("power_law").without_derivatives()
    assert not m.has_analytic_derivatives
    np.testing.assert_allclose(m.rate_derivatives(1.2), scenario_preset("power_law").rate_derivatives(1.2),
                               rtol=1e-8)


def test_join_probability_models():
    ones = join_probability_model(0.8, lambda k, mu, p: 1.0, K=5)
    np.testing.assert_array_equal(ones.rates(1.0)[:-1], 0.8)
    balk = join_probability_model(3.0, proportional_balking_prob, K=6)
    np.testing.assert_allclose(balk.rates(1.0)[:-1], 3.0 / (np.arange(6) + 1))
    prob, dprob = waiting_cost_prob(U=4.0, c=0.5)
    for k, p in [(0, 1.0), (3, 1.0), (20, 1.0), (0, 5.0), (2, 0.2)]:
        assert prob(k, 2.0, p) == min(1.0, max(0.0, (4.0 - 0.5 * k / 2.0 - p) / 4.0))
    wc = join_probability_model(2.0, prob, K=4, mu=2.0, prob_derivative=dprob)
    np.testing.assert_allclose(wc.rate_derivatives(1.0), [-0.5, -0.5, -0.5, -0.5, 0.0])
    bad = join_probability_model(1.0, lambda k, mu, p: 1.5, K=2)
    with pytest.raises(InvalidProbability):
        bad.rates(1.0)


def test_state_dependent_pricing():
    m = state_dependent_pricing([1.0, 2.0], lambda k, price: 3.0 - price, mu=1.0,
                                demand_derivative=lambda k, price: -1.0)
    np.testing.assert_allclose(m.rates(1.0), [2.0, 1.0, 0.0])
    np.testing.assert_allclose(m.rate_derivatives(1.0), [-1.0, -2.0, 0.0])


def test_model_errors():
    with pytest.raises(InvalidPrice):
        steady_state(scenario_preset("mm1"), 2.0)
    with pytest.raises(NonPositiveRate):
        steady_state(table_model([1.0, 0.0], family="constant"), 1.0)
    with pytest.raises(NonPositiveRate):
        table_model([1.0], mu=0.0)
    with pytest.raises(ConfigError):
        table_model([], mu=1.0)
    with pytest.raises(UnknownScenario):
        scenario_preset("mg1")
    with pytest.raises(UnknownScenario):
        scenario_preset("mm1", {"rho": 0.3})
    with pytest.raises(UnknownScenario):
        table_model([1.0], family="cubic")


def test_scaling_helpers():
    m = scenario_preset("mm1", {"K": 4})
    np.testing.assert_allclose(m.arrival_scaled(2.0).rates(1.0), 2 * m.rates(1.0))
    both = m.scaled(3.0)
    assert both.mu == 3.0
    np.testing.assert_allclose(steady_state(both, 1.0).pi, steady_state(m, 1.0).pi, rtol=1e-14)
