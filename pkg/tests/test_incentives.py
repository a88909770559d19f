import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import drivers
from ridepark import (DomainError, MarketParams, PlatformDecision, driver_supply, garage_supply,
                      inverse_demand, inverse_driver_supply, inverse_garage_supply, net_wage,
                      passenger_demand, printed_sf_params, travel_cost)


@pytest.fixture(scope="module")
def sf_printed():
    return printed_sf_params(mu=5.383)


def test_travel_cost_examples():
    assert travel_cost(4.71298, 14.6915, 3) == pytest.approx(28.8305, abs=1e-4)
    assert travel_cost(0, 10, 3) == 10
    assert travel_cost(5, 0, 0) == 0


def test_demand_examples(toy, sf_printed):
    assert passenger_demand(toy.c0, toy) == pytest.approx(toy.lambda0 / 2)
    assert passenger_demand(toy.c0 + math.log(3) / toy.epsilon, toy) == pytest.approx(toy.lambda0 / 4)
    assert passenger_demand(28.8304, sf_printed) / 60 == pytest.approx(105.8, abs=0.1)


def test_driver_supply_examples(toy, sf_printed):
    assert driver_supply(toy.w0, toy) == pytest.approx(toy.n0 / 2)
    assert driver_supply(1e6, toy) == toy.n0
    # printed value is rounded; the scalar oracle gives the exact figure
    assert driver_supply(27.4788, sf_printed) == pytest.approx(3295.6, rel=1e-4)
    assert driver_supply(27.4788, sf_printed) == pytest.approx(
        drivers(27.4788, sf_printed.to_dict()), rel=1e-14)


def test_garage_supply_examples(sf_printed):
    assert garage_supply(math.exp(1.1), sf_printed) == pytest.approx(5000)
    assert garage_supply(1.619, sf_printed) == pytest.approx(1516, abs=2)
    assert garage_supply(0.0, sf_printed) == 0.0
    assert garage_supply(1e-300, sf_printed) == pytest.approx(0.0, abs=1e-9)


def test_net_wage_examples():
    d = PlatformDecision(10, 25, 3)
    assert net_wage(d, 0, 0.7, 100, 8) == 25
    assert net_wage(PlatformDecision(10, 25, 8), 40, 0.7, 100, 8) == 25
    back = net_wage(PlatformDecision(14.6, 25.666, 1.65), 1515, 0.9806, 3233.5, 8)
    assert back == pytest.approx(28.58, abs=0.01)
    with pytest.raises(DomainError):
        net_wage(d, 1, 1, 0, 8)


def test_logit_extreme_arguments(toy):
    for x in (1e4, -1e4):
        c = toy.c0 + x / toy.epsilon
        w = toy.w0 - x / toy.eta
        assert np.isfinite(passenger_demand(c, toy))
        assert np.isfinite(driver_supply(w, toy))
    assert passenger_demand(toy.c0 + 1e4 / toy.epsilon, toy) == pytest.approx(0.0, abs=1e-200)
    assert passenger_demand(toy.c0 - 1e4 / toy.epsilon, toy) == toy.lambda0


def test_parameter_validation(toy):
    with pytest.raises(DomainError):
        toy.replace(epsilon=0.0)
    with pytest.raises(DomainError):
        toy.replace(lambda0=-1.0)
    with pytest.raises(DomainError):
        toy.replace(mu=float("nan"))
    with pytest.raises(DomainError):
        PlatformDecision(-1.0, 10.0)
    with pytest.raises(DomainError):
        PlatformDecision(1.0, float("inf"))


pairs = st.tuples(st.floats(-200, 200), st.floats(-200, 200)).filter(lambda p: abs(p[0] - p[1]) > 1e-3)


@settings(max_examples=100)
@given(pairs)
def test_monotone(pair):
    from ridepark.incentives import MarketParams as MP
    P = MP(lambda0=600, n0=50, k0=20, m_coeff=10, alpha=1, epsilon=0.05, c0=20, eta=0.05,
           w0=20, sigma=0.5, u0=0, cruise_cost=8, mu=20)
    a, b = sorted(pair)
    assert passenger_demand(a, P) > passenger_demand(b, P)
    assert driver_supply(a, P) < driver_supply(b, P)
    ea, eb = math.exp(a / 100), math.exp(b / 100)
    assert garage_supply(ea, P) < garage_supply(eb, P)


@settings(max_examples=100)
@given(st.floats(0, 100))
def test_demand_symmetry(delta):
    P = MarketParams(lambda0=600, n0=50, k0=20, m_coeff=10, alpha=1, epsilon=0.2, c0=20, eta=0.5,
                     w0=20, sigma=0.5, u0=0, cruise_cost=8, mu=20)
    s = passenger_demand(P.c0 + delta, P) + passenger_demand(P.c0 - delta, P)
    assert s == pytest.approx(P.lambda0, abs=1e-10)


@settings(max_examples=100)
@given(st.floats(1e-3, 1 - 1e-3))
def test_inverse_round_trips(frac):
    P = MarketParams(lambda0=600, n0=50, k0=20, m_coeff=10, alpha=1, epsilon=0.2, c0=20, eta=0.5,
                     w0=20, sigma=0.5, u0=0, cruise_cost=8, mu=20)
    assert passenger_demand(inverse_demand(frac * P.lambda0, P), P) == pytest.approx(frac * P.lambda0, rel=1e-9)
    assert driver_supply(inverse_driver_supply(frac * P.n0, P), P) == pytest.approx(frac * P.n0, rel=1e-9)
    assert garage_supply(inverse_garage_supply(frac * P.k0, P), P) == pytest.approx(frac * P.k0, rel=1e-9)


@settings(max_examples=50)
@given(st.floats(0, 20), st.floats(0, 20), st.floats(0.1, 30), st.floats(0, 1), st.floats(1, 100))
def test_net_wage_affine_in_parking_rate(p1, p2, K, r, N):
    w1 = net_wage(PlatformDecision(5, 10, p1), K, r, N, 8)
    w2 = net_wage(PlatformDecision(5, 10, p2), K, r, N, 8)
    assert w1 - w2 == pytest.approx(-(p1 - p2) * K * r / N, abs=1e-9)
