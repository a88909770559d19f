import math

import pytest

from oracles import demand, drivers, market_no_parking
from ridepark import SF_ANCHORS, Anchors, DomainError, calibrate, printed_sf_params


def _forward(P, a):
    """Re-evaluate the three market relations at the anchors with the scalar oracle."""
    Pd = P.to_dict()
    n_idle = a.n_drivers - a.arrival_rate / P.mu
    return (demand(a.travel_cost, Pd), drivers(a.net_wage, Pd), P.m_coeff / math.sqrt(n_idle))


def test_closed_form_example():
    P = calibrate(printed_sf_params(mu=1.0), SF_ANCHORS)
    assert P.epsilon == pytest.approx(0.1244, abs=1e-4)
    assert P.eta == pytest.approx(0.1668, abs=1e-4)
    assert P.mu == pytest.approx(5.383, abs=1e-3)


@pytest.mark.parametrize("fit", [False, True])
def test_round_trip(fit):
    P = calibrate(printed_sf_params(mu=1.0), SF_ANCHORS, fit_optimality=fit)
    lam, N, t_w = _forward(P, SF_ANCHORS)
    assert lam == pytest.approx(SF_ANCHORS.arrival_rate, rel=1e-6)
    assert N == pytest.approx(SF_ANCHORS.n_drivers, rel=1e-6)
    assert t_w == pytest.approx(SF_ANCHORS.waiting_time, rel=1e-6)


def test_optimality_fit_makes_anchors_stationary():
    P = calibrate(printed_sf_params(mu=1.0), SF_ANCHORS, fit_optimality=True).to_dict()
    p_f = SF_ANCHORS.fare_for(P["alpha"])
    w_g = SF_ANCHORS.net_wage
    base = market_no_parking(p_f, w_g, P)["profit"]
    h = 1e-3
    for dp, dw in [(h, 0), (0, h)]:
        up = market_no_parking(p_f + dp, w_g + dw, P)["profit"]
        down = market_no_parking(p_f - dp, w_g - dw, P)["profit"]
        assert (up - down) / (2 * h) == pytest.approx(0.0, abs=0.5)
        assert up <= base and down <= base


def test_consistent_anchors_return_params_unchanged(toy):
    lam, N = 200.0, 30.0
    t_w = toy.m_coeff / math.sqrt(N - lam / toy.mu)
    c = toy.c0 + math.log(toy.lambda0 / lam - 1) / toy.epsilon
    w = toy.w0 - math.log(toy.n0 / N - 1) / toy.eta
    out = calibrate(toy.replace(epsilon=0.9, eta=0.9, mu=3.0), Anchors(lam, N, c, w, t_w))
    for name in ("epsilon", "eta", "mu"):
        assert getattr(out, name) == pytest.approx(getattr(toy, name), rel=1e-12)


def test_profit_identity():
    lam = 150.626 * 60
    assert lam * 14.6915 - 27.4788 * 3053.13 == pytest.approx(48879.256, rel=1e-3)


@pytest.mark.parametrize("change", [
    dict(arrival_rate=944.0 * 60),
    dict(arrival_rate=-1.0),
    dict(n_drivers=10_000.0),
    dict(waiting_time=0.0),
    dict(waiting_time=1.0),   # implies more idle drivers than drivers
    dict(travel_cost=15.48),  # zero denominator for epsilon
])
def test_domain_errors(change):
    a = SF_ANCHORS.__dict__ | change
    with pytest.raises(DomainError):
        calibrate(printed_sf_params(mu=1.0), Anchors(**a))
