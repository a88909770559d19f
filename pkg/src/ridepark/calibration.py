"""Back out curve parameters from observations of the no-parking market."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .exceptions import DomainError
from .incentives import MINUTES_PER_HOUR, MarketParams


@dataclass(frozen=True)
class Anchors:
    """Observed no-parking market: rates per hour, waiting time in minutes."""

    arrival_rate: float
    n_drivers: float
    travel_cost: float
    net_wage: float
    waiting_time: float

    def fare_for(self, alpha: float) -> float:
        """Ride fare implied by the travel cost at value of time ``alpha``."""
        return self.travel_cost - alpha * self.waiting_time


# K = 0 values read off the San Francisco case-study figures
SF_ANCHORS = Anchors(
    arrival_rate=150.626318463016 * MINUTES_PER_HOUR,
    n_drivers=3053.13490710308,
    travel_cost=28.8304496365501,
    net_wage=27.4787655378629,
    waiting_time=4.71298170449253,
)


def _log_odds(total, part, what):
    arg = total / part - 1.0
    if not arg > 0:
        raise DomainError(f"{what}: log argument {arg!r} is not positive")
    return math.log(arg)


def _checked_ratio(num, den, what, scale=1.0):
    if not math.isfinite(den) or abs(den) <= 1e-12 * max(scale, 1.0):
        raise DomainError(f"{what}: denominator {den!r} is numerically zero")
    return num / den


def calibrate(params: MarketParams, anchors: Anchors, fit_optimality: bool = False) -> MarketParams:
    """Fit sensitivities and service rate so the anchors are an equilibrium.

    By default ``epsilon``, ``eta`` and ``mu`` are solved in closed form from
    the passenger condition, the driver condition and the waiting-time law
    at the observed point; every other field is kept.

    With ``fit_optimality`` the observed prices are also required to be the
    platform's profit-maximizing choice without parking. The two
    first-order conditions then fix ``epsilon`` and ``eta``, and ``c0`` and
    ``w0`` are re-solved so the market conditions still hold.

    Raises
    ------
    DomainError
        If an anchor is non-positive, exceeds its potential pool, or the
        implied parameter would be undefined or non-positive.
    """
    a = anchors
    for name in ("arrival_rate", "n_drivers", "travel_cost", "net_wage", "waiting_time"):
        value = getattr(a, name)
        if not (math.isfinite(value) and value > 0):
            raise DomainError(f"anchor {name} must be positive, got {value!r}")
    if a.arrival_rate >= params.lambda0:
        raise DomainError("observed arrivals must be below lambda0")
    if a.n_drivers >= params.n0:
        raise DomainError("observed drivers must be below n0")

    n_idle = (params.m_coeff / a.waiting_time) ** 2
    mu = _checked_ratio(a.arrival_rate, a.n_drivers - n_idle, "mu", a.n_drivers)
    if mu <= 0:
        raise DomainError("waiting time implies more idle drivers than drivers")

    if not fit_optimality:
        eps = _checked_ratio(_log_odds(params.lambda0, a.arrival_rate, "epsilon"),
                             a.travel_cost - params.c0, "epsilon", a.travel_cost)
        eta = _checked_ratio(_log_odds(params.n0, a.n_drivers, "eta"),
                             params.w0 - a.net_wage, "eta", a.net_wage)
        if eps <= 0 or eta <= 0:
            raise DomainError(f"non-positive sensitivity: epsilon={eps}, eta={eta}")
        return params.replace(epsilon=eps, eta=eta, mu=mu)

    # marginal waiting cost of one more passenger-hour and of one more driver
    wait_slope = params.alpha * params.m_coeff * n_idle ** -1.5 / 2.0
    fare = a.travel_cost - params.alpha * a.waiting_time
    demand_margin = fare - a.arrival_rate * wait_slope / mu
    eps = _checked_ratio(params.lambda0, (params.lambda0 - a.arrival_rate) * demand_margin,
                         "epsilon", params.lambda0)
    driver_margin = a.arrival_rate * wait_slope - a.net_wage
    eta = _checked_ratio(params.n0, (params.n0 - a.n_drivers) * driver_margin, "eta", params.n0)
    if eps <= 0 or eta <= 0:
        raise DomainError(f"anchors cannot be a profit maximum: epsilon={eps}, eta={eta}")
    c0 = a.travel_cost - _log_odds(params.lambda0, a.arrival_rate, "c0") / eps
    w0 = a.net_wage + _log_odds(params.n0, a.n_drivers, "w0") / eta
    return params.replace(epsilon=eps, eta=eta, mu=mu, c0=c0, w0=w0)
