"""Behavioural curves of passengers, drivers and garage operators.

Units are fixed across the package: rates are per hour, waiting time is in
minutes, and the value of time ``alpha`` is in dollars per minute, so that
``alpha * t_w`` is directly in dollars.

Every function accepts scalars or numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np
from scipy.special import erf, ndtri

from .exceptions import DomainError

# logit exponents are clamped to this magnitude before exponentiation
LOGIT_CLAMP = 700.0

MINUTES_PER_HOUR = 60.0


@dataclass(frozen=True)
class MarketParams:
    """Exogenous market parameters.

    Attributes
    ----------
    lambda0 : potential passenger arrivals per hour (all travellers,
        whatever mode they pick).
    n0 : potential drivers.
    k0 : potential idle parking slots.
    m_coeff : waiting-time coefficient, minutes times sqrt(vehicles).
    alpha : value of waiting time, $/minute.
    epsilon : demand sensitivity, 1/$.
    c0 : travel cost of the outside option, $.
    eta : driver supply sensitivity, hours/$.
    w0 : reservation wage, $/hour.
    sigma : log-normal spread of garage reservation earnings.
    u0 : log-normal location of garage reservation earnings (log $/hour).
    cruise_cost : hourly cost of cruising instead of parking, $/hour.
    mu : trips completed per hour by one busy driver.
    """

    lambda0: float
    n0: float
    k0: float
    m_coeff: float
    alpha: float
    epsilon: float
    c0: float
    eta: float
    w0: float
    sigma: float
    u0: float
    cruise_cost: float
    mu: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise DomainError(f"{f.name} must be a finite number, got {value!r}")
        if self.lambda0 < 0:
            raise DomainError("lambda0 must be >= 0")
        for name in ("n0", "k0", "m_coeff", "alpha", "epsilon", "eta",
                     "sigma", "cruise_cost", "mu"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be > 0")

    def replace(self, **changes) -> "MarketParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PlatformDecision:
    """The three prices the platform sets.

    ``parking_rate`` above ``cruise_cost`` is allowed (drivers would rather
    cruise) so that optimizers can probe it; negative prices are not.
    """

    ride_fare: float
    gross_wage: float
    parking_rate: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value) or value < 0:
                raise DomainError(f"{f.name} must be finite and >= 0, got {value!r}")


# Parameter values printed for the San Francisco case study. The service
# rate is not among them and has to be supplied (see calibration).
SF_PRINTED = dict(
    lambda0=944.0 * MINUTES_PER_HOUR,
    n0=10_000.0,
    k0=10_000.0,
    m_coeff=174.7,
    alpha=3.0,
    epsilon=0.155,
    c0=15.48,
    eta=0.144,
    w0=32.41,
    sigma=0.6,
    u0=1.1,
    cruise_cost=8.0,
)


def printed_sf_params(mu: float) -> MarketParams:
    """San Francisco parameters as printed, with an explicit service rate."""
    return MarketParams(**SF_PRINTED, mu=mu)


def _logistic(x):
    """``1 / (1 + e^x)`` with the exponent clamped against overflow."""
    return 1.0 / (1.0 + np.exp(np.clip(x, -LOGIT_CLAMP, LOGIT_CLAMP)))


def travel_cost(t_w, p_f, alpha):
    """Generalized passenger cost ``alpha * t_w + p_f`` in dollars."""
    return alpha * t_w + p_f


def passenger_demand(c, params: MarketParams):
    """Logit arrival rate ``lambda0 / (1 + exp(eps (c - c0)))``, per hour."""
    return params.lambda0 * _logistic(params.epsilon * (np.asarray(c, dtype=float) - params.c0))


def inverse_demand(arrival_rate, params: MarketParams):
    """Travel cost at which ``arrival_rate`` passengers per hour ride."""
    lam = np.asarray(arrival_rate, dtype=float)
    with np.errstate(divide="ignore"):
        return params.c0 + np.log(params.lambda0 / lam - 1.0) / params.epsilon


def net_wage(decision: PlatformDecision, k_slots, r, n_drivers, cruise_cost):
    """Driver hourly wage after parking savings, ``w_g + (l - p_g) K r / N``."""
    n = np.asarray(n_drivers, dtype=float)
    if np.any(n <= 0):
        raise DomainError("n_drivers must be > 0")
    savings = (cruise_cost - decision.parking_rate) * np.asarray(k_slots, dtype=float) * r
    return decision.gross_wage + savings / n


def driver_supply(w_n, params: MarketParams):
    """Logit driver count ``N0 / (1 + exp(eta (w0 - w_n)))``."""
    return params.n0 * _logistic(params.eta * (params.w0 - np.asarray(w_n, dtype=float)))


def inverse_driver_supply(n_drivers, params: MarketParams):
    """Net wage that attracts ``n_drivers`` drivers."""
    n = np.asarray(n_drivers, dtype=float)
    with np.errstate(divide="ignore"):
        return params.w0 - np.log(params.n0 / n - 1.0) / params.eta


def garage_supply(earning, params: MarketParams):
    """Parking slots offered at a per-slot hourly ``earning``.

    Reservation earnings are log-normal, so supply is
    ``K0 (1/2 + 1/2 erf((ln e - u0) / (sqrt(2) sigma)))``. ``erf`` is the
    scipy special-function routine. Non-positive earnings attract no slots.
    """
    e = np.asarray(earning, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (np.log(np.where(e > 0, e, 1.0)) - params.u0) / (math.sqrt(2.0) * params.sigma)
        k = params.k0 * (0.5 + 0.5 * erf(z))
    return np.where(e > 0, k, 0.0)[()]


def inverse_garage_supply(k_slots, params: MarketParams):
    """Per-slot earning needed to attract ``k_slots`` slots (0 for none)."""
    k = np.asarray(k_slots, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(k > 0, np.exp(params.u0 + params.sigma * ndtri(k / params.k0)), 0.0)[()]
