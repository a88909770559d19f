"""Stationary analysis of the M/M/N passenger-driver matching queue.

Passengers are jobs and drivers are servers. The quantities of interest are
the distribution of the number of *idle* drivers, the expected occupancy of
``K`` parking slots by those idle drivers, and the square-root law for the
passenger waiting time.

All probabilities are built from log-weights (log-gamma for factorials) and
normalized with a max-shifted exponential sum, so fleets of ten thousand
drivers at occupancy close to one are handled without overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy

from .exceptions import DomainError, InstabilityError

# terms whose log-weight is this far below the largest one are dropped
LOG_WEIGHT_CUTOFF = 45.0


@dataclass(frozen=True)
class QueueConfig:
    """Rates of the matching queue.

    Parameters
    ----------
    arrival_rate : float
        Passenger arrivals per hour.
    service_rate : float
        Trips completed per hour by one busy driver.
    n_drivers : float
        Number of drivers. Real values are accepted because the incentive
        curves produce them; see :func:`idle_distribution` for how they are
        discretized.
    """

    arrival_rate: float
    service_rate: float
    n_drivers: float

    def __post_init__(self):
        for name in ("arrival_rate", "service_rate", "n_drivers"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.arrival_rate < 0:
            raise DomainError("arrival_rate must be >= 0")
        if self.service_rate <= 0:
            raise DomainError("service_rate must be > 0")
        if self.n_drivers <= 0:
            raise DomainError("n_drivers must be > 0")
        if self.occupancy >= 1:
            raise InstabilityError(
                f"unstable queue: rho={self.occupancy:.6g} >= 1")

    @property
    def offered_load(self) -> float:
        return self.arrival_rate / self.service_rate

    @property
    def occupancy(self) -> float:
        return self.arrival_rate / (self.n_drivers * self.service_rate)


@dataclass(frozen=True)
class IdleDistribution:
    """Stationary probabilities of the idle-driver count.

    ``probs[i]`` is the probability that exactly ``i`` drivers are idle,
    for ``i = 0..n``. ``log_pi0`` is the log-probability that every driver
    is idle (``probs[n]``), kept separately because it underflows for big
    fleets.
    """

    probs: np.ndarray
    rho: float
    log_pi0: float

    @property
    def n_drivers(self) -> int:
        return len(self.probs) - 1

    def mean_idle(self) -> float:
        return float(np.dot(np.arange(len(self.probs)), self.probs))


def _idle_log_weights(offered_load, n):
    """Unnormalized log-weights of idle counts ``0..n`` for an integer fleet."""
    idle = np.arange(n + 1)
    busy = n - idle
    lw = xlogy(busy, offered_load) - gammaln(busy + 1.0)
    # no idle driver: all n busy plus any number waiting (geometric tail)
    lw[0] -= math.log1p(-offered_load / n)
    return lw


def idle_distribution(cfg: QueueConfig) -> IdleDistribution:
    """Distribution of the number of idle drivers.

    With ``a = lambda/mu`` and ``n`` drivers the weights are
    ``a**(n-i) / (n-i)!`` for ``1 <= i <= n`` and
    ``a**n / (n! (1 - rho))`` for ``i = 0``; the all-idle probability
    follows from normalization. A real ``n_drivers`` is rounded to the
    nearest integer, and to one driver if it is smaller.

    Raises
    ------
    InstabilityError
        If the rounded fleet cannot serve the arrival rate.
    """
    n = max(1, int(round(cfg.n_drivers)))
    a = cfg.offered_load
    rho = a / n
    if rho >= 1:
        raise InstabilityError(f"unstable queue: rho={rho:.6g} >= 1 at n={n}")
    lw = _idle_log_weights(a, n)
    keep = lw >= lw.max() - LOG_WEIGHT_CUTOFF
    log_norm = logsumexp(lw[keep])
    probs = np.where(keep, np.exp(lw - log_norm), 0.0)
    probs /= probs.sum()
    return IdleDistribution(probs=probs, rho=rho, log_pi0=float(lw[n] - log_norm))


def _utilization_integer(offered_load, n, k_slots):
    """Slot utilization for an integer fleet; a saturated fleet has no idle drivers."""
    if n <= 0 or offered_load >= n:
        return 0.0
    lw = _idle_log_weights(offered_load, n)
    keep = lw >= lw.max() - LOG_WEIGHT_CUTOFF
    p = np.where(keep, np.exp(lw - lw.max()), 0.0)
    p /= p.sum()
    idle = np.arange(n + 1)
    return float(np.dot(p, np.minimum(1.0, idle / k_slots)))


def parking_utilization(cfg: QueueConfig, k_slots: float) -> float:
    """Expected fraction of ``k_slots`` parking slots held by idle drivers.

    Computes ``sum_i X_i * min(1, i/K)``. For ``K = 0`` the utilization is
    defined as 1, so that the parked count ``K * r`` is zero.

    For a non-integer fleet the result is interpolated linearly between the
    two neighbouring integer fleets. This keeps the map continuous in the
    driver count, which the equilibrium solver relies on, and preserves the
    identity ``E[idle] = N - lambda/mu``.
    """
    if not math.isfinite(k_slots) or k_slots < 0:
        raise DomainError("k_slots must be finite and >= 0")
    if k_slots == 0:
        return 1.0
    a = cfg.offered_load
    n_lo = math.floor(cfg.n_drivers)
    frac = cfg.n_drivers - n_lo
    r = (1.0 - frac) * _utilization_integer(a, n_lo, k_slots)
    if frac > 0:
        r += frac * _utilization_integer(a, n_lo + 1, k_slots)
    return min(1.0, max(0.0, r))


def waiting_time(n_idle: float, m_coeff: float) -> float:
    """Passenger waiting time in minutes, ``M / sqrt(n_idle)``."""
    if not (math.isfinite(n_idle) and math.isfinite(m_coeff)):
        raise DomainError("waiting_time inputs must be finite")
    if n_idle <= 0:
        raise DomainError("no idle capacity: n_idle must be > 0")
    return m_coeff / math.sqrt(n_idle)


def expected_idle(cfg: QueueConfig) -> float:
    """Mean number of idle drivers, ``N - lambda/mu``."""
    return cfg.n_drivers - cfg.offered_load


# ---------------------------------------------------------------------------
# batched evaluation used by the equilibrium solver


@lru_cache(maxsize=8)
def _log_factorial_table(size):
    return gammaln(np.arange(size, dtype=float) + 1.0)


def _window_halfwidth(a_max):
    # Poisson pmf ratio bound: log p(a+k)/p(a) <= -k^2 / (2(a+k)); solve for
    # a drop of 50 nats, a margin over LOG_WEIGHT_CUTOFF
    return int(math.ceil(50.0 + math.sqrt(2500.0 + 100.0 * max(a_max, 0.0)))) + 2


def _component(a, n, width):
    """Log-weights of one integer-fleet component over a window of busy counts.

    Returns ``(idle, logw)`` with shape ``(B, width + 1)``; the last column is
    the all-busy state. Saturated rows put all mass on zero idle drivers.
    """
    B = a.shape[0]
    stable = (n >= 1) & (a < n)
    center = np.clip(np.minimum(np.floor(a), n - 1), 0, None)
    j0 = np.maximum(np.minimum(center - (width - 1) // 2, n - width), 0).astype(np.int64)
    busy = j0[:, None] + np.arange(width)[None, :]
    table = _log_factorial_table(1 << int(max(busy.max(), n.max(), 1) + 1).bit_length())
    log_a = np.log(np.where(a > 0, a, 1.0))
    with np.errstate(invalid="ignore"):
        lw = np.where(a[:, None] > 0, busy * log_a[:, None], np.where(busy == 0, 0.0, -np.inf))
    lw = lw - table[busy]
    lw = np.where(busy <= n[:, None] - 1, lw, -np.inf)
    ni = n.astype(np.int64)
    safe_n = np.maximum(ni, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lw0 = (np.where(a > 0, ni * log_a, np.where(ni == 0, 0.0, -np.inf))
               - table[ni] - np.log1p(-np.where(stable, a / safe_n, 0.0)))
    lw = np.concatenate([lw, lw0[:, None]], axis=1)
    idle = np.concatenate([n[:, None] - busy, np.zeros((B, 1))], axis=1).astype(float)
    # saturated or empty fleet: no idle drivers
    lw = np.where(stable[:, None], lw, -np.inf)
    lw[~stable, -1] = 0.0
    return idle, lw


class IdleMixture:
    """Idle-count distributions for a batch of (offered load, fleet) pairs.

    Each row mixes the two neighbouring integer fleets with linear weights,
    matching :func:`parking_utilization`.
    """

    def __init__(self, offered_load, n_drivers):
        a = np.asarray(offered_load, dtype=float).ravel()
        N = np.asarray(n_drivers, dtype=float).ravel()
        n_lo = np.floor(N)
        frac = N - n_lo
        width = 2 * _window_halfwidth(float(a.max()) if a.size else 0.0) + 1
        width = int(min(width, n_lo.max() + 1 if N.size else 1))
        idle_lo, lw_lo = _component(a, n_lo, width)
        idle_hi, lw_hi = _component(a, n_lo + 1, width)
        probs = []
        for lw in (lw_lo, lw_hi):
            top = lw.max(axis=1, keepdims=True)
            p = np.where(lw >= top - LOG_WEIGHT_CUTOFF, np.exp(lw - top), 0.0)
            probs.append(p / p.sum(axis=1, keepdims=True))
        self.idle = np.concatenate([idle_lo, idle_hi], axis=1)
        self.probs = np.concatenate(
            [probs[0] * (1.0 - frac)[:, None], probs[1] * frac[:, None]], axis=1)

    def occupied(self, k_slots, rows=None):
        """Expected number of occupied slots, ``E[min(idle, K)]``.

        ``rows`` optionally restricts the evaluation to a subset of the batch.
        """
        idle, probs = (self.idle, self.probs) if rows is None else (self.idle[rows], self.probs[rows])
        K = np.broadcast_to(np.asarray(k_slots, dtype=float), (idle.shape[0],))
        return np.einsum("ij,ij->i", probs, np.minimum(idle, K[:, None]))

    def utilization(self, k_slots, rows=None):
        """Slot utilization ``r``, with ``r = 1`` where ``K = 0``."""
        n = self.idle.shape[0] if rows is None else len(rows)
        K = np.broadcast_to(np.asarray(k_slots, dtype=float), (n,))
        occ = self.occupied(K, rows)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(K > 0, occ / np.where(K > 0, K, 1.0), 1.0)
        return np.clip(r, 0.0, 1.0)

    def mean_idle(self):
        return np.einsum("ij,ij->i", self.probs, self.idle)
