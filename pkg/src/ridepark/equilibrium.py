"""Market equilibrium for given platform prices.

Three coupled conditions pin down the market at prices ``(p_f, w_g, p_g)``::

    lambda = F_p(alpha * t_w(N - lambda/mu) + p_f)       passengers
    N      = F_d(w_g + (l - p_g) K r(lambda, N, K) / N)   drivers
    K      = F_g(p_g r(lambda, N, K))                    garages

They are solved by nested bracketing: the arrival rate given the fleet (the
passenger map involves only ``lambda`` and ``N``), the slot count given
``(lambda, N)`` (monotone in ``K``), and the fleet size outermost. All
brackets are guaranteed, so no damping or starting point is needed.

The same engine runs in four modes, vectorized over arrays of prices:

``none``     no parking service, ``K = 0``
``fixed``    ``K`` and ``p_g`` exogenous; garage condition only reported
``derived``  ``K`` exogenous, ``p_g`` set so the garage condition holds
``full``     ``p_g`` exogenous, ``K`` endogenous
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import incentives as inc
from ._roots import bracket_root
from .exceptions import ConvergenceError, InfeasibleError, MultipleEquilibriaWarning
from .incentives import MarketParams, PlatformDecision
from .queueing import IdleMixture, QueueConfig, parking_utilization, waiting_time

DEFAULT_TOL = 1e-8

MODES = ("none", "fixed", "derived", "full")

# fractions of N0 probed when the lower fleet bracket must be searched
_LADDER = np.array([1e-9, 1e-4, 1e-3, 3e-3, 0.01, 0.03, 0.06, 0.1, 0.15, 0.2,
                    0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])


@dataclass(frozen=True)
class EquilibriumState:
    """A solved market point.

    Rates are per hour; ``waiting_time`` is in minutes. ``residuals`` are
    the relative violations of the passenger, driver and garage conditions,
    re-evaluated independently of the solver; ``enforced`` says which of the
    three the solve was asked to satisfy.
    """

    decision: PlatformDecision
    arrival_rate: float
    n_drivers: float
    n_idle: float
    k_slots: float
    utilization: float
    waiting_time: float
    travel_cost: float
    net_wage: float
    n_parked: float
    n_onroad: float
    parked_ratio: float
    profit: float
    residuals: tuple
    enforced: tuple = (True, True, True)

    @property
    def arrival_rate_per_min(self) -> float:
        return self.arrival_rate / inc.MINUTES_PER_HOUR

    @property
    def per_trip_payment(self) -> float:
        """Driver payment per delivered trip, ``w_g N / lambda``."""
        if self.arrival_rate <= 0:
            return math.inf
        return self.decision.gross_wage * self.n_drivers / self.arrival_rate

    @property
    def max_residual(self) -> float:
        return max(abs(r) for r, e in zip(self.residuals, self.enforced) if e)

    def certified(self, tol: float = DEFAULT_TOL) -> bool:
        return self.max_residual <= tol


def _rel(x, target):
    return (x - target) / max(abs(x), 1.0)


def constraint_residuals(params: MarketParams, decision: PlatformDecision,
                         arrival_rate, n_drivers, k_slots):
    """Relative residuals of the three market conditions at a given point.

    Evaluated with the scalar model functions only, as an independent check
    on the solver.
    """
    lam, N, K = float(arrival_rate), float(n_drivers), float(k_slots)
    t_w = waiting_time(N - lam / params.mu, params.m_coeff)
    c = inc.travel_cost(t_w, decision.ride_fare, params.alpha)
    r = parking_utilization(QueueConfig(lam, params.mu, N), K)
    w_n = inc.net_wage(decision, K, r, N, params.cruise_cost)
    return (
        _rel(lam, float(inc.passenger_demand(c, params))),
        _rel(N, float(inc.driver_supply(w_n, params))),
        _rel(K, float(inc.garage_supply(decision.parking_rate * r, params))),
    )


# ---------------------------------------------------------------------------
# vectorized engine


def demand_root(n_drivers, ride_fare, params: MarketParams):
    """Arrival rate clearing the passenger condition for each fleet size."""
    N = np.asarray(n_drivers, dtype=float)
    shape = N.shape
    N = N.ravel()
    p_f = np.broadcast_to(np.asarray(ride_fare, dtype=float), shape).ravel()
    if params.lambda0 == 0:
        return np.zeros(shape)
    hi = np.minimum(params.lambda0, params.mu * N)

    def g(lam, idx):
        idle = N[idx] - lam / params.mu
        with np.errstate(divide="ignore", invalid="ignore"):
            t_w = np.where(idle > 0, params.m_coeff / np.sqrt(np.where(idle > 0, idle, 1.0)), np.inf)
        return lam - inc.passenger_demand(params.alpha * t_w + p_f[idx], params)

    lam, _ = bracket_root(g, np.zeros_like(N), hi, rtol=1e-15, xtol=1e-12)
    return lam.reshape(shape)


def _k_root(mix: IdleMixture, parking_rate, params: MarketParams):
    """Slot count clearing the garage condition for fixed (lambda, N)."""
    p_g = parking_rate

    def phi(K, idx):
        return K - inc.garage_supply(p_g[idx] * mix.utilization(K, rows=idx), params)

    K, _ = bracket_root(phi, np.zeros_like(p_g), np.full(p_g.shape, params.k0),
                        rtol=1e-15, xtol=1e-12)
    return np.where(p_g > 0, K, 0.0)


def _fleet_map(N, p_f, w_g, p_g, k_slots, mode, params):
    """Evaluate everything implied by a trial fleet size ``N``.

    Returns the fleet residual ``N - F_d(w_n)`` and the implied state arrays.
    """
    lam = demand_root(N, p_f, params)
    mix = IdleMixture(lam / params.mu, N)
    if mode == "full":
        K = _k_root(mix, p_g, params)
    else:
        K = k_slots
    r = mix.utilization(K)
    l = params.cruise_cost
    if mode == "derived":
        earning = inc.inverse_garage_supply(K, params)
        savings = l * K * r - earning * K
        with np.errstate(divide="ignore", invalid="ignore"):
            p_g = np.where(K > 0, earning / r, 0.0)
    else:
        savings = (l - p_g) * K * r
    w_n = w_g + savings / N
    h = N - inc.driver_supply(w_n, params)
    return h, dict(arrival_rate=lam, n_drivers=N, k_slots=np.broadcast_to(K, N.shape).copy(),
                   utilization=r, net_wage=w_n, parking_rate=np.broadcast_to(p_g, N.shape).copy())


def solve_batch(params: MarketParams, ride_fare, gross_wage, parking_rate=0.0,
                k_slots=0.0, mode="full", ladder=None):
    """Solve many price points at once.

    Parameters
    ----------
    ride_fare, gross_wage, parking_rate, k_slots : array_like
        Broadcast together. ``parking_rate`` is ignored in ``derived`` mode
        and ``k_slots`` in ``full`` mode.
    mode : {"none", "fixed", "derived", "full"}
    ladder : bool, optional
        Search the lower fleet bracket on a ladder of trial sizes and keep
        the largest stable root. Defaults to True only in ``derived`` mode,
        where a spurious small-fleet root exists.

    Returns
    -------
    dict of ndarray
        ``arrival_rate``, ``n_drivers``, ``k_slots``, ``utilization``,
        ``net_wage``, ``parking_rate``, ``profit`` and a boolean ``ok``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    p_f, w_g, p_g, K = (np.array(x, dtype=float) for x in np.broadcast_arrays(
        ride_fare, gross_wage, parking_rate, k_slots))
    shape = p_f.shape
    p_f, w_g, p_g, K = (x.ravel() for x in (p_f, w_g, p_g, K))
    B = p_f.size
    N0 = params.n0

    if mode == "none":
        N = inc.driver_supply(w_g, params) * np.ones(B)
        lam = demand_root(N, p_f, params)
        out = dict(arrival_rate=lam, n_drivers=N, k_slots=np.zeros(B), utilization=np.ones(B),
                   net_wage=w_g.copy(), parking_rate=np.zeros(B))
        ok = (N > 0) & (N - lam / params.mu > 0)
    else:
        def h(Ntrial, idx=slice(None)):
            return _fleet_map(Ntrial, p_f[idx], w_g[idx], p_g[idx], K[idx], mode, params)[0]

        if ladder is None:
            ladder = mode == "derived"
        hi = np.full(B, float(N0))
        found = h(hi) >= 0
        if ladder:
            L = len(_LADDER)
            trial = (_LADDER[None, :] * N0) * np.ones((B, 1))
            rep = np.repeat(np.arange(B), L)
            nonpos = h(trial.ravel(), rep).reshape(B, L) <= 0
            top = L - 1 - np.argmax(nonpos[:, ::-1], axis=1)
            lo = trial[np.arange(B), top]
            upper_is_n0 = top == L - 1
            found = nonpos.any(axis=1) & (found | ~upper_is_n0)
            hi = np.where(upper_is_n0, hi, trial[np.arange(B), np.minimum(top + 1, L - 1)])
        else:
            lo = np.full(B, _LADDER[0] * N0)
            found &= h(lo) <= 0
        # only bracketed rows are solved; the rest keep a placeholder and are flagged
        N = lo.copy()
        conv = np.zeros(B, dtype=bool)
        sel = np.flatnonzero(found)
        if sel.size:
            N[sel], conv[sel] = bracket_root(lambda x, i: h(x, sel[i]), lo[sel], hi[sel],
                                             rtol=1e-14, xtol=1e-12)
            N = np.where(np.isfinite(N), N, lo)
        _, out = _fleet_map(N, p_f, w_g, p_g, K, mode, params)
        lam = out["arrival_rate"]
        ok = found & conv & (N - lam / params.mu > 0) & np.isfinite(out["parking_rate"])

    out["profit"] = out["arrival_rate"] * p_f - w_g * out["n_drivers"]
    out["ok"] = ok
    return {k: v.reshape(shape) for k, v in out.items()}


def _count_roots(params, decision, k_slots, mode, n_points=96):
    """Count sign changes of the fleet residual on a fine logit-spaced grid."""
    z = np.linspace(-12.0, 12.0, n_points)
    N = params.n0 / (1.0 + np.exp(-z))
    p_f = np.full(n_points, decision.ride_fare)
    h, _ = _fleet_map(N, p_f, np.full(n_points, decision.gross_wage),
                      np.full(n_points, decision.parking_rate), np.full(n_points, float(k_slots)),
                      mode, params)
    s = np.sign(h)
    up = np.flatnonzero((s[:-1] < 0) & (s[1:] >= 0))
    return len(up), N[up]


def _state_from(params, decision, sol, enforced, tol):
    lam = float(sol["arrival_rate"])
    N = float(sol["n_drivers"])
    K = float(sol["k_slots"])
    if not bool(sol["ok"]):
        raise InfeasibleError(
            f"no admissible equilibrium for p_f={decision.ride_fare}, w_g={decision.gross_wage}, "
            f"p_g={decision.parking_rate}")
    n_idle = N - lam / params.mu
    t_w = waiting_time(n_idle, params.m_coeff)
    r = 1.0 if K == 0 else parking_utilization(QueueConfig(lam, params.mu, N), K)
    residuals = constraint_residuals(params, decision, lam, N, K)
    worst = max(abs(x) for x, e in zip(residuals, enforced) if e)
    if not worst <= tol:
        raise ConvergenceError(f"residuals {residuals} exceed tol={tol}", residuals=residuals)
    parked = K * r
    state = EquilibriumState(
        decision=decision,
        arrival_rate=lam,
        n_drivers=N,
        n_idle=n_idle,
        k_slots=K,
        utilization=r,
        waiting_time=t_w,
        travel_cost=inc.travel_cost(t_w, decision.ride_fare, params.alpha),
        net_wage=float(inc.net_wage(decision, K, r, N, params.cruise_cost)),
        n_parked=parked,
        n_onroad=N - parked,
        parked_ratio=parked / n_idle,
        profit=lam * decision.ride_fare - decision.gross_wage * N,
        residuals=tuple(float(x) for x in residuals),
        enforced=tuple(enforced),
    )
    return state


def _scalar(sol):
    return {k: v.item() if isinstance(v, np.ndarray) else v for k, v in sol.items()}


def solve(decision: PlatformDecision, params: MarketParams, tol: float = DEFAULT_TOL,
          check_multiplicity: bool = True) -> EquilibriumState:
    """Equilibrium with all three conditions enforced.

    The slot count ``K`` is endogenous. When ``check_multiplicity`` is set
    the fleet residual is scanned for further stable roots; if one is found
    a :class:`MultipleEquilibriaWarning` is issued and the largest-fleet
    root is returned.

    Raises
    ------
    InfeasibleError
        No admissible fleet size brackets a root.
    ConvergenceError
        The independent residual check exceeds ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    sol = _scalar(solve_batch(params, decision.ride_fare, decision.gross_wage,
                              decision.parking_rate, mode="full", ladder=True))
    if check_multiplicity:
        count, where = _count_roots(params, decision, 0.0, "full")
        if count > 1:
            warnings.warn(f"{count} stable equilibria near N={np.round(where, 3).tolist()}; "
                          f"returning N={sol['n_drivers']:.6g}", MultipleEquilibriaWarning,
                          stacklevel=2)
    return _state_from(params, decision, sol, (True, True, True), tol)


def solve_fixed_k(decision: PlatformDecision, k_slots: float, params: MarketParams,
                  tol: float = DEFAULT_TOL, derive_parking_rate: bool = False) -> EquilibriumState:
    """Equilibrium with the slot count held at ``k_slots``.

    By default the decision's parking rate is used and the garage condition
    is only reported. With ``derive_parking_rate`` the parking rate is
    instead chosen so the garage condition also holds, and the returned
    state's decision carries that rate.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if not (math.isfinite(k_slots) and k_slots >= 0):
        raise ValueError("k_slots must be finite and >= 0")
    if k_slots == 0:
        return solve_no_parking(decision, params, tol)
    mode = "derived" if derive_parking_rate else "fixed"
    sol = _scalar(solve_batch(params, decision.ride_fare, decision.gross_wage,
                              decision.parking_rate, k_slots, mode=mode))
    if derive_parking_rate:
        if not math.isfinite(sol["parking_rate"]):
            raise InfeasibleError("no idle drivers: parking rate is unbounded")
        decision = PlatformDecision(decision.ride_fare, decision.gross_wage, sol["parking_rate"])
        enforced = (True, True, True)
    else:
        enforced = (True, True, False)
    return _state_from(params, decision, sol, enforced, tol)


def solve_no_parking(decision: PlatformDecision, params: MarketParams,
                     tol: float = DEFAULT_TOL) -> EquilibriumState:
    """Equilibrium without parking service: ``K = 0`` and ``N = F_d(w_g)``."""
    if tol <= 0:
        raise ValueError("tol must be > 0")
    sol = _scalar(solve_batch(params, decision.ride_fare, decision.gross_wage, mode="none"))
    decision = PlatformDecision(decision.ride_fare, decision.gross_wage, 0.0)
    return _state_from(params, decision, sol, (True, True, True), tol)
