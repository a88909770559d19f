"""Profit maximization over platform prices and the parking-supply sweep.

Two search spaces are used. :func:`maximize_profit` enumerates prices
directly, solving the market at every grid point. :func:`sweep_k` instead
searches over arrival rate and fleet size for each exogenous slot count:
given ``(lambda, N, K)`` the three market conditions can be inverted in
closed form for the prices that support that point, so no equilibrium
solve is needed inside the search. The winner is then re-solved forward
from its prices and certified, so every sweep row is an ordinary solver
output.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import incentives as inc
from .equilibrium import (DEFAULT_TOL, EquilibriumState, solve, solve_batch, solve_fixed_k,
                          solve_no_parking)
from .exceptions import DomainError, InfeasibleError, RideparkError
from .incentives import MarketParams, PlatformDecision
from .queueing import IdleMixture

# grid points per batch; fixed so results do not depend on the worker count
CHUNK = 1024


@dataclass(frozen=True)
class GridSpec:
    """Price grid for the enumerating optimizers.

    ``parking_bounds`` left as ``None`` means ``[0, cruise_cost]`` of the
    market being optimized.
    """

    fare_bounds: tuple = (5.0, 40.0)
    wage_bounds: tuple = (10.0, 45.0)
    parking_bounds: tuple | None = None
    fare_steps: int = 25
    wage_steps: int = 25
    parking_steps: int = 25
    refinement_rounds: int = 3
    shrink_factor: float = 0.25

    def __post_init__(self):
        named = [("fare_bounds", self.fare_bounds), ("wage_bounds", self.wage_bounds)]
        if self.parking_bounds is not None:
            named.append(("parking_bounds", self.parking_bounds))
        for name, b in named:
            if len(b) != 2:
                raise DomainError(f"{name} must be a (lower, upper) pair")
            lo, hi = (float(x) for x in b)
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise DomainError(f"{name} must be finite")
            if lo < 0 or not lo < hi:
                raise DomainError(f"{name} must satisfy 0 <= lower < upper, got {b}")
        for name in ("fare_steps", "wage_steps", "parking_steps"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 2:
                raise DomainError(f"{name} must be an integer >= 2")
        if int(self.refinement_rounds) != self.refinement_rounds or self.refinement_rounds < 0:
            raise DomainError("refinement_rounds must be a non-negative integer")
        if not 0 < self.shrink_factor < 1:
            raise DomainError("shrink_factor must lie in (0, 1)")

    def parking_range(self, params: MarketParams) -> tuple:
        if self.parking_bounds is None:
            return (0.0, params.cruise_cost)
        return tuple(float(x) for x in self.parking_bounds)


@dataclass(frozen=True)
class ProfitOptimum:
    """Outcome of a price search.

    ``round_best`` holds the best grid profit after each round (the first
    entry is the coarse grid); ``n_evaluated`` counts market solves.
    """

    decision: PlatformDecision
    state: EquilibriumState
    round_best: tuple
    n_evaluated: int


def _map_chunks(fn, points, n_jobs):
    chunks = [points[i:i + CHUNK] for i in range(0, len(points), CHUNK)]
    if n_jobs > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(fn, chunks))
    else:
        parts = [fn(c) for c in chunks]
    return np.concatenate(parts)


def _best_index(profit, points):
    """Index of the largest profit; ties go to the lexicographically smallest point."""
    top = np.max(profit)
    tied = np.flatnonzero(profit == top)
    if len(tied) == 1:
        return int(tied[0])
    keys = tuple(points[tied, j] for j in reversed(range(points.shape[1])))
    return int(tied[np.lexsort(keys)[0]])


def _box_grid(lo, hi, steps):
    axes = [np.linspace(a, b, s) for a, b, s in zip(lo, hi, steps)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _refine_search(evaluate, lo, hi, steps, rounds, shrink, n_jobs=1, until=None,
                   polish_steps=9, max_polish=80):
    """Shrink-around-incumbent grid search maximizing ``evaluate``.

    ``evaluate`` maps an ``(P, d)`` array of points to profits, ``-inf``
    marking infeasible points. After ``rounds`` refinements, if ``until``
    (per-axis absolute widths) is given the box keeps halving on a small
    grid until it is narrower than that.

    Returns ``(best_point, best_profit, round_best, n_evaluated)``.
    """
    lo0, hi0 = np.asarray(lo, float), np.asarray(hi, float)
    lo_c, hi_c = lo0.copy(), hi0.copy()
    best_x, best_f = None, -np.inf
    round_best, n_eval = [], 0
    k = 0
    while True:
        polishing = k > rounds
        pts = _box_grid(lo_c, hi_c, [polish_steps] * len(lo0) if polishing else steps)
        f = _map_chunks(evaluate, pts, n_jobs)
        n_eval += len(pts)
        if np.any(np.isfinite(f)):
            i = _best_index(f, pts)
            cand_better = f[i] > best_f or (
                f[i] == best_f and tuple(pts[i]) < tuple(best_x))
            if best_x is None or cand_better:
                best_x, best_f = pts[i], float(f[i])
        round_best.append(best_f)
        if best_x is None:
            break
        width = (hi_c - lo_c) * (0.5 if k >= rounds else shrink)
        k += 1
        if k > rounds and (until is None or np.all(hi_c - lo_c <= until) or k > rounds + max_polish):
            break
        # recentre on the incumbent, sliding the box back inside the original bounds
        lo_c = np.clip(best_x - width / 2, lo0, hi0 - width)
        hi_c = lo_c + width
    return best_x, best_f, tuple(round_best[:rounds + 1]), n_eval


def _empty_market(decision: PlatformDecision) -> EquilibriumState:
    # nobody rides and nobody drives
    return EquilibriumState(
        decision=decision, arrival_rate=0.0, n_drivers=0.0, n_idle=0.0, k_slots=0.0,
        utilization=1.0, waiting_time=math.inf, travel_cost=math.inf,
        net_wage=decision.gross_wage, n_parked=0.0, n_onroad=0.0, parked_ratio=0.0,
        profit=0.0, residuals=(0.0, 0.0, 0.0))


def _price_evaluator(params, mode):
    def evaluate(pts):
        pg = pts[:, 2] if pts.shape[1] == 3 else 0.0
        sol = solve_batch(params, pts[:, 0], pts[:, 1], pg, mode=mode)
        return np.where(sol["ok"], sol["profit"], -np.inf)
    return evaluate


def _price_search(params, grid, tol, n_jobs, with_parking):
    if grid is None:
        grid = GridSpec()
    bounds = [grid.fare_bounds, grid.wage_bounds]
    steps = [grid.fare_steps, grid.wage_steps]
    if with_parking:
        bounds.append(grid.parking_range(params))
        steps.append(grid.parking_steps)
    lo = [b[0] for b in bounds]
    hi = [b[1] for b in bounds]
    if params.lambda0 == 0:
        decision = PlatformDecision(*lo) if with_parking else PlatformDecision(lo[0], lo[1])
        return ProfitOptimum(decision, _empty_market(decision), (0.0,), 0)
    x, f, round_best, n_eval = _refine_search(
        _price_evaluator(params, "full" if with_parking else "none"), lo, hi, steps,
        grid.refinement_rounds, grid.shrink_factor, n_jobs)
    if x is None:
        raise InfeasibleError("every grid point is infeasible")
    decision = PlatformDecision(*(float(v) for v in x))
    if with_parking:
        state = solve(decision, params, tol, check_multiplicity=False)
    else:
        state = solve_no_parking(decision, params, tol)
    return ProfitOptimum(decision, state, round_best, n_eval)


def maximize_profit(params: MarketParams, grid: GridSpec | None = None,
                    tol: float = DEFAULT_TOL, n_jobs: int = 1) -> ProfitOptimum:
    """Best ``(p_f, w_g, p_g)`` on a refined price grid, parking slots endogenous.

    Every grid point is a full equilibrium solve; points without an
    admissible equilibrium are skipped. Each refinement round lays a grid
    of the same size over a box ``shrink_factor`` times smaller, centred on
    the incumbent and kept inside the original bounds. The incumbent is
    never discarded, so the result dominates every point evaluated.

    With ``lambda0 == 0`` there is no market; the lowest prices are returned
    with an empty state of zero profit.

    Raises
    ------
    InfeasibleError
        If no grid point admits an equilibrium.
    """
    return _price_search(params, grid, tol, n_jobs, with_parking=True)


def maximize_profit_no_parking(params: MarketParams, grid: GridSpec | None = None,
                               tol: float = DEFAULT_TOL, n_jobs: int = 1) -> ProfitOptimum:
    """Best ``(p_f, w_g)`` without parking service; see :func:`maximize_profit`."""
    return _price_search(params, grid, tol, n_jobs, with_parking=False)


# ---------------------------------------------------------------------------
# K sweep


def implied_prices(arrival_rate, n_drivers, k_slots, params: MarketParams):
    """Prices under which ``(arrival_rate, n_drivers)`` is an equilibrium with ``k_slots``.

    The parking rate is the one that draws exactly ``k_slots`` slots.
    Returns ``(p_f, w_g, p_g, valid)``; ``valid`` is False where the point
    lies outside the admissible region (no idle drivers, or outside the
    potential pools), and the prices there are meaningless.
    """
    lam = np.asarray(arrival_rate, dtype=float)
    N = np.asarray(n_drivers, dtype=float)
    lam, N = np.broadcast_arrays(lam, N)
    idle = N - lam / params.mu
    valid = (lam > 0) & (lam < params.lambda0) & (N > 0) & (N < params.n0) & (idle > 0)
    lam_s = np.where(valid, lam, 0.5 * params.lambda0)
    N_s = np.where(valid, N, 0.5 * params.n0)
    idle_s = np.where(valid, idle, 1.0)
    p_f = inc.inverse_demand(lam_s, params) - params.alpha * params.m_coeff / np.sqrt(idle_s)
    w_n = inc.inverse_driver_supply(N_s, params)
    if k_slots > 0:
        r = IdleMixture(lam_s / params.mu, N_s).utilization(k_slots).reshape(lam_s.shape)
        earning = float(inc.inverse_garage_supply(k_slots, params))
        with np.errstate(divide="ignore"):
            p_g = earning / r
        w_g = w_n - (params.cruise_cost * r - earning) * k_slots / N_s
        valid = valid & (r > 0)
    else:
        p_g = np.zeros_like(lam_s)
        w_g = w_n
    return p_f, w_g, p_g, valid


@dataclass(frozen=True)
class SweepRow:
    """One slot count of a sweep.

    ``state`` is the forward-solved equilibrium at the row's best prices, or
    ``None`` if the row failed (``error`` says why). ``search_gap`` is the
    relative distance between the searched and re-solved ``(lambda, N)``.
    """

    k_slots: float
    state: EquilibriumState | None
    error: str | None = None
    search_gap: float = 0.0

    @property
    def ok(self) -> bool:
        return self.state is not None and self.error is None


CSV_COLUMNS = ("K", "r", "parked_ratio", "lambda_per_min", "N", "N_onroad", "t_w_min", "c",
               "w_g", "w_n", "p_f", "p_d", "p_g", "profit_per_hour", "residual_max")


def _row_values(row: SweepRow):
    s = row.state
    if s is None:
        return (row.k_slots,) + (math.nan,) * (len(CSV_COLUMNS) - 1)
    d = s.decision
    return (s.k_slots, s.utilization, s.parked_ratio, s.arrival_rate_per_min, s.n_drivers,
            s.n_onroad, s.waiting_time, s.travel_cost, d.gross_wage, s.net_wage, d.ride_fare,
            s.per_trip_payment, d.parking_rate, s.profit, s.max_residual)


@dataclass(frozen=True)
class SweepTable:
    """Sweep rows in ascending order of slot count."""

    rows: tuple
    tol: float = DEFAULT_TOL

    def __len__(self):
        return len(self.rows)

    @property
    def k_slots(self) -> np.ndarray:
        return np.array([r.k_slots for r in self.rows])

    def column(self, name: str) -> np.ndarray:
        j = CSV_COLUMNS.index(name)
        return np.array([_row_values(r)[j] for r in self.rows])

    def write_csv(self, fh) -> None:
        """Write the table as CSV; floats use their shortest round-trip form."""
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in self.rows:
            fh.write(",".join(repr(float(v)) for v in _row_values(row)) + "\n")

    def to_csv(self) -> str:
        import io
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _quantity_box(params, k_slots, grid):
    """Ranges of ``(lambda, N)`` reachable with prices inside the grid box."""
    pf = np.array(grid.fare_bounds, float)[[0, 0, 1, 1]]
    wg = np.array(grid.wage_bounds, float)[[0, 1, 0, 1]]
    mode = "derived" if k_slots > 0 else "none"
    sol = solve_batch(params, pf, wg, k_slots=k_slots, mode=mode)
    ok = sol["ok"]
    tiny = 1e-9
    lam_rng = [tiny * params.lambda0, (1 - tiny) * params.lambda0]
    n_rng = [tiny * params.n0, (1 - tiny) * params.n0]
    # demand falls with the fare and rises with the wage; the fleet rises with both
    if ok[1]:
        lam_rng[1] = min(lam_rng[1], 1.02 * sol["arrival_rate"][1])
    if ok[2]:
        lam_rng[0] = 0.98 * sol["arrival_rate"][2]
    if ok[0]:
        n_rng[0] = 0.98 * sol["n_drivers"][0]
    if ok[3]:
        n_rng[1] = min(n_rng[1], 1.02 * sol["n_drivers"][3])
    return [lam_rng[0], n_rng[0]], [lam_rng[1], n_rng[1]]


def _sweep_row(params, k_slots, grid, tol):
    f_lo, f_hi = grid.fare_bounds
    w_lo, w_hi = grid.wage_bounds

    def evaluate(pts):
        lam, N = pts[:, 0], pts[:, 1]
        p_f, w_g, _, valid = implied_prices(lam, N, k_slots, params)
        inside = valid & (p_f >= f_lo) & (p_f <= f_hi) & (w_g >= w_lo) & (w_g <= w_hi)
        return np.where(inside, lam * p_f - w_g * N, -np.inf)

    try:
        if k_slots >= params.k0:
            raise InfeasibleError("K = k0 needs an unbounded parking earning")
        lo, hi = _quantity_box(params, k_slots, grid)
        until = 1e-11 * np.maximum(np.abs(np.asarray(hi)), 1.0)
        x, _, _, _ = _refine_search(evaluate, lo, hi, [grid.fare_steps, grid.wage_steps],
                                    grid.refinement_rounds, grid.shrink_factor, until=until)
        if x is None:
            raise InfeasibleError("no admissible (lambda, N) inside the price bounds")
        p_f, w_g, _, _ = implied_prices(x[0], x[1], k_slots, params)
        decision = PlatformDecision(float(p_f), float(w_g))
        state = solve_fixed_k(decision, float(k_slots), params, tol, derive_parking_rate=True)
    except RideparkError as exc:
        return SweepRow(float(k_slots), None, f"{type(exc).__name__}: {exc}")
    gap = max(abs(state.arrival_rate - x[0]) / x[0], abs(state.n_drivers - x[1]) / x[1])
    error = None
    if gap > 1e-6:
        error = f"forward solve reached a different equilibrium (gap {gap:.3g})"
    return SweepRow(float(k_slots), state, error, float(gap))


def sweep_k(params: MarketParams, k_grid, grid: GridSpec | None = None,
            tol: float = DEFAULT_TOL, n_jobs: int = 1) -> SweepTable:
    """Profit-maximizing market for each slot count in ``k_grid``.

    For every ``K`` the fare and wage are optimized with ``K`` held fixed
    and the parking rate set so that exactly ``K`` slots are offered. The
    search runs over ``(lambda, N)``: a grid refined like
    :func:`maximize_profit`, followed by halving rounds until the box is
    negligibly small, with supporting prices restricted to the bounds of
    ``grid``. The optimum is then re-solved forward and certified.

    Rows are independent; a failing row is recorded with its error and the
    sweep moves on. ``n_jobs`` threads share the rows without affecting
    the output.
    """
    if grid is None:
        grid = GridSpec()
    k = np.asarray(k_grid, dtype=float).ravel()
    if k.size == 0:
        raise DomainError("k_grid is empty")
    if not np.all(np.isfinite(k)) or np.any(k < 0) or np.any(k > params.k0):
        raise DomainError("k_grid values must lie in [0, k0]")
    if np.any(np.diff(k) < 0):
        raise DomainError("k_grid must be sorted ascending")

    def work(K):
        return _sweep_row(params, K, grid, tol)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(work, k))
    else:
        rows = [work(K) for K in k]
    return SweepTable(tuple(rows), tol)


# ---------------------------------------------------------------------------
# regimes


@dataclass(frozen=True)
class RegimeReport:
    """Regime boundaries of a sweep and the checks made on them.

    ``k1`` ends the plateau that matches the no-parking market, ``k2``
    starts the plateau that matches the largest slot count, ``k_star`` is
    the profit-maximizing row. ``checks`` maps each comparison of the
    optimum with the no-parking row to whether it held; ``changes`` holds
    the relative change of headline quantities between those two rows.
    """

    k1: float
    k2: float
    k_star: float
    plateau_tol: float
    checks: dict
    changes: dict
    summaries: tuple
    violations: tuple = field(default_factory=tuple)

    @property
    def holds(self) -> bool:
        return not self.violations

    def to_text(self) -> str:
        lines = [f"k1 {self.k1:.6g}", f"k2 {self.k2:.6g}", f"k_star {self.k_star:.6g}",
                 f"plateau_tol {self.plateau_tol:.3g}"]
        for s in self.summaries:
            lines.append(f"regime {s['name']} K=[{s['k_min']:.6g}, {s['k_max']:.6g}] rows={s['rows']} "
                         f"mean_r={s['mean_r']:.6g} mean_parked_ratio={s['mean_parked_ratio']:.6g}")
        for name, value in self.changes.items():
            lines.append(f"change {name} {100 * value:+.3f}%")
        for name, ok in self.checks.items():
            lines.append(f"check {name} {'pass' if ok else 'FAIL'}")
        lines.append("status " + ("ok" if self.holds else "violations: " + "; ".join(self.violations)))
        return "\n".join(lines) + "\n"


def _close(a, b, tol):
    return abs(a - b) <= tol * max(abs(b), 1e-300)


def detect_regimes(table: SweepTable, plateau_tol: float = 1e-3) -> RegimeReport:
    """Locate the three regimes of a sweep and test the optimum against ``K = 0``.

    The first row is taken as the no-parking reference; for the strict
    comparisons to mean what they say it should be ``K = 0``.

    Raises
    ------
    DomainError
        If the table has fewer than 10 rows or ``plateau_tol`` is not positive.
    ConvergenceError
        If a row failed or its residual certificate exceeds the table tolerance.
    """
    from .exceptions import ConvergenceError

    if len(table) < 10:
        raise DomainError("regime detection needs at least 10 rows")
    if not plateau_tol > 0:
        raise DomainError("plateau_tol must be > 0")
    for row in table.rows:
        if not row.ok or not row.state.certified(table.tol):
            raise ConvergenceError(f"row K={row.k_slots} is not certified: {row.error}")
    st = [r.state for r in table.rows]
    K = table.k_slots
    first, last = st[0], st[-1]

    def near(s, ref):
        return (_close(s.arrival_rate, ref.arrival_rate, plateau_tol)
                and _close(s.n_drivers, ref.n_drivers, plateau_tol))

    i1 = 0
    while i1 + 1 < len(st) and near(st[i1 + 1], first):
        i1 += 1
    i2 = len(st) - 1
    while i2 - 1 >= 0 and near(st[i2 - 1], last):
        i2 -= 1
    profits = np.array([s.profit for s in st])
    i_star = int(np.argmax(profits))
    opt = st[i_star]

    checks = {
        "arrivals_up": opt.arrival_rate > first.arrival_rate,
        "travel_cost_down": opt.travel_cost < first.travel_cost,
        "drivers_up": opt.n_drivers > first.n_drivers,
        "net_wage_up": opt.net_wage > first.net_wage,
        "profit_up": opt.profit > first.profit,
    }
    changes = {
        "arrivals": opt.arrival_rate / first.arrival_rate - 1,
        "drivers": opt.n_drivers / first.n_drivers - 1,
        "onroad": opt.n_onroad / first.n_onroad - 1,
        "net_wage": opt.net_wage / first.net_wage - 1,
        "profit": opt.profit / first.profit - 1 if first.profit != 0 else math.nan,
    }
    violations = [f"{name} fails at k_star" for name, ok in checks.items() if not ok]
    if not K[i1] <= K[i_star] <= K[i2]:
        violations.append("k_star lies outside [k1, k2]")

    def summary(name, a, b):
        part = st[a:b + 1]
        return dict(name=name, k_min=float(K[a]), k_max=float(K[b]), rows=len(part),
                    mean_r=float(np.mean([s.utilization for s in part])),
                    mean_parked_ratio=float(np.mean([s.parked_ratio for s in part])))

    summaries = [summary("full_occupancy", 0, i1)]
    if i2 > i1 + 1:
        summaries.append(summary("transition", i1 + 1, i2 - 1))
    if i2 > i1:
        summaries.append(summary("over_provision", i2, len(st) - 1))
    return RegimeReport(k1=float(K[i1]), k2=float(K[i2]), k_star=float(K[i_star]),
                        plateau_tol=plateau_tol, checks=checks, changes=changes,
                        summaries=tuple(summaries), violations=tuple(violations))
