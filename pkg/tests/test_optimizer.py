import math

import numpy as np
import pytest

import oracles
from ridepark import (CSV_COLUMNS, ConvergenceError, DomainError, GridSpec, MarketParams,
                      PlatformDecision, SweepRow, SweepTable, detect_regimes, implied_prices,
                      maximize_profit, maximize_profit_no_parking, solve_batch, solve_fixed_k,
                      solve_no_parking, sweep_k)
from ridepark.optimizer import _best_index
from shared import sf_sweep

TOY_GRID = GridSpec(fare_steps=20, wage_steps=20, parking_steps=20, refinement_rounds=3)
TOY_K = np.linspace(0, 19, 21)


@pytest.fixture(scope="module")
def toy_optimum(toy):
    return maximize_profit(toy, TOY_GRID)


@pytest.fixture(scope="module")
def toy_oracle(toy_dict):
    return oracles.enumerate_profit(toy_dict, (5, 40), (10, 45), (0, 8))


@pytest.fixture(scope="module")
def toy_sweep(toy):
    return sweep_k(toy, TOY_K)


@pytest.mark.parametrize("kwargs", [
    dict(fare_bounds=(10, 5)),
    dict(wage_bounds=(-1, 5)),
    dict(parking_bounds=(0, math.inf)),
    dict(fare_bounds=(1, 2, 3)),
    dict(fare_steps=1),
    dict(wage_steps=2.5),
    dict(refinement_rounds=-1),
    dict(shrink_factor=1.0),
    dict(shrink_factor=0.0),
])
def test_gridspec_validation(kwargs):
    with pytest.raises(DomainError):
        GridSpec(**kwargs)


def test_toy_optimum_matches_enumeration(toy_optimum, toy_oracle):
    profit, prices, _ = toy_oracle
    cell = [(40 - 5) / 199, (45 - 10) / 199, 8 / 199]
    d = toy_optimum.decision
    for got, ref, h in zip((d.ride_fare, d.gross_wage, d.parking_rate), prices, cell):
        assert abs(got - ref) <= h
    assert toy_optimum.state.profit == pytest.approx(profit, rel=1e-3)
    assert toy_optimum.state.certified()


def test_toy_optimum_dominates_coarse_grid(toy, toy_optimum):
    axes = [np.linspace(5, 40, 20), np.linspace(10, 45, 20), np.linspace(0, 8, 20)]
    pf, wg, pg = (x.ravel() for x in np.meshgrid(*axes, indexing="ij"))
    sol = solve_batch(toy, pf, wg, pg, mode="full")
    coarse = np.max(np.where(sol["ok"], sol["profit"], -np.inf))
    assert toy_optimum.state.profit >= coarse - 1e-9 * abs(coarse)
    rb = np.array(toy_optimum.round_best)
    assert np.all(np.diff(rb) >= 0)


def test_toy_no_parking_matches_enumeration(toy, toy_dict):
    res = maximize_profit_no_parking(toy)
    profit, prices, _ = oracles.enumerate_profit(toy_dict, (5, 40), (10, 45), (0, 1e9), k_fixed=0.0)
    assert res.state.profit == pytest.approx(profit, rel=1e-5)
    assert res.decision.ride_fare == pytest.approx(prices[0], abs=35 / 199)
    assert res.decision.gross_wage == pytest.approx(prices[1], abs=35 / 199)


def test_parking_never_hurts(toy, toy_optimum):
    assert toy_optimum.state.profit >= maximize_profit_no_parking(toy).state.profit


@pytest.mark.parametrize("fn", [maximize_profit, maximize_profit_no_parking])
def test_empty_market_zero_profit(toy, fn):
    res = fn(toy.replace(lambda0=0.0))
    assert res.state.profit == 0.0


def test_thread_count_does_not_change_optimum(toy):
    grid = GridSpec(fare_steps=12, wage_steps=12, parking_steps=12, refinement_rounds=2)
    a = maximize_profit(toy, grid, n_jobs=1)
    b = maximize_profit(toy, grid, n_jobs=3)
    assert a.decision == b.decision and a.state == b.state


def test_ties_go_to_smallest_point():
    pts = np.array([[2.0, 1.0], [1.0, 5.0], [1.0, 3.0], [0.5, 0.0]])
    profit = np.array([7.0, 7.0, 7.0, 6.0])
    assert _best_index(profit, pts) == 2


def test_sf_no_parking(sf):
    res = maximize_profit_no_parking(sf)
    assert res.state.profit == pytest.approx(48879, rel=5e-3)
    assert res.decision.ride_fare == pytest.approx(14.69, rel=5e-3)
    assert res.decision.gross_wage == pytest.approx(27.48, rel=5e-3)


def test_sf_full_optimum_on_narrow_grid(sf):
    # the default box works too but costs minutes; this one contains the optimum
    grid = GridSpec((13, 17), (23, 28), (0, 4), 9, 9, 9, 3)
    res = maximize_profit(sf, grid)
    assert res.state.profit == pytest.approx(57981, rel=5e-3)
    assert 1400 <= res.state.k_slots <= 1650


def test_implied_prices_invert_the_market(toy):
    p_f, w_g, p_g, ok = implied_prices(380.0, 36.0, 12.0, toy)
    assert ok
    st = solve_fixed_k(PlatformDecision(float(p_f), float(w_g), float(p_g)), 12.0, toy)
    assert st.arrival_rate == pytest.approx(380.0, rel=1e-9)
    assert st.n_drivers == pytest.approx(36.0, rel=1e-9)
    assert abs(st.residuals[2]) < 1e-9
    _, _, _, ok = implied_prices([1000.0, 380.0, 380.0], [36.0, 10.0, 60.0], 12.0, toy)
    assert not ok.any()


def test_toy_sweep_rows_match_enumeration(toy_sweep, toy_dict):
    for i in (0, 7, 15):
        row = toy_sweep.rows[i]
        ref = oracles.enumerate_profit(toy_dict, (5, 40), (10, 45), (0, 1e9), k_fixed=row.k_slots)
        assert row.state.profit == pytest.approx(ref[0], rel=1e-6)


def test_toy_sweep_single_peaked(toy_sweep):
    assert all(r.ok for r in toy_sweep.rows)
    profit = toy_sweep.column("profit_per_hour")
    signs = np.sign(np.diff(profit))
    assert np.count_nonzero(np.diff(signs[signs != 0])) <= 1


def test_toy_sweep_peak_agrees_with_full_optimum(toy_sweep, toy_optimum):
    assert toy_sweep.column("profit_per_hour").max() <= toy_optimum.state.profit * (1 + 1e-6)
    assert toy_sweep.column("profit_per_hour").max() >= toy_optimum.state.profit * (1 - 1e-3)


def test_toy_regimes(toy_sweep):
    rep = detect_regimes(toy_sweep)
    assert all(rep.checks.values()), rep.to_text()
    assert rep.holds


def test_rows_independent_of_grid(toy, toy_sweep):
    part = sweep_k(toy, TOY_K[[3, 11, 17]])
    for row, i in zip(part.rows, (3, 11, 17)):
        assert row.state == toy_sweep.rows[i].state


def test_sweep_threads_byte_identical(toy):
    k = TOY_K[::2]
    assert sweep_k(toy, k, n_jobs=1).to_csv() == sweep_k(toy, k, n_jobs=4).to_csv()


def test_csv_layout(toy_sweep):
    lines = toy_sweep.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 22
    first = [float(x) for x in lines[1].split(",")]
    assert first[0] == 0.0 and first[CSV_COLUMNS.index("p_g")] == 0.0
    # full precision: values round-trip exactly
    assert first[CSV_COLUMNS.index("profit_per_hour")] == toy_sweep.rows[0].state.profit


def test_failed_row_recorded(toy):
    table = sweep_k(toy, [0.0, toy.k0])
    assert table.rows[0].ok and not table.rows[1].ok
    assert "InfeasibleError" in table.rows[1].error
    assert "nan" in table.to_csv().splitlines()[2]


@pytest.mark.parametrize("k", [[], [3.0, 1.0], [-1.0], [0.0, 25.0]])
def test_sweep_rejects_bad_grid(toy, k):
    with pytest.raises(DomainError):
        sweep_k(toy, k)


def test_constant_table_degenerate(toy):
    st = solve_no_parking(PlatformDecision(12, 20), toy)
    table = SweepTable(tuple(SweepRow(float(k), st) for k in range(12)))
    rep = detect_regimes(table)
    assert rep.k1 == 11.0
    assert not any(rep.checks.values())
    assert not rep.holds


def test_regimes_need_certified_rows(toy):
    st = solve_no_parking(PlatformDecision(12, 20), toy)
    rows = [SweepRow(float(k), st) for k in range(11)] + [SweepRow(11.0, None, "boom")]
    with pytest.raises(ConvergenceError):
        detect_regimes(SweepTable(tuple(rows)))
    with pytest.raises(DomainError):
        detect_regimes(SweepTable(tuple(rows[:5])))


def test_sf_sweep_occupancy_shape():
    table, _ = sf_sweep()
    K = table.k_slots
    r = table.column("r")
    parked = table.column("parked_ratio")
    assert np.all(r[(K > 0) & (K <= 1250)] > 0.99)
    assert np.all(parked[K >= 1750] > 0.99)
