"""Command-line interface: ``ridepark <command> SCENARIO [options]``.

Exit status: 0 success, 1 usage or input error, 2 the solver (or a
simulation) did not settle, 3 no admissible equilibrium, 4 a validation
or regime check reported a failure. Errors are printed to stderr as one
line, ``error: <kind>: <message>``.
"""
from __future__ import annotations

import argparse
import contextlib
import math
import sys

import yaml

from . import __version__
from .equilibrium import solve, solve_fixed_k, solve_no_parking
from .exceptions import (ConvergenceError, InfeasibleError, InstabilityError, RideparkError,
                         SimulationOverflowError)
from .montecarlo import SimConfig, simulate, validate_against_analytic
from .optimizer import (CSV_COLUMNS, GridSpec, detect_regimes, maximize_profit,
                        maximize_profit_no_parking, sweep_k)
from .scenario import ScenarioError, load_scenario

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGENCE, EXIT_INFEASIBLE, EXIT_CHECK_FAILED = 0, 1, 2, 3, 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _state_lines(state):
    d = state.decision
    fields = [
        ("ride_fare", d.ride_fare), ("gross_wage", d.gross_wage), ("parking_rate", d.parking_rate),
        ("lambda_per_hour", state.arrival_rate), ("lambda_per_min", state.arrival_rate_per_min),
        ("N", state.n_drivers), ("N_idle", state.n_idle), ("N_onroad", state.n_onroad),
        ("K", state.k_slots), ("r", state.utilization), ("parked_ratio", state.parked_ratio),
        ("t_w_min", state.waiting_time), ("c", state.travel_cost), ("w_n", state.net_wage),
        ("p_d", state.per_trip_payment), ("profit_per_hour", state.profit),
        ("residual_passenger", state.residuals[0]), ("residual_driver", state.residuals[1]),
        ("residual_garage", state.residuals[2]),
        ("garage_enforced", state.enforced[2]),
    ]
    return "".join(f"{k} {_fmt(float(v) if not isinstance(v, bool) else v)}\n" for k, v in fields)


@contextlib.contextmanager
def _sink(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _need(value, what):
    if value is None:
        raise ScenarioError(f"scenario has no {what} block")
    return value


def _tol(args, sc):
    return args.tol if args.tol is not None else sc.tol


def _cmd_solve(args, sc, out):
    decision = _need(sc.decision, "decision")
    if args.k is not None:
        state = solve_fixed_k(decision, args.k, sc.params, _tol(args, sc),
                              derive_parking_rate=args.derive_parking_rate)
    else:
        state = solve(decision, sc.params, _tol(args, sc))
    out.write(_state_lines(state))
    return EXIT_OK


def _cmd_solve_no_parking(args, sc, out):
    state = solve_no_parking(_need(sc.decision, "decision"), sc.params, _tol(args, sc))
    out.write(_state_lines(state))
    return EXIT_OK


def _cmd_optimize(args, sc, out):
    grid = sc.grid or GridSpec()
    fn = maximize_profit_no_parking if args.no_parking else maximize_profit
    res = fn(sc.params, grid, _tol(args, sc), n_jobs=args.threads)
    out.write(_state_lines(res.state))
    out.write(f"grid_evaluations {res.n_evaluated}\n")
    return EXIT_OK


def _sweep(args, sc):
    k_grid = _need(sc.k_grid, "k_grid")
    return sweep_k(sc.params, k_grid, sc.grid or GridSpec(), _tol(args, sc), n_jobs=args.threads)


def _cmd_sweep(args, sc, out):
    table = _sweep(args, sc)
    table.write_csv(out)
    failed = [r for r in table.rows if not r.ok]
    for r in failed:
        print(f"warning: row K={r.k_slots!r}: {r.error}", file=sys.stderr)
    return EXIT_OK


def _cmd_regimes(args, sc, out):
    table = _sweep(args, sc)
    if args.csv:
        with _sink(args.csv) as fh:
            table.write_csv(fh)
    report = detect_regimes(table, args.plateau_tol)
    out.write(report.to_text())
    return EXIT_OK if report.holds else EXIT_CHECK_FAILED


def _sim_config(args, sc):
    cfg = _need(sc.simulation, "simulation")
    if args.seed is not None:
        cfg = SimConfig(**{**cfg.__dict__, "seed": args.seed})
    return cfg


def _cmd_simulate(args, sc, out):
    res = simulate(_sim_config(args, sc), n_jobs=args.threads)
    for key, value in (("r_hat", res.r_hat), ("r_stderr", res.r_stderr),
                       ("mean_busy", res.mean_busy),
                       ("mean_queue_delay_hours", res.mean_queue_delay)):
        out.write(f"{key} {_fmt(float(value))}\n")
    for i, p in enumerate(res.idle_histogram):
        out.write(f"idle {i} {_fmt(float(p))}\n")
    return EXIT_OK


def _cmd_validate(args, sc, out):
    rep = validate_against_analytic(_sim_config(args, sc), args.sigmas, n_jobs=args.threads)
    out.write(rep.to_text())
    return EXIT_OK if rep.passed else EXIT_CHECK_FAILED


def _cmd_calibrate(args, sc, out):
    if sc.anchors is None:
        raise ScenarioError("scenario has no calibration block")
    yaml.safe_dump({"params": sc.params.to_dict()}, out, sort_keys=False)
    return EXIT_OK


COMMANDS = {
    "solve": (_cmd_solve, "equilibrium at the scenario's prices"),
    "solve-no-parking": (_cmd_solve_no_parking, "equilibrium without parking service"),
    "optimize": (_cmd_optimize, "profit-maximizing prices on the scenario grid"),
    "sweep": (_cmd_sweep, "per-K optimum as CSV (" + ",".join(CSV_COLUMNS[:3]) + ",...)"),
    "regimes": (_cmd_regimes, "sweep plus regime report"),
    "simulate": (_cmd_simulate, "discrete-event simulation of the scenario's queue"),
    "validate": (_cmd_validate, "simulation against the analytic queue"),
    "calibrate": (_cmd_calibrate, "print the calibrated parameters as YAML"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ridepark", description="Ride-hailing market with shared parking.")
    parser.add_argument("--version", action="version", version=f"ridepark {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("scenario", help="YAML scenario file")
        p.add_argument("--tol", type=float, help="residual tolerance (overrides the scenario)")
        p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
        p.add_argument("--seed", type=int, help="simulation seed (overrides the scenario)")
        p.add_argument("-o", "--out", help="output file (default stdout)")
        if name == "solve":
            p.add_argument("--k", type=float, help="hold the slot count fixed at this value")
            p.add_argument("--derive-parking-rate", action="store_true",
                           help="with --k, set the parking rate that supplies exactly K slots")
        if name == "optimize":
            p.add_argument("--no-parking", action="store_true", help="optimize (p_f, w_g) only")
        if name == "regimes":
            p.add_argument("--plateau-tol", type=float, default=1e-3)
            p.add_argument("--csv", help="also write the sweep table here")
        if name == "validate":
            p.add_argument("--sigmas", type=float, default=3.0)
    return parser


def _fail(code, kind, message):
    message = " ".join(str(message).split())
    print(f"error: {kind}: {message}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise _UsageError("--threads must be >= 1")
        if args.tol is not None and not (math.isfinite(args.tol) and args.tol > 0):
            raise _UsageError("--tol must be positive")
        sc = load_scenario(args.scenario)
        fn = COMMANDS[args.command][0]
        with _sink(args.out) as out:
            return fn(args, sc, out)
    except _UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except ConvergenceError as exc:
        return _fail(EXIT_NONCONVERGENCE, "nonconvergence", exc)
    except SimulationOverflowError as exc:
        return _fail(EXIT_NONCONVERGENCE, "overflow", exc)
    except InstabilityError as exc:
        return _fail(EXIT_INFEASIBLE, "unstable", exc)
    except InfeasibleError as exc:
        return _fail(EXIT_INFEASIBLE, "infeasible", exc)
    except (RideparkError, ValueError) as exc:
        return _fail(EXIT_USAGE, "input", exc)
    except OSError as exc:
        return _fail(EXIT_USAGE, "io", exc)


if __name__ == "__main__":
    sys.exit(main())
