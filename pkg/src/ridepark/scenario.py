"""YAML scenario files for the command line.

A scenario is a mapping with these top-level keys, all optional except
``params``::

    params:       MarketParams fields (mu may be left out when calibrating)
    calibration:  {anchors: {arrival_rate, n_drivers, travel_cost, net_wage,
                   waiting_time}, fit_optimality: bool}
    decision:     {ride_fare, gross_wage, parking_rate}
    grid:         GridSpec fields; bounds as two-element lists
    k_grid:       a list of slot counts, or {start, stop, num}
    simulation:   SimConfig fields
    tol:          solver tolerance
    output:       path prefix for files written by the CLI

Unknown keys at any level are rejected, as are values that violate the
invariants of the corresponding type.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import yaml

from .calibration import Anchors, calibrate
from .equilibrium import DEFAULT_TOL
from .exceptions import DomainError
from .incentives import MarketParams, PlatformDecision
from .montecarlo import SimConfig
from .optimizer import GridSpec


class ScenarioError(DomainError):
    """The scenario file is malformed."""


@dataclass(frozen=True)
class Scenario:
    params: MarketParams
    decision: PlatformDecision | None = None
    grid: GridSpec | None = None
    k_grid: np.ndarray | None = None
    simulation: SimConfig | None = None
    tol: float = DEFAULT_TOL
    output: str | None = None
    # parameters as written, before any calibration block was applied
    raw_params: MarketParams | None = None
    anchors: Anchors | None = None
    fit_optimality: bool = False


_TOP = {"params", "calibration", "decision", "grid", "k_grid", "simulation", "tol", "output"}


def _check_keys(block, allowed, where):
    if not isinstance(block, dict):
        raise ScenarioError(f"{where} must be a mapping")
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ScenarioError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _build(cls, block, where, **extra):
    names = [f.name for f in fields(cls)]
    _check_keys(block, names, where)
    try:
        return cls(**{**block, **extra})
    except TypeError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def _as_float(value, where):
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ScenarioError(f"{where} must be a number") from None
    return x


def parse_scenario(doc) -> Scenario:
    """Validate a loaded YAML document and build the scenario."""
    _check_keys(doc, _TOP, "scenario")
    if "params" not in doc:
        raise ScenarioError("scenario needs a params block")
    pblock = dict(doc["params"] or {})
    _check_keys(pblock, [f.name for f in fields(MarketParams)], "params")
    pblock = {k: _as_float(v, f"params.{k}") for k, v in pblock.items()}

    anchors, fit = None, False
    if "calibration" in doc:
        cblock = doc["calibration"]
        _check_keys(cblock, {"anchors", "fit_optimality"}, "calibration")
        if "anchors" not in cblock:
            raise ScenarioError("calibration needs anchors")
        ablock = {k: _as_float(v, f"calibration.anchors.{k}") for k, v in
                  dict(cblock["anchors"] or {}).items()}
        anchors = _build(Anchors, ablock, "calibration.anchors")
        fit = cblock.get("fit_optimality", False)
        if not isinstance(fit, bool):
            raise ScenarioError("calibration.fit_optimality must be true or false")
        # mu is overwritten by calibration, so a placeholder is fine here
        pblock.setdefault("mu", 1.0)
    raw = _build(MarketParams, pblock, "params")
    params = calibrate(raw, anchors, fit_optimality=fit) if anchors else raw

    decision = None
    if "decision" in doc:
        dblock = {k: _as_float(v, f"decision.{k}") for k, v in dict(doc["decision"] or {}).items()}
        decision = _build(PlatformDecision, dblock, "decision")

    grid = None
    if "grid" in doc:
        gblock = dict(doc["grid"] or {})
        for key in ("fare_bounds", "wage_bounds", "parking_bounds"):
            if key in gblock:
                b = gblock[key]
                if not isinstance(b, (list, tuple)) or len(b) != 2:
                    raise ScenarioError(f"grid.{key} must be a two-element list")
                gblock[key] = tuple(_as_float(x, f"grid.{key}") for x in b)
        grid = _build(GridSpec, gblock, "grid")

    k_grid = None
    if "k_grid" in doc:
        kg = doc["k_grid"]
        if isinstance(kg, dict):
            _check_keys(kg, {"start", "stop", "num"}, "k_grid")
            try:
                k_grid = np.linspace(float(kg["start"]), float(kg["stop"]), int(kg["num"]))
            except (KeyError, TypeError, ValueError):
                raise ScenarioError("k_grid needs numeric start, stop and num") from None
        elif isinstance(kg, list):
            k_grid = np.array([_as_float(x, "k_grid entry") for x in kg])
        else:
            raise ScenarioError("k_grid must be a list or {start, stop, num}")

    simulation = None
    if "simulation" in doc:
        simulation = _build(SimConfig, dict(doc["simulation"] or {}), "simulation")

    tol = _as_float(doc.get("tol", DEFAULT_TOL), "tol")
    if not (math.isfinite(tol) and tol > 0):
        raise ScenarioError("tol must be positive")
    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise ScenarioError("output must be a string")
    return Scenario(params=params, decision=decision, grid=grid, k_grid=k_grid,
                    simulation=simulation, tol=tol, output=output, raw_params=raw,
                    anchors=anchors, fit_optimality=fit)


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"invalid YAML in {path}: {str(exc).splitlines()[0]}") from None
    return parse_scenario(doc)


def bundled_scenario(name: str) -> Path:
    """Path of a scenario shipped with the package, e.g. ``"toy_t1"``."""
    path = Path(__file__).parent / "scenarios" / f"{name}.yaml"
    if not path.exists():
        raise ScenarioError(f"no bundled scenario {name!r}")
    return path
