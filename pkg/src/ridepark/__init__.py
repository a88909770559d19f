"""Equilibrium, pricing and parking-supply analysis for a ride-hailing
platform that rents idle parking slots for its vacant vehicles."""

__version__ = "0.1.0"

from .calibration import SF_ANCHORS, Anchors, calibrate
from .equilibrium import (DEFAULT_TOL, EquilibriumState, constraint_residuals, solve,
                          solve_batch, solve_fixed_k, solve_no_parking)
from .exceptions import (ConvergenceError, DomainError, InfeasibleError, InstabilityError,
                         MultipleEquilibriaWarning, RideparkError, SimulationOverflowError)
from .incentives import (MarketParams, PlatformDecision, driver_supply, garage_supply,
                         inverse_demand, inverse_driver_supply, inverse_garage_supply, net_wage,
                         passenger_demand, printed_sf_params, travel_cost)
from .montecarlo import SimConfig, SimResult, ValidationReport, simulate, validate_against_analytic
from .optimizer import (CSV_COLUMNS, GridSpec, ProfitOptimum, RegimeReport, SweepRow, SweepTable,
                        detect_regimes, implied_prices, maximize_profit,
                        maximize_profit_no_parking, sweep_k)
from .queueing import (IdleDistribution, QueueConfig, expected_idle, idle_distribution,
                       parking_utilization, waiting_time)
from .scenario import Scenario, ScenarioError, bundled_scenario, load_scenario

__all__ = [name for name in dir() if not name.startswith("_")]
