"""Expensive results shared by several test modules, computed once per session."""
import time
from functools import lru_cache

from ridepark import bundled_scenario, load_scenario, sweep_k


@lru_cache(maxsize=None)
def sf_scenario():
    return load_scenario(bundled_scenario("sf_calibrated"))


@lru_cache(maxsize=None)
def sf_sweep():
    """The 100-point calibrated San Francisco sweep and its wall time in seconds."""
    sc = sf_scenario()
    t0 = time.perf_counter()
    table = sweep_k(sc.params, sc.k_grid, sc.grid, sc.tol)
    return table, time.perf_counter() - t0


def random_sim_configs(count=10, seed=12345):
    """Randomized small queues: N <= 50, rho in [0.3, 0.9], K <= N.

    The generator seed and the simulation seeds are fixed here once and
    not tuned afterwards.
    """
    import numpy as np

    from ridepark import SimConfig

    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        n = int(rng.integers(1, 51))
        rho = float(rng.uniform(0.3, 0.9))
        k = int(rng.integers(0, n + 1))
        out.append(SimConfig(arrival_rate=rho * n, service_rate=1.0, n_drivers=n, k_slots=k,
                             horizon=400.0, seed=7 + i, replications=30))
    return out
