"""Event-driven simulation of the matching queue with parking slots.

Passengers arrive as a Poisson stream and are served first come first
served by ``N`` drivers with exponential trip times. Idle drivers hold a
parking slot whenever one is free and release it the moment they are
dispatched, so the number of occupied slots is ``min(idle, K)`` along every
path. Pickup travel is not modelled.

Randomness comes from numpy's PCG64. Replication ``i`` draws from the
``i``-th child of ``SeedSequence(seed)``, numpy's documented hash-based
stream splitter, so a replication's output depends only on ``(seed, i)``.
"""
from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .exceptions import DomainError, InstabilityError, SimulationOverflowError
from .queueing import QueueConfig, idle_distribution, parking_utilization

_DRAWS = 4096


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings; rates per hour, times in hours.

    ``warmup`` defaults to a tenth of the horizon. ``queue_cap`` bounds the
    number of waiting passengers before the run is declared overflowed.
    """

    arrival_rate: float
    service_rate: float
    n_drivers: int
    k_slots: int
    horizon: float = 1000.0
    warmup: float | None = None
    seed: int = 0
    replications: int = 20
    queue_cap: int = 1_000_000

    def __post_init__(self):
        if self.warmup is None:
            object.__setattr__(self, "warmup", 0.1 * self.horizon)
        for name in ("arrival_rate", "service_rate", "horizon", "warmup"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.arrival_rate < 0 or self.service_rate <= 0:
            raise DomainError("need arrival_rate >= 0 and service_rate > 0")
        for name in ("n_drivers", "k_slots", "replications", "queue_cap", "seed"):
            if int(getattr(self, name)) != getattr(self, name):
                raise DomainError(f"{name} must be an integer")
        if self.n_drivers < 1 or self.k_slots < 0:
            raise DomainError("need n_drivers >= 1 and k_slots >= 0")
        if not self.horizon > self.warmup >= 0:
            raise DomainError("need horizon > warmup >= 0")
        if self.replications < 1 or self.queue_cap < 1:
            raise DomainError("replications and queue_cap must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.arrival_rate >= self.n_drivers * self.service_rate:
            raise InstabilityError(
                f"unstable queue: rho={self.arrival_rate / (self.n_drivers * self.service_rate):.6g} >= 1")


@dataclass(frozen=True)
class SimResult:
    """Aggregated output of all replications.

    ``idle_histogram[i]`` is the time fraction with ``i`` idle drivers;
    ``reps`` holds the per-replication histograms (rows), from which every
    standard error is computed. ``mean_busy`` is the time-average number of
    drivers carrying a passenger.
    """

    r_hat: float
    r_stderr: float
    idle_histogram: np.ndarray
    mean_queue_delay: float
    queue_delay_stderr: float
    mean_busy: float
    busy_stderr: float
    reps: np.ndarray
    r_reps: np.ndarray


def _replication(cfg: SimConfig, seed_seq):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    lam, mu, N = cfg.arrival_rate, cfg.service_rate, cfg.n_drivers
    t_end, t_warm, cap = cfg.horizon, cfg.warmup, cfg.queue_cap
    hist = np.zeros(N + 1)
    waiting = deque()
    delay_sum, delay_n = 0.0, 0
    j = 0          # passengers in the system
    t = 0.0
    expo = rng.standard_exponential(_DRAWS)
    unif = rng.random(_DRAWS)
    k = 0
    while t < t_end:
        if k == _DRAWS:
            expo = rng.standard_exponential(_DRAWS)
            unif = rng.random(_DRAWS)
            k = 0
        busy = j if j < N else N
        rate = lam + mu * busy
        if rate == 0:
            # no arrivals and nobody to serve: the state never changes
            hist[N] += t_end - max(t, t_warm)
            break
        t_next = t + expo[k] / rate
        lo = t if t > t_warm else t_warm
        hi = t_next if t_next < t_end else t_end
        if hi > lo:
            hist[N - busy] += hi - lo
        t = t_next
        if t >= t_end:
            break
        if unif[k] * rate < lam:
            j += 1
            if j <= N:
                if t > t_warm:
                    delay_n += 1
            else:
                waiting.append(t)
                if len(waiting) > cap:
                    raise SimulationOverflowError(
                        f"passenger queue exceeded {cap} at t={t:.6g}h; rho too close to 1")
        else:
            j -= 1
            if j >= N:
                arrived = waiting.popleft()
                if arrived > t_warm:
                    delay_sum += t - arrived
                    delay_n += 1
        k += 1
    hist /= t_end - t_warm
    delay = delay_sum / delay_n if delay_n else 0.0
    return hist, delay


def _occupancy(hist, k_slots):
    if k_slots == 0:
        return 1.0
    idle = np.arange(len(hist))
    return float(np.dot(hist, np.minimum(idle, k_slots)) / k_slots)


def _stderr(x):
    x = np.asarray(x, dtype=float)
    return float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.inf


def simulate(cfg: SimConfig, n_jobs: int = 1) -> SimResult:
    """Run ``cfg.replications`` independent replications and pool them.

    Statistics are time averages over ``[warmup, horizon]``; each run
    starts with every driver idle. Standard errors are across
    replications. ``n_jobs`` only changes scheduling, not results.

    Raises
    ------
    SimulationOverflowError
        If more than ``cfg.queue_cap`` passengers wait at once.
    """
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.replications)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            out = list(pool.map(lambda s: _replication(cfg, s), children))
    else:
        out = [_replication(cfg, s) for s in children]
    reps = np.array([h for h, _ in out])
    delays = np.array([d for _, d in out])
    r_reps = np.array([_occupancy(h, cfg.k_slots) for h in reps])
    busy_reps = reps @ (cfg.n_drivers - np.arange(cfg.n_drivers + 1))
    hist = reps.mean(axis=0)
    hist /= hist.sum()
    return SimResult(
        r_hat=float(np.clip(r_reps.mean(), 0.0, 1.0)),
        r_stderr=_stderr(r_reps),
        idle_histogram=hist,
        mean_queue_delay=float(delays.mean()),
        queue_delay_stderr=_stderr(delays),
        mean_busy=float(busy_reps.mean()),
        busy_stderr=_stderr(busy_reps),
        reps=reps,
        r_reps=r_reps,
    )


# ---------------------------------------------------------------------------
# comparison with the analytic model


def _sigma_level(tol_sigmas):
    """Two-sided tail probability of a normal deviation beyond ``tol_sigmas``."""
    return 2.0 * stats.norm.sf(tol_sigmas)


def _groups(probs, min_mass):
    """Contiguous index groups each holding at least ``min_mass`` of ``probs``."""
    groups, current, mass = [], [], 0.0
    for i, p in enumerate(probs):
        current.append(i)
        mass += p
        if mass >= min_mass:
            groups.append(current)
            current, mass = [], 0.0
    if current:
        if groups:
            groups[-1].extend(current)
        else:
            groups.append(current)
    return groups


def _z(diff, se):
    """Standard score; NaN when replications show no spread and values differ."""
    if se > 0:
        return diff / se
    return 0.0 if abs(diff) <= 1e-12 else math.nan


def _histogram_test(reps, analytic, tol_sigmas, min_mass):
    """Hotelling test of the mean replication histogram against ``analytic``.

    Bins are merged into contiguous groups of analytic mass at least
    ``min_mass``; the last group is dropped because the groups sum to one.
    """
    R = reps.shape[0]
    groups = _groups(analytic, min_mass)
    sim_g = np.stack([reps[:, g].sum(axis=1) for g in groups], axis=1)
    ana_g = np.array([analytic[g].sum() for g in groups])
    diff = sim_g.mean(axis=0) - ana_g
    se = sim_g.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.full(len(groups), math.inf)
    z = [_z(d, s) for d, s in zip(diff, se)]
    d = len(groups) - 1
    if d == 0:
        p_value = 1.0
    elif np.all(se[:d] == 0):
        p_value = 1.0 if np.all(np.abs(diff[:d]) <= 1e-12) else 0.0
    elif R <= d + 1:
        raise DomainError(f"need more than {d + 1} replications for {d + 1} histogram groups")
    else:
        S = np.cov(sim_g[:, :d], rowvar=False).reshape(d, d)
        t2 = R * diff[:d] @ np.linalg.lstsq(S, diff[:d], rcond=None)[0]
        f = t2 * (R - d) / (d * (R - 1))
        p_value = float(stats.f.sf(f, d, R - d))
    return dict(
        groups=[(g[0], g[-1]) for g in groups],
        simulated=sim_g.mean(axis=0), analytic=ana_g, z=np.array(z),
        p_value=p_value, passed=p_value >= _sigma_level(tol_sigmas))


_VERDICT = ("occupancy", "idle_histogram")


@dataclass(frozen=True)
class ValidationReport:
    """Per-statistic comparison of a simulation with the analytic model.

    ``statistics`` maps a name to a dict holding the simulated and analytic
    values, the z-score (or the joint p-value for the histogram) and a
    ``passed`` flag. ``occupancy`` is absent when ``K = 0``. The overall
    verdict covers occupancy and the histogram; the busy-driver count and
    queueing delay are diagnostics (the delay's standard error is
    unreliable when few passengers ever wait).
    """

    config: SimConfig
    tol_sigmas: float
    statistics: dict
    result: SimResult

    @property
    def passed(self) -> bool:
        return all(s["passed"] for name, s in self.statistics.items() if name in _VERDICT)

    def to_text(self) -> str:
        lines = []
        for name, s in self.statistics.items():
            if name == "idle_histogram":
                lines.append(f"{name} groups={len(s['groups'])} p={s['p_value']:.4g} "
                             f"max|z|={np.max(np.abs(s['z'])):.3f} "
                             f"{'pass' if s['passed'] else 'FAIL'}")
            elif "skipped" in s:
                lines.append(f"{name} sim={s['simulated']:.6g} analytic={s['analytic']:.6g} "
                             f"skipped ({s['skipped']})")
            else:
                lines.append(f"{name} sim={s['simulated']:.6g} analytic={s['analytic']:.6g} "
                             f"z={s['z']:+.3f} {'pass' if s['passed'] else 'FAIL'}")
        lines.append("status " + ("pass" if self.passed else "FAIL"))
        return "\n".join(lines) + "\n"


def validate_against_analytic(cfg: SimConfig, tol_sigmas: float = 3.0, analytic=None,
                              min_group_mass: float = 0.05, n_jobs: int = 1) -> ValidationReport:
    """Simulate ``cfg`` and compare with the queueing formulas.

    Checked statistics: slot occupancy ``r`` (skipped when ``K = 0``), the
    idle histogram (a joint test over merged bins, failing when its p-value
    is below the two-sided normal tail at ``tol_sigmas``), the mean number
    of busy drivers against ``lambda/mu``, and the mean queueing delay
    against ``X_0 / (N mu - lambda)``. Scalars pass when within
    ``tol_sigmas`` standard errors.

    ``analytic`` may replace the idle distribution from the queueing
    module, which is how a broken model is shown to be caught.
    """
    if not tol_sigmas > 0:
        raise DomainError("tol_sigmas must be > 0")
    res = simulate(cfg, n_jobs=n_jobs)
    qc = QueueConfig(cfg.arrival_rate, cfg.service_rate, cfg.n_drivers)
    X = np.asarray(idle_distribution(qc).probs if analytic is None else analytic, dtype=float)
    if X.shape != (cfg.n_drivers + 1,):
        raise DomainError(f"analytic distribution needs {cfg.n_drivers + 1} entries")
    out = {}

    def scalar(name, sim, se, ana):
        z = _z(sim - ana, se)
        entry = dict(simulated=sim, analytic=ana, stderr=se, z=z, passed=abs(z) <= tol_sigmas)
        if math.isnan(z):
            # e.g. no passenger ever queued: a standard error cannot be formed
            entry.update(passed=True, skipped="no spread across replications")
        out[name] = entry

    if cfg.k_slots > 0:
        r = _occupancy(X, cfg.k_slots) if analytic is not None else parking_utilization(qc, cfg.k_slots)
        scalar("occupancy", res.r_hat, res.r_stderr, r)
    out["idle_histogram"] = _histogram_test(res.reps, X, tol_sigmas, min_group_mass)
    scalar("busy_drivers", res.mean_busy, res.busy_stderr, cfg.arrival_rate / cfg.service_rate)
    scalar("queue_delay", res.mean_queue_delay, res.queue_delay_stderr,
           X[0] / (cfg.n_drivers * cfg.service_rate - cfg.arrival_rate))
    return ValidationReport(cfg, tol_sigmas, out, res)
