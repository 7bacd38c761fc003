"""Two-state flapping-mirror reduction of the driven diode.

State 0 is the transparent dark configuration, state 1 the reflecting
ground configuration. The mirror flips 0 -> 1 at ``gamma01`` and 1 -> 0 at
``gamma10``; light incident from the left is reflected while the mirror is in
state 1 and transmitted while it is in state 0.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError

TRANSPARENT, REFLECTIVE = 0, 1

#: data requirements for the empirical estimator
MIN_TRAJECTORIES = 100
MIN_SPAN = 1e3  # in units of 1/gamma_tot, for a single trajectory
DEFAULT_BATCHES = 20


@dataclass(frozen=True)
class RateModel:
    gamma01: float
    gamma10: float

    def __post_init__(self):
        if not (self.gamma01 > 0 and self.gamma10 > 0):
            raise ValueError("both switching rates must be positive")
        if not (math.isfinite(self.gamma01) and math.isfinite(self.gamma10)):
            raise ValueError("switching rates must be finite")

    @property
    def gamma_tot(self) -> float:
        return self.gamma01 + self.gamma10

    @property
    def p0(self) -> float:
        return self.gamma10 / self.gamma_tot

    @property
    def p1(self) -> float:
        return self.gamma01 / self.gamma_tot

    def stationary(self, r: int) -> float:
        return (self.p0, self.p1)[_state(r)]

    def leave_rate(self, r: int) -> float:
        return (self.gamma01, self.gamma10)[_state(r)]

    @classmethod
    def from_diode(cls, delta: float, alpha: float | None = None, exact_rates: bool = False):
        """Rates of the optimal-slice diode at detuning ``delta``.

        The dark state leaks to the ground state at ``delta**2``. The return
        rate is ``2 delta**2`` in the strong-drive limit; with ``exact_rates``
        it is ``4 alpha^2 delta^2 / (2 alpha^2 + delta^2)``, which keeps the
        stationary occupations equal to the closed-form ``p_D`` and ``p_G``.
        """
        if delta == 0 or not math.isfinite(delta):
            raise ValueError("delta must be finite and nonzero; at zero the mirror never moves")
        d2 = delta * delta
        if not exact_rates:
            return cls(gamma01=d2, gamma10=2 * d2)
        if alpha is None or alpha == 0:
            raise ValueError("exact rates need a nonzero alpha")
        a2 = abs(alpha) ** 2
        return cls(gamma01=d2, gamma10=4 * a2 * d2 / (2 * a2 + d2))


def _state(r) -> int:
    if r not in (0, 1):
        raise ValueError(f"state must be 0 or 1, got {r!r}")
    return int(r)


def return_probability(m: RateModel, r: int, tau):
    """Probability of occupying ``r`` a time ``tau`` after occupying it."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be non-negative")
    pr = m.stationary(r)
    out = pr + (1 - pr) * np.exp(-m.gamma_tot * tau)
    return float(out) if out.ndim == 0 else out


def cross_probability(m: RateModel, r: int, tau):
    """Probability of occupying ``r`` a time ``tau`` after occupying the other state."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be non-negative")
    out = m.stationary(r) * -np.expm1(-m.gamma_tot * tau)
    return float(out) if out.ndim == 0 else out


def rate_matrix(m: RateModel) -> np.ndarray:
    """Generator ``Q`` with ``d/dt (P0, P1) = Q @ (P0, P1)``."""
    return np.array([[-m.gamma01, m.gamma10], [m.gamma01, -m.gamma10]])


def evolve_populations(m: RateModel, initial, t):
    """``(P0, P1)`` at time(s) ``t`` from ``initial``; rows follow ``t``."""
    init = np.asarray(initial, dtype=float)
    if init.shape != (2,) or np.any(init < 0) or not math.isclose(init.sum(), 1, abs_tol=1e-12):
        raise ValueError("initial populations must be a probability pair")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    decay = np.exp(-m.gamma_tot * t)
    p0 = m.p0 + (init[0] - m.p0) * decay
    return np.column_stack([p0, 1 - p0])


@dataclass(frozen=True)
class AnalyticCorrelators:
    tau: np.ndarray
    amplitudes: dict
    fluxes: dict
    g1: dict
    g2: dict


def analytic_correlators(m: RateModel, alpha_in: complex, tau_grid) -> AnalyticCorrelators:
    """Field statistics of a coherent beam hitting the flapping mirror from the left."""
    if alpha_in == 0:
        raise ValueError("alpha_in must be nonzero")
    tau = np.asarray(tau_grid, dtype=float)
    p_ref = return_probability(m, REFLECTIVE, tau)
    p_tr = return_probability(m, TRANSPARENT, tau)
    flux = abs(alpha_in) ** 2
    return AnalyticCorrelators(
        tau=tau,
        amplitudes={"ref": m.p1 * alpha_in, "trans": m.p0 * alpha_in},
        fluxes={"ref": m.p1 * flux, "trans": m.p0 * flux},
        g1={"ref": p_ref, "trans": p_tr},
        g2={"ref": p_ref / m.p1, "trans": p_tr / m.p0},
    )


@dataclass(frozen=True)
class Trajectory:
    seed: int
    t_max: float
    initial_state: int
    switch_times: np.ndarray

    def __post_init__(self):
        _state(self.initial_state)
        st = np.asarray(self.switch_times, dtype=float)
        if st.ndim != 1:
            raise ValueError("switch_times must be one-dimensional")
        if st.size and (np.any(np.diff(st) <= 0) or st[0] <= 0 or st[-1] >= self.t_max):
            raise ValueError("switch times must be strictly increasing inside (0, t_max)")
        object.__setattr__(self, "switch_times", st)

    def state_at(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        flips = np.searchsorted(self.switch_times, times, side="right")
        return (self.initial_state + flips) % 2

    def dwell_times(self):
        """``(states, durations)`` of every dwell that ends inside the record."""
        edges = np.concatenate([[0.0], self.switch_times])
        durations = np.diff(edges)
        states = (self.initial_state + np.arange(durations.size)) % 2
        return states, durations

    def occupation(self, r: int) -> float:
        edges = np.concatenate([[0.0], self.switch_times, [self.t_max]])
        states = (self.initial_state + np.arange(edges.size - 1)) % 2
        return float(np.sum(np.diff(edges)[states == _state(r)]) / self.t_max)

    def csv_rows(self):
        """``(time, state)`` at the start, at every switch, and at ``t_max``."""
        times = np.concatenate([[0.0], self.switch_times, [self.t_max]])
        states = self.state_at(times[:-1])
        return list(zip(times, np.append(states, states[-1])))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "state"])
            for t, s in self.csv_rows():
                w.writerow([f"{t:.16e}", int(s)])


def sample(m: RateModel, t_max: float, seed: int) -> Trajectory:
    """One realisation over ``[0, t_max]`` started from the stationary distribution."""
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    rng = np.random.default_rng(seed)
    s0 = REFLECTIVE if rng.random() < m.p1 else TRANSPARENT
    rates = np.array([m.leave_rate(s0), m.leave_rate(1 - s0)])
    mean_cycle = 1 / rates[0] + 1 / rates[1]
    chunk = int(2 * (t_max / mean_cycle) * 1.1) + 16
    chunk += chunk % 2
    times, t0 = [], 0.0
    while True:
        waits = rng.exponential(1.0, chunk) / np.tile(rates, chunk // 2)
        arrivals = t0 + np.cumsum(waits)
        done = arrivals >= t_max
        if done.any():
            times.append(arrivals[: int(np.argmax(done))])
            break
        times.append(arrivals)
        t0 = arrivals[-1]
    return Trajectory(seed=int(seed), t_max=float(t_max), initial_state=s0,
                      switch_times=np.concatenate(times))


def child_seeds(master_seed: int, n: int) -> list:
    """Per-trajectory 64-bit seeds derived from ``(master_seed, index)``."""
    return [int(np.random.SeedSequence([master_seed, i]).generate_state(1, np.uint64)[0])
            for i in range(n)]


def _sample_job(args):
    m, t_max, seed = args
    return sample(m, t_max, seed)


def sample_many(m: RateModel, t_max: float, n: int, master_seed: int, workers: int = 1) -> list:
    jobs = [(m, t_max, s) for s in child_seeds(master_seed, n)]
    if workers <= 1:
        return [_sample_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sample_job, jobs, chunksize=max(1, n // (4 * workers))))


@dataclass(frozen=True)
class EmpiricalSeries:
    tau: np.ndarray
    p_return: dict
    stderr: dict
    g1: dict
    g2: dict
    n_units: int


def _ratio_estimate(num: np.ndarray, den: np.ndarray):
    """Pooled ratio and its delta-method standard error across independent units."""
    total = den.sum(axis=0)
    est = num.sum(axis=0) / total
    k = num.shape[0]
    resid = num - est * den
    se = np.sqrt(k / (k - 1) * np.sum(resid**2, axis=0)) / total
    return est, se


def empirical_correlators(trajs: list, m: RateModel, tau_grid, samples_per_unit: int = 4000,
                          batches: int = DEFAULT_BATCHES) -> EmpiricalSeries:
    """Time-averaged return probabilities with standard errors.

    Each trajectory is one statistical unit; a lone trajectory is cut into
    ``batches`` consecutive segments instead. Within a unit, start times are
    an even grid and the estimate is the fraction of starts in ``r`` that are
    again in ``r`` after ``tau``.
    """
    tau = np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or tau.size == 0 or np.any(tau < 0):
        raise ValueError("tau grid must be a non-empty list of non-negative delays")
    if not trajs:
        raise InsufficientDataError("no trajectories")
    tau_max = float(tau.max())
    units = []
    if len(trajs) >= MIN_TRAJECTORIES:
        for tr in trajs:
            if tr.t_max <= tau_max:
                raise InsufficientDataError("trajectory shorter than the largest delay")
            units.append((tr, 0.0, tr.t_max - tau_max))
    elif len(trajs) == 1 and trajs[0].t_max * m.gamma_tot >= MIN_SPAN:
        tr = trajs[0]
        width = (tr.t_max - tau_max) / batches
        if width <= 0:
            raise InsufficientDataError("trajectory shorter than the largest delay")
        units = [(tr, i * width, (i + 1) * width) for i in range(batches)]
    else:
        raise InsufficientDataError(
            f"need >= {MIN_TRAJECTORIES} trajectories or one spanning >= {MIN_SPAN:g}/gamma_tot")
    est, se = {}, {}
    for r in (TRANSPARENT, REFLECTIVE):
        num = np.empty((len(units), tau.size))
        den = np.empty((len(units), tau.size))
        for k, (tr, lo, hi) in enumerate(units):
            starts = np.linspace(lo, hi, samples_per_unit, endpoint=False)
            at_r = tr.state_at(starts) == r
            later = tr.state_at(starts[at_r, None] + tau[None, :]) == r
            num[k] = later.sum(axis=0)
            den[k] = at_r.sum()
        if np.any(den.sum(axis=0) == 0):
            raise InsufficientDataError(f"state {r} never visited")
        est[r], se[r] = _ratio_estimate(num, den)
    names = {TRANSPARENT: "trans", REFLECTIVE: "ref"}
    return EmpiricalSeries(
        tau=tau,
        p_return={names[r]: est[r] for r in est},
        stderr={names[r]: se[r] for r in se},
        g1={names[r]: est[r] for r in est},
        g2={names[r]: est[r] / m.stationary(r) for r in est},
        n_units=len(units),
    )
