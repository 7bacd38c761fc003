"""Scattering matrices, transmittance sweeps and the diode-efficiency map.

Matrix layout (rows are outputs, columns are inputs)::

    S = [[r_alpha, t_beta],      T = [[R_alpha, T_beta],
         [t_alpha, r_beta]]           [T_alpha, R_beta]]

Row 0 is the left-moving output, row 1 the right-moving one. Column 0 is
populated by driving from the left only, column 1 by driving from the right
only. ``S`` holds amplitude ratios, ``T`` flux ratios.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import liouville, slh
from .errors import NumericalInvariantError, RegimeError, UndefinedEfficiencyError

ADIABATIC = "adiabatic-closed-form"
FULL_NUMERIC = "full-numeric"
REGIMES = (ADIABATIC, FULL_NUMERIC)

#: largest |alpha|, |beta| or delta accepted by the closed-form regime
ADIABATIC_LIMIT = 0.2
#: slack allowed above unit reflectance + transmittance
FLUX_SLACK = 1e-8


@dataclass(frozen=True)
class ScatteringMatrices:
    s: np.ndarray
    t: np.ndarray
    regime_tag: str

    def __post_init__(self):
        if self.regime_tag not in REGIMES:
            raise ValueError(f"unknown regime {self.regime_tag!r}")
        if self.s.shape != (2, 2) or self.t.shape != (2, 2):
            raise ValueError("scattering matrices are 2x2")

    def check_low_power(self, slack: float = FLUX_SLACK):
        """Flux conservation bounds, meaningful when the drive is weak."""
        if np.min(self.t) < -slack or np.max(self.t.sum(axis=0)) > 1 + slack:
            raise NumericalInvariantError(
                f"flux matrix violates 0 <= T, column sums <= 1: {self.t.tolist()}",
                invariant="diode.ScatteringMatrices:flux-bounds")
        return self

    @property
    def t_alpha(self) -> float:
        return float(self.t[1, 0])

    @property
    def t_beta(self) -> float:
        return float(self.t[0, 1])

    @property
    def r_alpha(self) -> float:
        return float(self.t[0, 0])

    @property
    def r_beta(self) -> float:
        return float(self.t[1, 1])


def _column(triple: slh.SLHTriple, rho: np.ndarray, amp: complex, left_driven: bool):
    """Amplitude and flux ratios ``(reflected, transmitted)`` for one driving side."""
    ll, lr = triple.l_left, triple.l_right
    refl_op, trans_op = (ll, lr) if left_driven else (lr, ll)
    out = []
    for op in (refl_op, trans_op):
        a_out = complex(np.trace(op @ rho)) / amp
        flux = float(np.trace(op.conj().T @ op @ rho).real) / abs(amp) ** 2
        out.append((a_out, flux))
    return out


def _drive_amplitudes(p: slh.DiodeParams):
    a, b = complex(p.alpha), complex(p.beta)
    if a == 0 and b == 0:
        raise ValueError("scattering needs a nonzero drive amplitude on at least one side")
    # a missing side is probed at the other side's amplitude
    return (a if a != 0 else b), (b if b != 0 else a)


def _check_adiabatic(p: slh.DiodeParams):
    if p.domega2 != 0 or not math.isclose(p.dphi, p.domega1, rel_tol=0, abs_tol=1e-15):
        raise RegimeError("closed-form scattering holds on the optimal slice only")
    delta = -p.domega1
    worst = max(abs(p.alpha), abs(p.beta), abs(delta))
    if worst > ADIABATIC_LIMIT:
        raise RegimeError(f"closed-form scattering needs |alpha|, |beta|, delta <= {ADIABATIC_LIMIT}"
                          f" (largest is {worst:g})")
    return delta


def reduced_steady_state(alpha: complex, beta: complex, delta: float) -> np.ndarray:
    """2x2 stationary state of the closed-form eliminated model, basis ``(G, D)``."""
    t = slh.eliminated_closed_form(alpha, beta, delta)
    return liouville.steady_state(liouville.assemble(t)).rho


def _scatter_adiabatic(p: slh.DiodeParams) -> ScatteringMatrices:
    delta = _check_adiabatic(p)
    a, b = _drive_amplitudes(p)
    s = np.zeros((2, 2), dtype=complex)
    t = np.zeros((2, 2))
    for col, (amp_a, amp_b) in enumerate(((a, 0), (0, b))):
        triple = slh.eliminated_closed_form(amp_a, amp_b, delta)
        rho = reduced_steady_state(amp_a, amp_b, delta)
        (ra, rf), (ta, tf) = _column(triple, rho, amp_a or amp_b, left_driven=(col == 0))
        s[:, col] = (ra, ta) if col == 0 else (ta, ra)
        t[:, col] = (rf, tf) if col == 0 else (tf, rf)
    return ScatteringMatrices(s=s, t=t, regime_tag=ADIABATIC)


def driven_steady_state(p: slh.DiodeParams) -> tuple:
    """Cascade triple and its stationary state (ground-state fallback if degenerate)."""
    triple = slh.build_cascade(p)
    rho = liouville.steady_state(liouville.assemble(triple),
                                 fallback_initial=liouville.ground_state())
    return triple, rho


def _scatter_full(p: slh.DiodeParams) -> ScatteringMatrices:
    a, b = _drive_amplitudes(p)
    s = np.zeros((2, 2), dtype=complex)
    t = np.zeros((2, 2))
    for col, q in enumerate((replace(p, alpha=a, beta=0), replace(p, alpha=0, beta=b))):
        triple, rho = driven_steady_state(q)
        amp = a if col == 0 else b
        (ra, rf), (ta, tf) = _column(triple, rho.rho, amp, left_driven=(col == 0))
        s[:, col] = (ra, ta) if col == 0 else (ta, ra)
        t[:, col] = (rf, tf) if col == 0 else (tf, rf)
    return ScatteringMatrices(s=s, t=t, regime_tag=FULL_NUMERIC)


def scattering(p: slh.DiodeParams, mode: str = FULL_NUMERIC) -> ScatteringMatrices:
    """Amplitude and flux scattering matrices of the diode.

    ``mode`` selects the closed-form eliminated model (optimal slice, weak
    drive) or the exact 16-dimensional steady state.
    """
    if mode == ADIABATIC:
        return _scatter_adiabatic(p)
    if mode == FULL_NUMERIC:
        return _scatter_full(p)
    raise ValueError(f"mode must be one of {REGIMES}, got {mode!r}")


def efficiency_from(t_alpha: float, t_beta: float) -> float:
    denom = t_alpha + t_beta
    if not denom > 0:
        raise UndefinedEfficiencyError("T_alpha + T_beta is zero",
                                       invariant="diode.efficiency:nonzero-denominator")
    e = t_alpha * (t_alpha - t_beta) / denom
    return e + 0.0  # folds -0.0 into 0.0


def efficiency(p: slh.DiodeParams) -> float:
    sm = _scatter_full(p)
    return efficiency_from(sm.t_alpha, sm.t_beta)


@dataclass(frozen=True)
class TransmittanceTable:
    delta: float
    power: np.ndarray
    t_alpha: np.ndarray
    t_beta: np.ndarray
    efficiency: np.ndarray


def _transmittance_point(args):
    delta, power = args
    amp = math.sqrt(power)
    sm = _scatter_full(slh.DiodeParams.optimal(delta, alpha=amp, beta=amp))
    return sm.t_alpha, sm.t_beta


def _ordered_map(fn, items, workers: int):
    items = list(items)
    if workers is None or workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def transmittance_curve(delta: float, power_grid, workers: int = 1) -> TransmittanceTable:
    """``T_alpha`` and ``T_beta`` against incident power ``|amp|^2`` on the optimal slice."""
    powers = np.asarray(power_grid, dtype=float)
    if powers.ndim != 1 or powers.size == 0 or np.any(~(powers > 0)):
        raise ValueError("powers must be a non-empty list of positive numbers")
    rows = _ordered_map(_transmittance_point, [(delta, float(x)) for x in powers], workers)
    ta = np.array([r[0] for r in rows])
    tb = np.array([r[1] for r in rows])
    eff = np.array([efficiency_from(x, y) for x, y in rows])
    return TransmittanceTable(delta=delta, power=powers, t_alpha=ta, t_beta=tb, efficiency=eff)


@dataclass(frozen=True)
class EfficiencyMap:
    """Efficiency on a grid.

    ``dphi_grid`` is the phase offset measured as ``pi - phi`` (so the
    optimal slice sits at ``+delta``); ``eff[i, j]`` belongs to
    ``dphi_grid[i]`` and ``domega1_grid[j]``.
    """

    dphi_grid: np.ndarray
    domega1_grid: np.ndarray
    eff: np.ndarray
    argmax: tuple
    alpha: complex

    def __post_init__(self):
        if np.max(self.eff) > 1 + FLUX_SLACK:
            raise NumericalInvariantError("efficiency above one",
                                          invariant="diode.EfficiencyMap:eff<=1")


def _map_point(args):
    dphi_axis, domega1, alpha = args
    p = slh.DiodeParams(domega1=domega1, domega2=0.0, dphi=-dphi_axis, alpha=alpha, beta=alpha)
    return efficiency(p)


def _grid(rng, n):
    lo, hi = rng
    if not hi > lo:
        raise ValueError("grid range must be increasing")
    return np.linspace(lo, hi, n)


def efficiency_map(dphi_range=(-0.04, 0.04), omega_range=(-0.04, 0.04), alpha: complex = 0.01,
                   resolution=64, workers: int = 1) -> EfficiencyMap:
    """Tabulate the efficiency over ``(pi - phi, domega1)`` with ``domega2 = 0``.

    ``resolution`` is an int or a ``(n_dphi, n_domega1)`` pair, each >= 8.
    Every grid point is computed independently and the results are assembled
    in grid order, so the map does not depend on ``workers``.
    """
    n_phi, n_om = (resolution, resolution) if np.isscalar(resolution) else resolution
    if min(n_phi, n_om) < 8:
        raise ValueError("resolution must be at least 8 per axis")
    if alpha == 0:
        raise ValueError("alpha must be nonzero")
    xs = _grid(dphi_range, int(n_phi))
    ys = _grid(omega_range, int(n_om))
    pts = [(float(x), float(y), alpha) for x in xs for y in ys]
    eff = np.array(_ordered_map(_map_point, pts, workers)).reshape(len(xs), len(ys))
    i, j = np.unravel_index(int(np.argmax(eff)), eff.shape)
    return EfficiencyMap(dphi_grid=xs, domega1_grid=ys, eff=eff,
                         argmax=(float(xs[i]), float(ys[j]), float(eff[i, j])), alpha=alpha)
