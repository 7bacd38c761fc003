"""Output fields, two-time correlators and free-decay emission.

Two-time correlators follow the quantum regression recipe:

    g1(tau) = Tr{L e^{L tau}(rho L^dag)} / Tr{L^dag L rho}
    g2(tau) = Tr{L^dag L e^{L tau}(L rho L^dag)} / Tr{L^dag L rho}^2

with ``rho`` stationary, so both normalisations use the steady-state flux.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qmat, slh
from .errors import UndefinedCorrelationError
from .liouville import DensityMatrix, Liouvillian, assemble, steady_state, unvec, vec

#: below this stationary flux a correlator is reported as undefined
MIN_FLUX = 1e-20
#: allowed relative imaginary residue in g2
G2_IMAG_TOL = 1e-8


def expectation_row(op) -> np.ndarray:
    """Row vector ``r`` with ``r @ vec(rho) == Tr(op @ rho)``."""
    return vec(np.asarray(op).T)


@dataclass(frozen=True)
class FluxRecord:
    amp_left: complex
    amp_right: complex
    flux_left: float
    flux_right: float

    def __post_init__(self):
        for amp, flux in ((self.amp_left, self.flux_left), (self.amp_right, self.flux_right)):
            if flux < abs(amp) ** 2 - 1e-10:
                raise ValueError("flux smaller than the coherent part")

    @property
    def total(self) -> float:
        return self.flux_left + self.flux_right


def output_fields(t: slh.SLHTriple, rho) -> FluxRecord:
    """Coherent amplitudes ``Tr{L rho}`` and fluxes ``Tr{L^dag L rho}`` of both outputs."""
    rho = rho.rho if isinstance(rho, DensityMatrix) else qmat.as_matrix(rho)
    if rho.shape != t.h.shape:
        raise ValueError("state and operator dimensions differ")
    ll, lr = t.l_left, t.l_right
    return FluxRecord(
        amp_left=complex(np.trace(ll @ rho)),
        amp_right=complex(np.trace(lr @ rho)),
        flux_left=float(np.trace(ll.conj().T @ ll @ rho).real),
        flux_right=float(np.trace(lr.conj().T @ lr @ rho).real),
    )


@dataclass(frozen=True)
class CorrelationSeries:
    tau_grid: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    g1_infinity: complex
    g2_zero: float

    def check(self, tol=1e-8):
        """Raise if the normalisation or positivity invariants fail."""
        zero = np.nonzero(self.tau_grid == 0)[0]
        if zero.size and abs(self.g1[zero[0]] - 1) > tol:
            raise UndefinedCorrelationError("g1(0) != 1", invariant="correlations:g1-normalised")
        if np.min(self.g2) < -tol:
            raise UndefinedCorrelationError("negative g2", invariant="correlations:g2-nonnegative")
        return self


def default_tau_grid(gamma_tot: float, points: int = 200, tau_min: float = 1e-2,
                     include_zero: bool = True) -> np.ndarray:
    """Log-spaced delays from ``tau_min`` to ``20/gamma_tot``, optionally led by 0."""
    grid = np.geomspace(tau_min, 20.0 / gamma_tot, points)
    return np.concatenate([[0.0], grid]) if include_zero else grid


def _regressed(prop, rho_ss, x, taus) -> np.ndarray:
    """Rows ``vec(e^{L tau} x)``.

    The stationary share ``Tr(x) rho_ss`` is added back exactly; only the
    traceless remainder goes through the eigenbasis, so slow-mode round-off
    cannot leak into the long-delay limit.
    """
    c = np.trace(x)
    rest = prop.apply_many(vec(x - c * rho_ss), taus)
    return rest + c * vec(rho_ss)[None, :]


def correlation_series(l: Liouvillian, lop, rho_ss, tau_grid, propagator=None) -> CorrelationSeries:
    """First- and second-order correlators of the output ``lop`` at the delays ``tau_grid``."""
    rho = rho_ss.rho if isinstance(rho_ss, DensityMatrix) else qmat.as_matrix(rho_ss)
    lop = qmat.as_matrix(lop, "lop")
    taus = np.asarray(tau_grid, dtype=float)
    if np.any(taus < 0):
        raise ValueError("delays must be non-negative")
    ld = lop.conj().T
    n_op = ld @ lop
    flux = float(np.trace(n_op @ rho).real)
    if flux < MIN_FLUX:
        raise UndefinedCorrelationError(f"stationary flux {flux:.3e} is zero",
                                        invariant="correlations:nonzero-flux")
    prop = propagator or l.propagator
    first = _regressed(prop, rho, rho @ ld, taus) @ expectation_row(lop)
    second = _regressed(prop, rho, lop @ rho @ ld, taus) @ expectation_row(n_op)
    g1 = first / flux
    g2c = second / flux**2
    if np.max(np.abs(g2c.imag)) > G2_IMAG_TOL * max(1.0, np.max(np.abs(g2c.real))):
        raise UndefinedCorrelationError("g2 has an imaginary part",
                                        invariant="correlations:g2-real")
    mean = complex(np.trace(lop @ rho))
    g1_inf = abs(mean) ** 2 / flux
    g2_zero = float(np.trace(n_op @ lop @ rho @ ld).real) / flux**2
    return CorrelationSeries(tau_grid=taus, g1=g1, g2=g2c.real, g1_infinity=complex(g1_inf),
                             g2_zero=g2_zero).check()


def g1(l: Liouvillian, lop, rho_ss, tau_grid) -> CorrelationSeries:
    return correlation_series(l, lop, rho_ss, tau_grid)


def g2(l: Liouvillian, lop, rho_ss, tau_grid) -> CorrelationSeries:
    return correlation_series(l, lop, rho_ss, tau_grid)


def emission_profile(p: slh.DiodeParams, rho0: DensityMatrix, t_grid) -> list:
    """Directional fluxes radiated by the undriven atoms starting from ``rho0``."""
    if p.alpha != 0 or p.beta != 0:
        raise ValueError("emission profile is defined for free decay (alpha = beta = 0)")
    t = slh.build_cascade(p)
    l = assemble(t)
    prop = l.propagator
    states = prop.apply_many(vec(rho0.rho), np.asarray(t_grid, dtype=float))
    records = []
    for v in states:
        rec = output_fields(t, unvec(v, l.dim))
        if min(rec.flux_left, rec.flux_right) < -1e-10:
            raise UndefinedCorrelationError("negative flux", invariant="correlations:flux-nonnegative")
        records.append(rec)
    return records


def integrated_emission(p: slh.DiodeParams, rho0: DensityMatrix, t_max: float) -> tuple:
    """Energy radiated left and right over ``[0, t_max]``, integrated mode by mode."""
    if p.alpha != 0 or p.beta != 0:
        raise ValueError("emission is defined for free decay (alpha = beta = 0)")
    t = slh.build_cascade(p)
    l = assemble(t)
    integral = l.propagator.integrate(vec(rho0.rho), t_max)
    left = expectation_row(t.l_left.conj().T @ t.l_left) @ integral
    right = expectation_row(t.l_right.conj().T @ t.l_right) @ integral
    return float(left.real), float(right.real)


def closed_form_limits(alpha: float, delta: float) -> dict:
    """Weak-drive closed forms for left driving on the optimal slice."""
    a2, d2 = abs(alpha) ** 2, delta**2
    return {
        "g1_ref_inf": (2 * a2 - d2) ** 2 / ((4 * a2 + d2) ** 2 - 4 * a2**2),
        "g1_trans_inf": 4 * a2 / (6 * a2 + d2),
        "g2_ref_zero": (6 * a2 + d2) / (2 * a2 + d2),
        "g2_trans_zero": 1.5 + d2 / (4 * a2),
    }


def driven_correlators(p: slh.DiodeParams, tau_grid, model: str = "full") -> dict:
    """Reflected and transmitted correlators for driving from the left.

    ``model`` is ``"full"`` for the 4-level cascade or ``"eliminated"`` for
    its slow-subspace reduction. Returns ``{"ref": series, "trans": series}``.
    """
    if p.alpha == 0 or p.beta != 0:
        raise ValueError("driven correlators need alpha != 0 and beta == 0")
    t = slh.build_cascade(p)
    if model == "eliminated":
        t = slh.adiabatic_eliminate(t)
    elif model != "full":
        raise ValueError(f"model must be 'full' or 'eliminated', got {model!r}")
    l = assemble(t)
    start = np.zeros((t.dim, t.dim))
    start[0, 0] = 1
    rho = steady_state(l, fallback_initial=DensityMatrix(start))
    return {"ref": correlation_series(l, t.l_left, rho, tau_grid),
            "trans": correlation_series(l, t.l_right, rho, tau_grid)}
