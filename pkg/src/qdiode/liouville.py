"""Liouvillian superoperators, steady states, propagation and state functionals.

Vectorisation is column stacking: ``vec(X)`` stacks the columns of ``X``, so
``vec(A X B) = (B^T kron A) vec(X)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import qmat, slh
from .errors import DegenerateSteadyStateError, NumericalInvariantError

COLUMN_STACKING = "column-stacking"

#: relative singular-value threshold used to decide whether a steady state is unique
STEADY_STATE_TOL = 1e-13
#: eigenvalue parts below this fraction of the spectral radius are treated as round-off
SPECTRUM_SNAP_TOL = 1e-14


def vec(x) -> np.ndarray:
    return np.asarray(x, dtype=complex).reshape(-1, order="F")


def unvec(v, dim: int) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape(dim, dim, order="F")


@dataclass(frozen=True)
class Liouvillian:
    dim: int
    mat: np.ndarray
    convention: str = COLUMN_STACKING
    # (H, [L...]) the superoperator was assembled from
    source: tuple = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.mat.shape != (self.dim ** 2, self.dim ** 2):
            raise ValueError("superoperator shape does not match dim")
        if self.trace_defect() > 1e-10 * max(1.0, np.max(np.abs(self.mat))):
            raise NumericalInvariantError("Liouvillian is not trace preserving",
                                          invariant="liouville.Liouvillian:trace-preservation")

    def trace_defect(self) -> float:
        return float(np.max(np.abs(vec(np.eye(self.dim)).conj() @ self.mat)))

    def apply(self, rho) -> np.ndarray:
        return unvec(self.mat @ vec(rho), self.dim)

    @cached_property
    def propagator(self) -> qmat.Propagator:
        """Eigendecomposition reused by every propagation of this generator.

        A Liouvillian's spectrum is closed under conjugation, so round-off
        imaginary parts on real eigenvalues are removed, and trace
        conservation is imposed on the eigenbasis."""
        prop = qmat.Propagator(self.mat, snap_tol=SPECTRUM_SNAP_TOL)
        return prop.impose_conservation(vec(np.eye(self.dim)).conj())


def dissipator(x) -> np.ndarray:
    """Superoperator of ``D[X]rho = X rho X^dag - {X^dag X, rho}/2``."""
    x = qmat.as_matrix(x)
    eye = np.eye(x.shape[0])
    xdx = x.conj().T @ x
    return np.kron(x.conj(), x) - 0.5 * np.kron(eye, xdx) - 0.5 * np.kron(xdx.T, eye)


def hamiltonian_part(h) -> np.ndarray:
    h = qmat.as_matrix(h)
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(eye, h) - np.kron(h.T, eye))


def assemble_from(h, lops) -> Liouvillian:
    h = qmat.as_matrix(h, "H")
    if not qmat.is_hermitian(h, 1e-10):
        raise ValueError("Hamiltonian is not Hermitian within 1e-10")
    mat = hamiltonian_part(h)
    for x in lops:
        mat = mat + dissipator(x)
    return Liouvillian(dim=h.shape[0], mat=mat, source=(h, list(lops)))


def assemble(t: slh.SLHTriple) -> Liouvillian:
    return assemble_from(t.h, t.l)


def density_violations(rho, tol_herm=1e-10, tol_trace=1e-10, tol_pos=1e-8) -> list:
    """Names of the density-matrix invariants ``rho`` breaks (empty if none)."""
    rho = np.asarray(rho, dtype=complex)
    bad = []
    if np.max(np.abs(rho - rho.conj().T)) > tol_herm:
        bad.append("hermiticity")
    if abs(np.trace(rho) - 1) > tol_trace:
        bad.append("unit-trace")
    if np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2)) < -tol_pos:
        bad.append("positivity")
    return bad


@dataclass(frozen=True)
class DensityMatrix:
    rho: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        rho = qmat.as_matrix(self.rho, "rho")
        bad = density_violations(rho)
        if bad:
            raise ValueError(f"not a density matrix: {', '.join(bad)} violated")
        object.__setattr__(self, "rho", (rho + rho.conj().T) / 2)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def pure(cls, ket):
        ket = np.asarray(ket, dtype=complex)
        ket = ket / np.linalg.norm(ket)
        return cls(np.outer(ket, ket.conj()))


def ground_state(dim: int = 4) -> DensityMatrix:
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1
    return DensityMatrix(rho)


def dark_state() -> DensityMatrix:
    return DensityMatrix.pure(slh.KET_D)


def populations(rho) -> tuple:
    """``(p_G, p_D)`` of a two-atom state given in the local basis."""
    rho = rho.rho if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if rho.shape == (2, 2):
        return float(rho[0, 0].real), float(rho[1, 1].real)
    s = slh.to_symmetric_basis(rho)
    return float(s[0, 0].real), float(s[1, 1].real)


def _normalise(rho) -> np.ndarray:
    rho = rho / np.trace(rho)
    return (rho + rho.conj().T) / 2


def propagate(l: Liouvillian, rho0: DensityMatrix, t: float, propagator=None) -> DensityMatrix:
    """``rho(t) = expm(L t) rho0``; raises if the result stops being a density matrix."""
    if t < 0:
        raise ValueError("t must be non-negative")
    prop = propagator or l.propagator
    rho = unvec(prop.apply(vec(rho0.rho), t), l.dim)
    bad = density_violations(rho)
    if bad:
        raise NumericalInvariantError(
            f"propagation to t={t:g} broke {', '.join(bad)}",
            invariant="liouville.propagate:density-matrix")
    return DensityMatrix(rho)


def slowest_rate(l: Liouvillian, n_zero: int) -> float:
    """Smallest ``|Re lambda|`` among the eigenvalues outside the null space."""
    w = np.linalg.eigvals(l.mat)
    w = w[np.argsort(np.abs(w))][n_zero:]
    if w.size == 0:
        return math.inf
    return float(np.min(np.abs(w.real)))


def steady_state(l: Liouvillian, fallback_initial: DensityMatrix | None = None,
                 tol: float = STEADY_STATE_TOL) -> DensityMatrix:
    """Stationary state of ``l``.

    A one-dimensional null space gives the answer directly. A degenerate one
    means the long-time state depends on where it starts; ``fallback_initial``
    is then projected onto the stationary modes of ``l`` (the ``t -> inf``
    limit of its evolution) and the result carries ``degenerate=True``.
    """
    ns = qmat.nullspace(l.mat, tol)
    if ns.dim == 0:
        raise NumericalInvariantError("Liouvillian has no stationary state",
                                      invariant="liouville.steady_state:nonempty-nullspace")
    if ns.dim == 1:
        rho = _normalise(unvec(ns.basis[0], l.dim))
        return DensityMatrix(rho)
    if fallback_initial is None:
        raise DegenerateSteadyStateError(
            f"null space is {ns.dim}-fold degenerate and no initial state was given",
            invariant="liouville.steady_state:unique")
    rate = slowest_rate(l, ns.dim)
    if not rate > 0 or not math.isfinite(rate):
        raise DegenerateSteadyStateError("undamped non-stationary modes; no long-time limit",
                                         invariant="liouville.steady_state:limit-exists")
    prop = l.propagator
    v0 = vec(fallback_initial.rho)
    if prop.diagonalizable:
        keep = np.argsort(np.abs(prop.eigvals))[:ns.dim]
        limit = prop.eigvecs[:, keep] @ (prop.eigvecs_inv[keep] @ v0)
    else:
        # stationary projector from the generalised null space, via a long but finite horizon
        limit = prop.apply(v0, 50.0 / rate)
    rho = unvec(limit, l.dim)
    bad = density_violations(rho)
    if bad:
        raise NumericalInvariantError(f"long-time limit broke {', '.join(bad)}",
                                      invariant="liouville.steady_state:density-matrix")
    return DensityMatrix(_normalise(rho), degenerate=True)


def stationarity_residual(l: Liouvillian, rho: DensityMatrix) -> float:
    return float(np.linalg.norm(l.mat @ vec(rho.rho)))


# --- closed-form perturbative steady states -------------------------------

_S2 = math.sqrt(2.0)


def printed_alpha_tables(a: float):
    """Left-driven order-0 and order-1 matrices exactly as published (local basis).

    The order-1 table carries ``1/a`` terms, so ``a`` must be nonzero."""
    if a == 0:
        raise ValueError("the left-driven first-order table is singular at zero drive")
    a0 = 6 + 4 * a**2 + 8 * a**4
    r0 = np.array([
        [2 + 2 * a**2 + 2 * a**4, _S2 * a * (1 + a**2), -_S2 * a * (1 + a**2), -2 * a**2],
        [_S2 * a * (1 + a**2), 2 + a**2 + 2 * a**4, 2 - a**2, -_S2 * a**3],
        [-_S2 * a * (1 + a**2), 2 - a**2, 2 + a**2 + 2 * a**4, _S2 * a**3],
        [-2 * a**2, -_S2 * a**3, _S2 * a**3, 2 * a**4],
    ]) / a0
    r1 = np.array([
        [0, _S2 / a * (1 + a**4), _S2 / a * (1 + a**2 + 2 * a**4), 2 * a**2],
        [-_S2 / a * (1 + a**4), 0, a**2, _S2 * a * (1 + 2 * a**2)],
        [-_S2 / a * (1 + a**4), -a**2, 0, _S2 * a * (1 + 2 * a**2)],
        [-2 * a**2, -_S2 * a * (1 + 2 * a**2), -_S2 * a * (1 + 2 * a**2), 0],
    ]) / a0
    return r0, r1, a0


def printed_beta_tables(b: float):
    """Right-driven order-0 and order-1 matrices exactly as published (local basis)."""
    b0 = 2 * (1 + 2 * b**2 + 4 * b**4)
    r0 = np.array([
        [2 * (1 + b**2 + b**4), -_S2 * b * (1 + b**2), _S2 * b * (1 + b**2), -2 * b**2],
        [-_S2 * b * (1 + b**2), b**2 + 2 * b**4, -b**2, _S2 * b**3],
        [_S2 * b * (1 + b**2), -b**2, b**2 + 2 * b**4, -_S2 * b**3],
        [-2 * b**2, _S2 * b**3, -_S2 * b**3, 2 * b**4],
    ]) / b0
    r1 = np.array([
        [0, 0, -_S2 * b * (1 + b**2), 2 * b**2],
        [0, 0, b**2, -_S2 * b**3],
        [_S2 * b * (1 + b**2), -2 * b**2, 0, 0],
        [-b**2, _S2 * b**3, 0, 0],
    ]) / b0
    return r0, r1, b0


def antihermitian_completion(m) -> np.ndarray:
    """Keep the upper triangle of a real matrix and mirror it with a sign flip.

    ``i * delta * m`` is then Hermitian, which the first-order correction must
    be. The published lower triangles contain a few sign/placement slips that
    this removes.
    """
    upper = np.triu(np.asarray(m, dtype=float), 1)
    return upper - upper.T


def population_ratio(case: str, amp: float) -> float:
    """Second-order relation between the ground and dark weights."""
    if case == "alpha":
        return 2 + amp**2 + 2 * amp**4
    if case == "beta":
        return amp**2 + 2 * amp**4
    raise ValueError(f"unknown case {case!r}")


@dataclass(frozen=True)
class PerturbativeSolution:
    rho0: np.ndarray
    rho1: np.ndarray
    normalizers: dict
    case: str
    delta: float
    order: int

    def __post_init__(self):
        if abs(np.trace(self.rho0) - 1) > 1e-10 or abs(np.trace(self.rho1)) > 1e-10:
            raise NumericalInvariantError("perturbative traces are off",
                                          invariant="liouville.PerturbativeSolution:trace")

    @property
    def rho(self) -> np.ndarray:
        return self.rho0 + 1j * self.delta * self.rho1


def perturbative_steady_state(p: slh.DiodeParams, order: int = 1) -> PerturbativeSolution:
    """Closed-form weak-detuning steady state on the optimal slice, single-sided drive."""
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    if not (math.isclose(p.dphi, p.domega1, abs_tol=1e-15) and p.domega2 == 0):
        raise ValueError("perturbative tables hold on the optimal slice only")
    a, b = complex(p.alpha), complex(p.beta)
    if (a != 0) == (b != 0):
        raise ValueError("exactly one of alpha, beta must be nonzero")
    amp = a if a != 0 else b
    if amp.imag != 0:
        raise ValueError("tables assume a real drive amplitude")
    amp = amp.real
    if a != 0:
        r0, r1, norm = printed_alpha_tables(amp)
        case, normalizers = "alpha", {"a0": norm}
    else:
        r0, r1, norm = printed_beta_tables(amp)
        case, normalizers = "beta", {"b0": norm}
    r1 = antihermitian_completion(r1) if order == 1 else np.zeros_like(r0)
    return PerturbativeSolution(rho0=r0.astype(complex), rho1=r1.astype(complex),
                                normalizers=normalizers, case=case, delta=-p.domega1, order=order)


# --- state functionals -----------------------------------------------------

_YY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit state."""
    rho = rho.rho if isinstance(rho, DensityMatrix) else qmat.as_matrix(rho)
    if rho.shape != (4, 4):
        raise ValueError("concurrence needs a two-qubit (4x4) state")
    r = rho @ _YY @ rho.conj() @ _YY
    lam = np.sqrt(np.abs(np.linalg.eigvals(r).real))
    lam = np.sort(lam)[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def tangle(rho) -> float:
    return concurrence(rho) ** 2


def dark_decay_rates(delta: float) -> dict:
    """Dark-state population decay rate on the optimal slice, four ways.

    ``direct`` counts only the drive-free channels in the symmetric basis;
    ``quoted`` is ``delta**2``; ``eliminated`` sums ``|<G|L~_k|D>|^2`` after
    eliminating the fast subspace; ``liouvillian`` is the slowest purely real
    nonzero eigenvalue of the mode carrying the most ``|D><D|`` weight.
    """
    p = slh.DiodeParams.optimal(delta)
    _, direct = slh.bright_dark_rates(p)
    t = slh.build_cascade(p)
    red = slh.adiabatic_eliminate(t)
    eliminated = sum(abs(op[0, 1]) ** 2 for op in red.l)
    w, v = np.linalg.eig(assemble(t).mat)
    nonzero = np.abs(w) > 1e-12 * np.max(np.abs(w))
    # the G-D coherence decays at half the rate, so pick the mode by its shape
    dd = vec(np.outer(slh.KET_D, slh.KET_D.conj())).conj()
    weight = np.abs(dd @ v) / np.linalg.norm(v, axis=0)
    k = int(np.argmax(np.where(nonzero, weight, -1.0)))
    return {
        "direct": float(direct),
        "quoted": float(delta**2),
        "eliminated": float(eliminated),
        "liouvillian": float(abs(w[k].real)),
    }
