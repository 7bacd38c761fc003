"""Operator content of the two-atom, bidirectionally cascaded waveguide network.

Local basis order is ``|gg>, |ge>, |eg>, |ee>`` with the first label for atom 1.
The symmetric basis is ``|G>=|gg>, |D>, |B>, |E>=|ee>`` with
``|D> = (|ge> + |eg>)/sqrt2`` and ``|B> = (|ge> - |eg>)/sqrt2``.

All rates are in units of the atomic decay rate, amplitudes in sqrt(rate).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import qmat
from .errors import ValidityConditionError

SQRT2 = math.sqrt(2.0)

# single-atom operators, index 0 = |g>
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
# sign chosen so that -omega*sigma_z/2 puts |e> above |g>
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)

SM1 = np.kron(SIGMA_MINUS, I2)
SM2 = np.kron(I2, SIGMA_MINUS)
SZ1 = np.kron(SIGMA_Z, I2)
SZ2 = np.kron(I2, SIGMA_Z)

KET_G = np.array([1, 0, 0, 0], dtype=complex)
KET_D = np.array([0, 1, 1, 0], dtype=complex) / SQRT2
KET_B = np.array([0, 1, -1, 0], dtype=complex) / SQRT2
KET_E = np.array([0, 0, 0, 1], dtype=complex)

#: columns are |G>, |D>, |B>, |E> written in the local basis
SYM_BASIS = np.column_stack([KET_G, KET_D, KET_B, KET_E])

#: slow-subspace projector |G><G| + |D><D| (local basis)
SLOW_PROJECTOR = np.outer(KET_G, KET_G.conj()) + np.outer(KET_D, KET_D.conj())
FAST_PROJECTOR = I4 - SLOW_PROJECTOR

# reduced 2x2 operators on the slow subspace, order (|G>, |D>)
SIGMA_MINUS_SLOW = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_Z_SLOW = np.diag([1.0, -1.0]).astype(complex)
SIGMA_X_SLOW = SIGMA_MINUS_SLOW + SIGMA_MINUS_SLOW.T


@dataclass(frozen=True)
class DiodeParams:
    """Physical knobs of the two-atom diode.

    ``domega1``/``domega2`` are atomic detunings from the carrier,
    ``dphi = phi - pi`` is the excess propagation phase between the atoms and
    ``alpha``/``beta`` are the coherent amplitudes incident from the left and
    from the right.
    """

    gamma1: float = 1.0
    gamma2: float = 1.0
    domega1: float = 0.0
    domega2: float = 0.0
    dphi: float = 0.0
    alpha: complex = 0.0
    beta: complex = 0.0

    def __post_init__(self):
        if not (self.gamma1 > 0 and self.gamma2 > 0):
            raise ValueError("gamma1 and gamma2 must be positive")
        for name in ("gamma1", "gamma2", "domega1", "domega2", "dphi", "alpha", "beta"):
            if not cmath.isfinite(complex(getattr(self, name))):
                raise ValueError(f"{name} must be finite")

    @classmethod
    def optimal(cls, delta: float, alpha: complex = 0.0, beta: complex = 0.0, **kw):
        """The maximally asymmetric slice: atom 1 detuned by ``-delta``, atom 2
        resonant and ``phi = pi - delta``."""
        return cls(domega1=-delta, domega2=0.0, dphi=-delta, alpha=alpha, beta=beta, **kw)

    @property
    def phi(self) -> float:
        return math.pi + self.dphi

    def with_drive(self, alpha: complex = 0.0, beta: complex = 0.0) -> "DiodeParams":
        return replace(self, alpha=alpha, beta=beta)

    @property
    def input_fluxes(self):
        return abs(self.alpha) ** 2, abs(self.beta) ** 2


@dataclass(frozen=True)
class SLHTriple:
    """(S, L, H) for one network.

    ``s`` is carried for completeness only: the coherent sources are already
    cascaded into ``l`` and ``h``, so nothing downstream reads it.
    ``l[0]`` is the right-moving output channel, ``l[1]`` the left-moving one.
    """

    s: np.ndarray
    l: list
    h: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        h = qmat.as_matrix(self.h, "h")
        if not qmat.is_hermitian(h, 1e-12):
            raise ValueError("Hamiltonian is not Hermitian within 1e-12")
        for op in self.l:
            if np.shape(op) != h.shape:
                raise ValueError("Lindblad operator dimension differs from the Hamiltonian")

    @property
    def dim(self) -> int:
        return self.h.shape[0]

    @property
    def l_right(self) -> np.ndarray:
        return self.l[0]

    @property
    def l_left(self) -> np.ndarray:
        return self.l[1]


def atom_operators(p: DiodeParams):
    """Per-atom Hamiltonians and collapse operators ``(H1, H2, L1, L2)``."""
    h1 = -p.domega1 * SZ1 / 2
    h2 = -p.domega2 * SZ2 / 2
    l1 = math.sqrt(p.gamma1 / 2) * SM1
    l2 = math.sqrt(p.gamma2 / 2) * SM2
    return h1, h2, l1, l2


def _hermitize(h):
    return (h + h.conj().T) / 2


def build_cascade(p: DiodeParams) -> SLHTriple:
    """Cascaded SLH triple: total Hamiltonian plus the right- and left-moving
    output operators, each carrying its coherent-drive offset."""
    h1, h2, l1, l2 = atom_operators(p)
    a, b = complex(p.alpha), complex(p.beta)
    ep = cmath.exp(1j * p.phi)
    d = qmat.dagger
    h = (h1 + h2
         - 0.5j * (a * d(l1) - a.conjugate() * l1)
         - 0.5j * (b * d(l2) - b.conjugate() * l2)
         - 0.5j * (ep * d(l2) @ (l1 + a * I4) - ep.conjugate() * (d(l1) + a.conjugate() * I4) @ l2)
         - 0.5j * (ep * d(l1) @ (l2 + b * I4) - ep.conjugate() * (d(l2) + b.conjugate() * I4) @ l1))
    l_right = l2 + ep * l1 + ep * a * I4
    l_left = l1 + ep * l2 + ep * b * I4
    return SLHTriple(s=np.eye(2, dtype=complex), l=[l_right, l_left], h=_hermitize(h),
                     meta={"params": p, "basis": "local"})


class Refactored(NamedTuple):
    h0: np.ndarray
    hc: np.ndarray
    hd: np.ndarray
    lbar: list

    @property
    def h(self) -> np.ndarray:
        return self.h0 + self.hc + self.hd

    def as_triple(self) -> SLHTriple:
        return SLHTriple(s=np.eye(2, dtype=complex), l=list(self.lbar), h=_hermitize(self.h))


def refactor(t: SLHTriple, p: DiodeParams) -> Refactored:
    """Split the cascaded dynamics into bare atoms, field-mediated exchange,
    coherent drive and two drive-free decay channels.

    The resulting master equation equals the cascaded one; the output
    operators of ``t`` are still needed for field amplitudes and fluxes.
    """
    if t.dim != 4:
        raise ValueError("refactor expects the 4-dimensional two-atom triple")
    h1, h2, l1, l2 = atom_operators(p)
    a, b = complex(p.alpha), complex(p.beta)
    phi = p.phi
    ep = cmath.exp(1j * phi)
    sp1, sp2 = SM1.conj().T, SM2.conj().T
    h0 = h1 + h2
    hc = 0.5 * math.sqrt(p.gamma1 * p.gamma2) * math.sin(phi) * (SM1 @ sp2 + sp1 @ SM2)
    hd = (1j * math.sqrt(p.gamma1 / 2) * ((a.conjugate() + ep.conjugate() * b.conjugate()) * SM1
                                          - (a + ep * b) * sp1)
          + 1j * math.sqrt(p.gamma2 / 2) * ((b.conjugate() + ep.conjugate() * a.conjugate()) * SM2
                                            - (b + ep * a) * sp2))
    lbar1 = l1 + ep * l2
    lbar2 = l2 + ep * l1
    return Refactored(h0=h0, hc=hc, hd=hd, lbar=[lbar1, lbar2])


def to_symmetric_basis(m) -> np.ndarray:
    """Express a local-basis 4x4 operator in the ``G, D, B, E`` basis."""
    m = qmat.as_matrix(m)
    if m.shape != (4, 4):
        raise ValueError(f"expected a 4x4 operator, got {m.shape}")
    return SYM_BASIS.conj().T @ m @ SYM_BASIS


def from_symmetric_basis(m) -> np.ndarray:
    m = qmat.as_matrix(m)
    if m.shape != (4, 4):
        raise ValueError(f"expected a 4x4 operator, got {m.shape}")
    return SYM_BASIS @ m @ SYM_BASIS.conj().T


def bright_dark_rates(p: DiodeParams):
    """Decay rates of ``|B>`` and ``|D>`` through the drive-free channels alone.

    With ``eps = (1 + e^{i phi})/2`` the summed dissipators are
    ``2|1-eps|^2 D[s_B] + 2|eps|^2 D[s_D]`` (equal couplings). The dark rate
    here ignores the detuning-induced mixing with ``|B>``, which contributes a
    second, equal share once ``|B>`` is eliminated.
    """
    if not math.isclose(p.gamma1, p.gamma2):
        raise ValueError("bright/dark rates are defined for equal couplings")
    eps = (1 + cmath.exp(1j * p.phi)) / 2
    g = p.gamma1
    return 2 * g * abs(1 - eps) ** 2, 2 * g * abs(eps) ** 2


@dataclass(frozen=True)
class EliminationParts:
    """Intermediate blocks of the elimination, kept for validity checks."""

    k: np.ndarray
    y: np.ndarray
    a: np.ndarray
    b: np.ndarray
    y_tilde: np.ndarray
    f: list
    g: list
    k_tilde: np.ndarray
    l_tilde_full: list


def elimination_parts(t: SLHTriple, slow_projector=None) -> EliminationParts:
    p0 = SLOW_PROJECTOR if slow_projector is None else qmat.as_matrix(slow_projector)
    p1 = np.eye(t.dim) - p0
    k = -(1j * t.h + 0.5 * sum(qmat.dagger(op) @ op for op in t.l))
    y = p1 @ k @ p1
    a = p1 @ k @ p0 + p0 @ k @ p1
    b = p0 @ k @ p0
    yt = qmat.subspace_pseudo_inverse(y, p1)
    fs = [p1 @ op @ p1 + p0 @ op @ p1 for op in t.l]
    gs = [p1 @ op @ p0 + p0 @ op @ p0 for op in t.l]
    kt = p0 @ (b - a @ yt @ a) @ p0
    lt = [(g - f @ yt @ a) @ p0 for f, g in zip(fs, gs)]
    return EliminationParts(k=k, y=y, a=a, b=b, y_tilde=yt, f=fs, g=gs, k_tilde=kt, l_tilde_full=lt)


def validity_residuals(parts: EliminationParts, slow_projector=None) -> dict:
    p0 = SLOW_PROJECTOR if slow_projector is None else qmat.as_matrix(slow_projector)
    return {
        "Y P0": float(np.max(np.abs(parts.y @ p0))),
        "F_k P0": float(max(np.max(np.abs(f @ p0)) for f in parts.f)),
        "P0 A P0": float(np.max(np.abs(p0 @ parts.a @ p0))),
    }


def adiabatic_eliminate(t: SLHTriple, slow_projector=None, tol: float = 1e-8) -> SLHTriple:
    """Eliminate the fast subspace of ``t`` and return the slow-subspace triple.

    Uses ``K~ = P0 (B - A Y~ A) P0`` and ``L~_k = (G_k - F_k Y~ A) P0``, then
    reads ``H~`` off ``K~ = -(i H~ + 1/2 sum L~^dag L~)``. Operators are
    reduced to the 2x2 block on the slow subspace; with the default projector
    the block is ordered ``(|G>, |D>)``.

    ``H~`` keeps whatever multiple of the identity the elimination produces
    (an energy offset ``delta/2`` on the optimal slice); compare Hamiltonians
    modulo the identity.
    """
    if slow_projector is None:
        p0 = SLOW_PROJECTOR
        q = np.column_stack([KET_G, KET_D])
    else:
        p0 = qmat.as_matrix(slow_projector, "slow_projector")
        if p0.shape != (t.dim, t.dim):
            raise ValueError("projector dimension differs from the triple")
        if np.max(np.abs(p0 @ p0 - p0)) > 1e-12 or not qmat.is_hermitian(p0, 1e-12):
            raise ValueError("slow_projector must be a Hermitian idempotent")
        q = qmat.range_basis(p0)
    parts = elimination_parts(t, p0)
    residuals = validity_residuals(parts, p0)
    bad = {k: v for k, v in residuals.items() if v > tol}
    if bad:
        raise ValidityConditionError(f"elimination validity conditions violated: {bad}",
                                     invariant="slh.adiabatic_eliminate:validity")
    lt = parts.l_tilde_full
    h_full = 1j * (parts.k_tilde + 0.5 * sum(qmat.dagger(op) @ op for op in lt))
    anti = float(np.max(np.abs(h_full - h_full.conj().T)))
    qd = q.conj().T
    h_red = _hermitize(qd @ h_full @ q)
    l_red = [qd @ op @ q for op in lt]
    leak = float(max(np.max(np.abs((np.eye(t.dim) - p0) @ op)) for op in lt))
    return SLHTriple(s=np.eye(2, dtype=complex), l=l_red, h=h_red,
                     meta={"basis": "slow(G,D)", "antihermitian_residue": anti,
                           "fast_leakage": leak, "validity": residuals})


def eliminated_closed_form(alpha: complex, beta: complex, delta: float) -> SLHTriple:
    """Lowest-order eliminated operators on the optimal slice, basis ``(|G>, |D>)``."""
    a, b = complex(alpha), complex(beta)
    h = a * delta * SIGMA_X_SLOW / 2
    l_right = 0.5 * ((a - b) * SIGMA_Z_SLOW - (a + b) * I2)
    l_left = 1j * delta * SIGMA_MINUS_SLOW - 0.5 * ((a - b) * SIGMA_Z_SLOW + (a + b) * I2)
    return SLHTriple(s=np.eye(2, dtype=complex), l=[l_right, l_left], h=_hermitize(h),
                     meta={"basis": "slow(G,D)", "closed_form": True})


def traceless(h) -> np.ndarray:
    h = qmat.as_matrix(h)
    return h - np.trace(h) / h.shape[0] * np.eye(h.shape[0])
