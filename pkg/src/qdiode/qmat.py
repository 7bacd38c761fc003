"""Dense complex linear algebra used by every other module.

Operators are plain ``numpy`` arrays of dtype ``complex128``; vectors are 1-D
arrays. Nothing here knows about physics.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NumericalInvariantError, RankDeficiencyError

#: eigenvector condition number above which ``expm`` stops trusting eigendecomposition
EIG_COND_LIMIT = 1e6
#: default relative null-space threshold (fraction of the largest singular value)
NULLSPACE_TOL = 1e-9


def as_matrix(a, name="matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D complex array, raising ``ValueError`` otherwise."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or 0 in m.shape:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def _square(a, name="matrix") -> np.ndarray:
    m = as_matrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    return m


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


def dagger(a) -> np.ndarray:
    return as_matrix(a).conj().T


def is_hermitian(a, tol=1e-12) -> bool:
    m = as_matrix(a)
    return m.shape[0] == m.shape[1] and np.max(np.abs(m - m.conj().T)) <= tol


class Propagator:
    """Evaluates ``expm(a * t) @ v`` for many ``t`` with one factorisation.

    The eigendecomposition of ``a`` is computed once. If the eigenvector matrix
    is too ill-conditioned (cond >= ``EIG_COND_LIMIT``) every call falls back to
    scipy's scaling-and-squaring ``expm``; that path is slower but does not
    lose accuracy near defective points.
    """

    def __init__(self, a, snap_tol: float = 0.0):
        """``snap_tol > 0`` zeroes imaginary parts (and whole eigenvalues) below
        ``snap_tol * max|eigenvalue|``. Only sensible when the spectrum is known
        to be closed under conjugation; it stops round-off phases from
        accumulating over very long times."""
        self.a = _square(a)
        w, v = np.linalg.eig(self.a)
        if snap_tol > 0:
            floor = snap_tol * max(1.0, float(np.max(np.abs(w))))
            w = np.where(np.abs(w.imag) <= floor, w.real + 0j, w)
            w = np.where(np.abs(w) <= floor, 0j, w)
        self.cond = np.linalg.cond(v)
        self.diagonalizable = bool(np.isfinite(self.cond) and self.cond < EIG_COND_LIMIT)
        if self.diagonalizable:
            self.eigvals = w
            self.eigvecs = v
            self.eigvecs_inv = np.linalg.inv(v)
        else:
            self.eigvals = w
            self.eigvecs = self.eigvecs_inv = None

    def matrix(self, t: float) -> np.ndarray:
        if self.diagonalizable:
            return (self.eigvecs * np.exp(self.eigvals * t)) @ self.eigvecs_inv
        return scipy.linalg.expm(self.a * t)

    def apply(self, vec, t: float) -> np.ndarray:
        if self.diagonalizable:
            c = self.eigvecs_inv @ vec
            return self.eigvecs @ (np.exp(self.eigvals * t) * c)
        return scipy.linalg.expm(self.a * t) @ vec

    def impose_conservation(self, row) -> "Propagator":
        """Use a conserved functional ``row`` (``row @ a == 0``) to clean the basis.

        Eigenvectors with nonzero eigenvalue are exactly annihilated by ``row``
        and the single zero mode is normalised to ``row @ v == 1``. When a slow
        mode sits close to the zero mode, plain ``eig`` mixes the two at the
        level ``eps / gap``; this removes that mixing. No-op unless the basis
        is diagonalizable with exactly one zero eigenvalue.
        """
        zero = np.nonzero(self.eigvals == 0)[0]
        if not self.diagonalizable or zero.size != 1:
            return self
        row = np.asarray(row, dtype=complex)
        v = self.eigvecs.copy()
        k = zero[0]
        v[:, k] = v[:, k] / (row @ v[:, k])
        others = np.arange(v.shape[1]) != k
        v[:, others] -= np.outer(v[:, k], row @ v[:, others])
        self.eigvecs = v
        self.eigvecs_inv = np.linalg.inv(v)
        return self

    def apply_many(self, vec, times) -> np.ndarray:
        """Rows of the result are ``expm(a * t) @ vec`` for each ``t`` in ``times``."""
        times = np.asarray(times, dtype=float)
        if self.diagonalizable:
            c = self.eigvecs_inv @ vec
            phases = np.exp(np.outer(times, self.eigvals))
            return (phases * c) @ self.eigvecs.T
        return np.array([self.apply(vec, t) for t in times])

    def integrate(self, vec, t_max: float, zero_tol: float = 1e-14) -> np.ndarray:
        """Exact ``int_0^t_max expm(a t) @ vec dt``, mode by mode."""
        if not self.diagonalizable:
            # augmented-matrix trick: the top-right block of expm([[a, v],[0, 0]] t)
            n = self.a.shape[0]
            big = np.zeros((n + 1, n + 1), dtype=complex)
            big[:n, :n] = self.a
            big[:n, n] = vec
            return scipy.linalg.expm(big * t_max)[:n, n]
        c = self.eigvecs_inv @ vec
        w = self.eigvals
        scale = max(1.0, np.max(np.abs(w)))
        small = np.abs(w) <= zero_tol * scale
        weights = np.full(w.shape, t_max, dtype=complex)
        weights[~small] = np.expm1(w[~small] * t_max) / w[~small]
        return self.eigvecs @ (weights * c)


def expm(a) -> np.ndarray:
    """Matrix exponential.

    Diagonalisation when the eigenvector condition number is below
    ``EIG_COND_LIMIT``, scaling-and-squaring otherwise.
    """
    return Propagator(a).matrix(1.0)


@dataclass(frozen=True)
class NullspaceResult:
    basis: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    tolerance_used: float = 0.0

    @property
    def dim(self) -> int:
        return len(self.basis)


def nullspace(a, tol: float = NULLSPACE_TOL) -> NullspaceResult:
    """All right-singular vectors of ``a`` whose singular value is at most
    ``tol`` times the largest one. Degenerate spaces are returned whole."""
    m = _square(a)
    if tol <= 0:
        raise ValueError("tol must be positive")
    _, s, vh = np.linalg.svd(m)
    s_max = s[0] if s.size else 0.0
    threshold = tol * s_max if s_max > 0 else tol
    basis, residuals = [], []
    for k in np.nonzero(s <= threshold)[0]:
        v = vh[k].conj()
        basis.append(v)
        residuals.append(float(np.linalg.norm(m @ v)))
    return NullspaceResult(basis=basis, residuals=residuals, tolerance_used=float(threshold))


def range_basis(projector) -> np.ndarray:
    """Orthonormal columns spanning the range of a Hermitian projector."""
    p = _square(projector, "projector")
    w, v = np.linalg.eigh((p + p.conj().T) / 2)
    return v[:, w > 0.5]


def subspace_pseudo_inverse(y, projector, rank_tol: float = 1e-12) -> np.ndarray:
    """Inverse of ``y`` restricted to the range of ``projector``.

    Returns ``yt`` with ``yt @ y == y @ yt == projector`` and
    ``yt @ (1 - projector) == 0``. ``y`` must leave the range invariant.
    """
    y = _square(y, "y")
    p = _square(projector, "projector")
    if y.shape != p.shape:
        raise ValueError("y and projector dimensions differ")
    q = range_basis(p)
    if q.shape[1] == 0:
        return np.zeros_like(y)
    leak = np.max(np.abs((np.eye(len(p)) - p) @ y @ p))
    if leak > 1e-10 * max(1.0, np.max(np.abs(y))):
        raise NumericalInvariantError(
            f"y does not map the projector range into itself (leak {leak:.3e})",
            invariant="qmat.subspace_pseudo_inverse:invariant-range")
    block = q.conj().T @ y @ q
    s = np.linalg.svd(block, compute_uv=False)
    if s[-1] <= rank_tol * max(1.0, s[0]):
        raise RankDeficiencyError(
            f"y is singular on the subspace (smallest singular value {s[-1]:.3e})",
            invariant="qmat.subspace_pseudo_inverse:rank")
    return q @ np.linalg.inv(block) @ q.conj().T
