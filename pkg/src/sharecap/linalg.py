"""Tolerance-aware dense Hermitian linear algebra.

Every matrix in this package is a plain complex ``numpy.ndarray``; the
helpers below enforce Hermitian symmetry on the way in and make rank and
null-space decisions against a single set of relative tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "Tolerances",
    "TOL",
    "EigenDecomposition",
    "EigenSolverError",
    "as_hermitian",
    "eigh",
    "pinv",
    "positive_part",
    "rank1_positive_part_shifted",
    "sqrt_psd",
    "rank_eps",
    "nullspace_contained",
    "null_basis",
    "range_factor",
    "is_psd",
]


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by all modules.

    ``rank`` is a relative eigenvalue cutoff, ``psd`` a relative bound on
    negative eigenvalues, ``recon`` the per-dimension reconstruction bound
    (scaled by ``m`` at the call site) and ``feas`` an absolute slack on
    trace constraints.
    """

    rank: float = 1e-10
    psd: float = 1e-9
    recon: float = 1e-9
    feas: float = 1e-8

    def recon_for(self, m: int) -> float:
        return self.recon * m


TOL = Tolerances()


class EigenDecomposition(NamedTuple):
    values: np.ndarray  # real, descending
    vectors: np.ndarray  # unitary, column i pairs with values[i]


class EigenSolverError(np.linalg.LinAlgError):
    def __init__(self, dim: int, cond: float):
        super().__init__(
            f"Hermitian eigensolver did not converge (dim={dim}, cond~{cond:.3g})"
        )
        self.dim = dim
        self.cond = cond


def as_hermitian(A) -> np.ndarray:
    """Return ``(A + A^H) / 2`` as a complex square array."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return 0.5 * (A + A.conj().T)


def eigh(A) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Ties keep the solver's output order; no phase normalisation is applied
    to the eigenvectors.
    """
    A = as_hermitian(A)
    try:
        w, U = np.linalg.eigh(A)
    except np.linalg.LinAlgError:
        with np.errstate(all="ignore"):
            cond = float(np.linalg.cond(A)) if np.all(np.isfinite(A)) else np.inf
        raise EigenSolverError(A.shape[0], cond) from None
    return EigenDecomposition(w[::-1].copy(), U[:, ::-1].copy())


def _cutoff(w: np.ndarray, tol: Tolerances) -> float:
    top = float(np.max(np.abs(w))) if w.size else 0.0
    return tol.rank * max(top, 1.0)


def _compose(U: np.ndarray, d: np.ndarray) -> np.ndarray:
    out = (U * d) @ U.conj().T
    return 0.5 * (out + out.conj().T)


def pinv(A, tol: Tolerances = TOL) -> np.ndarray:
    """Spectral Moore-Penrose pseudo-inverse of a Hermitian PSD matrix."""
    w, U = eigh(A)
    keep = w > _cutoff(w, tol)
    d = np.zeros_like(w)
    d[keep] = 1.0 / w[keep]
    return _compose(U, d)


def positive_part(A, tol: Tolerances = TOL) -> np.ndarray:
    """Keep only the positive eigenmodes of a Hermitian matrix.

    Eigenvalues at or below ``tol.rank * max(|lambda|_max, 1)`` are dropped,
    so the result is PSD and applying it twice changes nothing.
    """
    w, U = eigh(A)
    d = np.where(w > _cutoff(w, tol), w, 0.0)
    return _compose(U, d)


def rank1_positive_part_shifted(lam: float, u, tol: Tolerances = TOL) -> np.ndarray:
    """``(I - W^{-1})_+`` for the rank-one ``W = lam * u u^H``.

    Only the mode along ``u`` can be positive; the singular modes of ``W``
    are dropped rather than inverted.
    """
    if not lam > 0:
        raise ValueError(f"eigenvalue must be positive, got {lam}")
    u = np.asarray(u, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(u) - 1.0) > tol.recon_for(u.size):
        raise ValueError("u must be a unit vector")
    gain = max(1.0 - 1.0 / lam, 0.0)
    return as_hermitian(gain * np.outer(u, u.conj()))


def sqrt_psd(A, tol: Tolerances = TOL) -> np.ndarray:
    """Principal square root of a PSD matrix via its spectrum."""
    w, U = eigh(A)
    top = float(np.max(np.abs(w))) if w.size else 0.0
    if w.size and w[-1] < -tol.psd * max(top, 1.0):
        raise ValueError(f"matrix is not PSD (min eigenvalue {w[-1]:.3g})")
    return _compose(U, np.sqrt(np.clip(w, 0.0, None)))


def rank_eps(A, tol: Tolerances = TOL) -> int:
    """Number of eigenvalues above ``tol.rank * max(lambda_max, 1)``."""
    w = eigh(A).values
    if w.size == 0:
        return 0
    return int(np.count_nonzero(w > tol.rank * max(float(w[0]), 1.0)))


def null_basis(A, tol: Tolerances = TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical null space of PSD ``A``."""
    w, U = eigh(A)
    thresh = tol.rank * max(float(w[0]) if w.size else 0.0, 1.0)
    return U[:, w <= thresh]


def range_factor(A, tol: Tolerances = TOL) -> np.ndarray:
    """Thin factor ``F`` (m x r) with ``A = F F^H`` on the numerical range.

    Columns are eigenvectors scaled by the square roots of the retained
    eigenvalues, largest first.
    """
    w, U = eigh(A)
    thresh = tol.rank * max(float(w[0]) if w.size else 0.0, 1.0)
    keep = w > thresh
    return U[:, keep] * np.sqrt(w[keep])


def nullspace_contained(A, B, tol: Tolerances = TOL) -> bool:
    """True iff the null space of ``A`` lies inside the null space of ``B``.

    For Hermitian PSD inputs this is the same as ``range(B) <= range(A)``.
    Tested through ``|B P|`` with ``P`` the projector onto ``N(A)``.
    """
    A = as_hermitian(A)
    B = as_hermitian(B)
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    N = null_basis(A, tol)
    if N.shape[1] == 0:
        return True
    bmax = max(float(eigh(B).values[0]), 0.0)
    col_norms = np.linalg.norm(B @ N, axis=0)
    return bool(np.all(col_norms <= tol.rank * (1.0 + bmax)))


def is_psd(A, tol: Tolerances = TOL) -> bool:
    w = eigh(A).values
    if w.size == 0:
        return True
    return bool(w[-1] >= -tol.psd * max(float(np.max(np.abs(w))), 1.0))
