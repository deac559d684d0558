"""Subspace measures and their analytic gradients.

Five measures between equal-order subspaces, all functions of the n x n
product A = Q1^T Q2 whose singular values are the principal-angle cosines:

    projection (squared)        n - ||A||_F^2            = ||sin theta||^2
    Fubini-Study                arccos |det A|           = arccos(prod cos)
    Binet-Cauchy dist (squared) 2 - 2 |det A|
    projection kernel (squared) 2n - 2 ||A||_F^2
    Binet-Cauchy kernel         det(A A^T)               = prod cos^2

The first four shrink to 0 as subspaces coincide; the kernel grows to 1, so
it carries a similarity orientation that callers must account for.

Gradients are taken with respect to the orthonormal representatives and
pulled back through the positive-diagonal QR factorization to the mapped
(pre-normalization) matrices, then to the map itself. Everything works on
n x n or d x n blocks; D x D projectors are never formed.
"""

from __future__ import annotations

import enum
import math
import warnings
from collections import Counter
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    NotSquare,
    SingularPair,
    SingularR,
)
from .manifold import GrassmannPoint, MappingMatrix, RANK_RTOL, orthonormalize

DET_TOL = 1e-12

# guarded roundoff events, keyed by guard name; inspect via health_counters()
_health: Counter = Counter()


def health_counters() -> dict[str, int]:
    return dict(_health)


def reset_health_counters() -> None:
    _health.clear()


class Orientation(enum.Enum):
    DISTANCE_LIKE = "distance"
    SIMILARITY_LIKE = "similarity"


class MeasureKind(enum.Enum):
    """The five measures; enum values double as CLI codes."""

    PROJECTION_SQ = "p"
    FUBINI_STUDY = "fs"
    BINET_CAUCHY_DIST_SQ = "bc"
    PROJECTION_KERNEL_DIST_SQ = "pk"
    BINET_CAUCHY_KERNEL = "bck"

    @property
    def orientation(self) -> Orientation:
        if self is MeasureKind.BINET_CAUCHY_KERNEL:
            return Orientation.SIMILARITY_LIKE
        return Orientation.DISTANCE_LIKE


@dataclass(frozen=True)
class PairGradient:
    """Partial derivatives of a measure w.r.t. both orthonormal arguments."""

    g1: np.ndarray
    g2: np.ndarray


def _as_basis(x) -> np.ndarray:
    if isinstance(x, GrassmannPoint):
        return x.basis
    return np.asarray(x, dtype=np.float64)


def _product(q1, q2) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    b1, b2 = _as_basis(q1), _as_basis(q2)
    if b1.shape != b2.shape:
        raise DimensionMismatch(f"shapes differ: {b1.shape} vs {b2.shape}")
    return b1.T @ b2, b1, b2


def _det_and_inv(a: np.ndarray) -> tuple[float, np.ndarray]:
    """Determinant and inverse from a single LU factorization."""
    n = a.shape[0]
    with warnings.catch_warnings():
        # exact singularity is caught below via the determinant guard
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    diag = np.diag(lu)
    det = float(np.prod(diag))
    if np.count_nonzero(piv != np.arange(n)) % 2:
        det = -det
    if not math.isfinite(det) or abs(det) < DET_TOL:
        raise SingularPair(
            f"|det(Q1^T Q2)| = {abs(det):.3e} below {DET_TOL:.0e}; "
            "subspace pair too close to orthogonal for this gradient"
        )
    inv = scipy.linalg.lu_solve((lu, piv), np.eye(n), check_finite=False)
    return det, inv


def measure(kind: MeasureKind, q1, q2) -> float:
    """Evaluate one measure between two equal-shape subspace bases."""
    a, _, _ = _product(q1, q2)
    n = a.shape[0]
    if kind is MeasureKind.PROJECTION_SQ:
        return max(0.0, n - float(np.sum(a * a)))
    if kind is MeasureKind.PROJECTION_KERNEL_DIST_SQ:
        return max(0.0, 2.0 * n - 2.0 * float(np.sum(a * a)))
    absdet = abs(float(np.linalg.det(a)))
    if kind is MeasureKind.FUBINI_STUDY:
        return float(np.arccos(min(1.0, max(0.0, absdet))))
    if kind is MeasureKind.BINET_CAUCHY_DIST_SQ:
        return max(0.0, 2.0 - 2.0 * absdet)
    if kind is MeasureKind.BINET_CAUCHY_KERNEL:
        return min(1.0, max(0.0, absdet * absdet))
    raise ValueError(f"unknown measure kind: {kind!r}")


def measure_grad(kind: MeasureKind, q1, q2) -> PairGradient:
    """Analytic gradient of ``measure`` w.r.t. both orthonormal arguments.

    The determinant-based measures require A = Q1^T Q2 invertible and raise
    SingularPair otherwise; the Fubini-Study coefficient is clamped away from
    |det A| = 1 (coincident subspaces), counted under
    ``fubini_study_grad_clamped``.
    """
    a, b1, b2 = _product(q1, q2)

    if kind is MeasureKind.PROJECTION_SQ:
        g1 = 2.0 * (b1 - b2 @ (b2.T @ b1))
        g2 = 2.0 * (b2 - b1 @ (b1.T @ b2))
        return PairGradient(g1, g2)

    if kind is MeasureKind.PROJECTION_KERNEL_DIST_SQ:
        return PairGradient(-4.0 * (b2 @ (b2.T @ b1)), -4.0 * (b1 @ (b1.T @ b2)))

    det, inv = _det_and_inv(a)
    absdet_grad = abs(det) * inv.T  # d|det A| / dA

    if kind is MeasureKind.FUBINI_STUDY:
        c = abs(det)
        if c > 1.0 - DET_TOL:
            c = 1.0 - DET_TOL
            _health["fubini_study_grad_clamped"] += 1
        da = -absdet_grad / math.sqrt(1.0 - c * c)
        return PairGradient(b2 @ da.T, b1 @ da)

    if kind is MeasureKind.BINET_CAUCHY_DIST_SQ:
        da = -2.0 * absdet_grad
        return PairGradient(b2 @ da.T, b1 @ da)

    if kind is MeasureKind.BINET_CAUCHY_KERNEL:
        # det(A A^T) (A A^T)^{-1} assembled as M^T M with M = det(A) A^{-1},
        # which stays bounded as the determinant shrinks
        m = det * inv
        sym = m.T @ m
        sym = sym + sym.T
        return PairGradient(b2 @ (b2.T @ b1) @ sym, b1 @ sym @ (b1.T @ b2))

    raise ValueError(f"unknown measure kind: {kind!r}")


def atril(a: np.ndarray) -> np.ndarray:
    """Skew part assembled from the strictly lower triangle: L - L^T."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSquare(f"need a square matrix, got {a.shape}")
    low = np.tril(a, -1)
    return low - low.T


def btril(a: np.ndarray) -> np.ndarray:
    """Adjoint of ``atril``: strictly-lower(A) - strictly-lower(A^T)."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSquare(f"need a square matrix, got {a.shape}")
    return np.tril(a, -1) - np.tril(a.T, -1)


def qr_pullback(
    x: np.ndarray,
    q: np.ndarray,
    r: np.ndarray,
    dq: np.ndarray,
    dr: np.ndarray | None = None,
) -> np.ndarray:
    """Pull a gradient in (Q, R) back through the QR factorization of x.

    Given x = q r (positive-diagonal convention) and dL/dQ, dL/dR, returns

        dL/dX = ((I - Q Q^T) dQbar + Q btril(Q^T dQbar)) R^{-T}
                + Q (dRbar - btril(dRbar R^T) R^{-T})

    where dQbar, dRbar are the incoming gradients. The R path is included
    for completeness; measures of the Q factor alone have dRbar = 0.
    """
    x = np.asarray(x, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    dq = np.asarray(dq, dtype=np.float64)
    if x.shape != q.shape or x.shape != dq.shape:
        raise DimensionMismatch("x, q, dq must share the m x k shape")
    k = r.shape[0]
    if r.shape != (k, k) or q.shape[1] != k:
        raise DimensionMismatch("r must be k x k matching q's column count")
    rdiag = np.abs(np.diag(r))
    if rdiag.min() <= RANK_RTOL * rdiag.max():
        raise SingularR("triangular factor numerically singular")

    def _times_rinv_t(mat: np.ndarray) -> np.ndarray:
        # mat @ R^{-T} via one triangular solve
        return scipy.linalg.solve_triangular(
            r, mat.T, lower=False, check_finite=False
        ).T

    qt_dq = q.T @ dq
    out = _times_rinv_t(dq - q @ qt_dq + q @ btril(qt_dq))
    if dr is not None:
        dr = np.asarray(dr, dtype=np.float64)
        if dr.shape != (k, k):
            raise DimensionMismatch("dr must be k x k")
        out = out + q @ (dr - _times_rinv_t(btril(dr @ r.T)))
    return out


def _as_map(w) -> np.ndarray:
    if isinstance(w, MappingMatrix):
        return w.w
    return np.asarray(w, dtype=np.float64)


def pair_grad_w(kind: MeasureKind, w, x1, x2) -> np.ndarray:
    """Ambient gradient of measure(QR(W^T x1), QR(W^T x2)) w.r.t. W.

    Chains the measure gradient through the QR normalization of each mapped
    point: dL/dW = x1 (dL/dY1)^T + x2 (dL/dY2)^T with Yi = W^T xi.
    """
    wm = _as_map(w)
    b1, b2 = _as_basis(x1), _as_basis(x2)
    if b1.shape != b2.shape:
        raise DimensionMismatch(f"point shapes differ: {b1.shape} vs {b2.shape}")
    if b1.shape[0] != wm.shape[0]:
        raise DimensionMismatch(
            f"ambient dims differ: map {wm.shape[0]}, points {b1.shape[0]}"
        )
    y1 = wm.T @ b1
    y2 = wm.T @ b2
    q1, r1 = orthonormalize(y1)
    q2, r2 = orthonormalize(y2)
    g = measure_grad(kind, q1, q2)
    dy1 = qr_pullback(y1, q1, r1, g.g1)
    dy2 = qr_pullback(y2, q2, r2, g.g2)
    return b1 @ dy1.T + b2 @ dy2.T
