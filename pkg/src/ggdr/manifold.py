"""Grassmann manifold primitives.

A point on G(n, D) is an n-dimensional linear subspace of R^D, represented by
a D x n matrix with orthonormal columns; the representative is unique up to
right-multiplication by an n x n orthogonal matrix. The search space for the
learned map is itself a Grassmannian G(d, D), so the same machinery provides
geodesics and parallel transport for the optimizer.

All types are immutable after construction and all operations are pure.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidShape,
    NumericalHealthWarning,
    RankDeficient,
)

ORTHONORMAL_TOL_POINT = 1e-10
ORTHONORMAL_TOL_MAP = 1e-8
TANGENT_TOL = 1e-8
RANK_RTOL = 1e-12


def _frozen_array(a, dtype=np.float64) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GrassmannPoint:
    """An n-dimensional subspace of R^D held as a D x n orthonormal basis."""

    basis: np.ndarray

    def __post_init__(self):
        basis = _frozen_array(self.basis)
        if basis.ndim != 2:
            raise InvalidShape(f"basis must be 2-d, got shape {basis.shape}")
        d_ambient, order = basis.shape
        if not 1 <= order < d_ambient:
            raise InvalidShape(
                f"need 1 <= n < D, got n={order}, D={d_ambient}"
            )
        gram_err = np.linalg.norm(basis.T @ basis - np.eye(order))
        if gram_err > ORTHONORMAL_TOL_POINT:
            raise InvalidShape(
                f"basis not orthonormal: ||B^T B - I||_F = {gram_err:.3e}"
            )
        object.__setattr__(self, "basis", basis)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def order(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class MappingMeta:
    """Training configuration recorded on a learned map."""

    ambient_dim: int
    target_dim: int
    order: int
    measure: object  # MeasureKind; kept loose to avoid an import cycle


@dataclass(frozen=True)
class MappingMatrix:
    """The learned D x d orthonormal map, a point on G(d, D).

    d = D is allowed (an isometry of subspaces, useful as a no-op baseline);
    training normally uses d < D.
    """

    w: np.ndarray
    meta: MappingMeta | None = None

    def __post_init__(self):
        w = _frozen_array(self.w)
        if w.ndim != 2:
            raise InvalidShape(f"map must be 2-d, got shape {w.shape}")
        d_ambient, d_target = w.shape
        if not 1 <= d_target <= d_ambient:
            raise InvalidShape(
                f"need 1 <= d <= D, got d={d_target}, D={d_ambient}"
            )
        gram_err = np.linalg.norm(w.T @ w - np.eye(d_target))
        if gram_err > ORTHONORMAL_TOL_MAP:
            raise InvalidShape(
                f"map not orthonormal: ||W^T W - I||_F = {gram_err:.3e}"
            )
        object.__setattr__(self, "w", w)

    @property
    def ambient_dim(self) -> int:
        return self.w.shape[0]

    @property
    def target_dim(self) -> int:
        return self.w.shape[1]


@dataclass(frozen=True)
class TangentVector:
    """A horizontal direction at a point of G(d, D): base^T h = 0."""

    h: np.ndarray
    base: MappingMatrix

    def __post_init__(self):
        h = _frozen_array(self.h)
        if h.shape != self.base.w.shape:
            raise DimensionMismatch(
                f"tangent shape {h.shape} != base shape {self.base.w.shape}"
            )
        drift = np.linalg.norm(self.base.w.T @ h)
        if drift > TANGENT_TOL:
            raise InvalidShape(
                f"not horizontal: ||W^T H||_F = {drift:.3e}"
            )
        object.__setattr__(self, "h", h)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.h))


def orthonormalize(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR of a full-column-rank matrix with a fixed sign convention.

    Returns (q, r) with q column-orthonormal, r upper-triangular with strictly
    positive diagonal, and q @ r == m. The positive diagonal makes the
    factorization unique, hence reproducible across calls.

    Raises RankDeficient when the smallest singular value of m falls below
    RANK_RTOL times the largest.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise InvalidShape(f"need a tall (or square) matrix, got {m.shape}")
    q, r = np.linalg.qr(m)
    # singular values of r equal those of m; r is small (k x k)
    sv = np.linalg.svd(r, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= RANK_RTOL * sv[0]:
        raise RankDeficient(
            f"numerically rank-deficient: sigma_min/sigma_max = "
            f"{0.0 if sv[0] == 0.0 else sv[-1] / sv[0]:.3e}"
        )
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs, signs[:, None] * r


def _clamped_cosines(product: np.ndarray) -> np.ndarray:
    """Singular values of a basis product, clamped into [0, 1].

    Values above 1 + 1e-8 indicate the inputs were far from orthonormal and
    trigger a health warning before clamping.
    """
    sv = np.linalg.svd(product, compute_uv=False)
    overshoot = float(sv.max(initial=0.0))
    if overshoot > 1.0 + 1e-8:
        warnings.warn(
            f"cosine overshoot {overshoot - 1.0:.3e} beyond roundoff; "
            "inputs may not be orthonormal",
            NumericalHealthWarning,
            stacklevel=3,
        )
    return np.clip(sv, 0.0, 1.0)


def principal_angles(x1: GrassmannPoint, x2: GrassmannPoint) -> np.ndarray:
    """Canonical angles between two subspaces, ascending, each in [0, pi/2].

    Cosines come from the SVD of the n x n product x1^T x2; small angles are
    re-derived from the sine route svd(x2 - x1 (x1^T x2)), whose singular
    values are sin(theta), because arccos loses half the digits near zero.
    D x D projectors are never formed.
    """
    if x1.basis.shape != x2.basis.shape:
        raise DimensionMismatch(
            f"shapes differ: {x1.basis.shape} vs {x2.basis.shape}"
        )
    product = x1.basis.T @ x2.basis
    from_cos = np.sort(np.arccos(_clamped_cosines(product)))
    residual = x2.basis - x1.basis @ product
    sines = np.clip(np.linalg.svd(residual, compute_uv=False), 0.0, 1.0)
    from_sin = np.sort(np.arcsin(sines))
    return np.where(from_cos < np.pi / 4, from_sin, from_cos)


def geodesic_distance(x1: GrassmannPoint, x2: GrassmannPoint) -> float:
    """Arc length of the shortest curve between two subspaces: ||theta||_2."""
    return float(np.linalg.norm(principal_angles(x1, x2)))


def geodesic_step(w: MappingMatrix, h: TangentVector, t: float) -> MappingMatrix:
    """Move along the exact Grassmann geodesic from w in direction h.

    With the thin SVD h = U S V^T the geodesic is
        w(t) = w V cos(S t) V^T + U sin(S t) V^T,
    re-orthonormalized afterwards to remove floating-point drift (for a
    near-orthonormal input the positive-diagonal QR is a pure correction; it
    cannot flip column signs).
    """
    if h.base.w.shape != w.w.shape:
        raise DimensionMismatch("tangent vector shaped for a different map")
    u, s, vt = np.linalg.svd(h.h, full_matrices=False)
    cos = np.cos(s * t)
    sin = np.sin(s * t)
    stepped = (w.w @ vt.T) * cos @ vt + (u * sin) @ vt
    q, _ = orthonormalize(stepped)
    return MappingMatrix(q, meta=w.meta)


def parallel_transport(
    hmove: TangentVector, w0: MappingMatrix, hdir: TangentVector, t: float
) -> TangentVector:
    """Transport hmove along the geodesic from w0 in direction hdir.

    Uses the closed form associated with the exact geodesic: with
    hdir = U S V^T,
        tau(hmove) = hmove + ((-w0 V sin(S t) + U cos(S t)) - U) U^T hmove.
    The result is horizontal at the geodesic endpoint and preserves the
    Frobenius norm (transport is an isometry).
    """
    if hmove.h.shape != w0.w.shape or hdir.h.shape != w0.w.shape:
        raise DimensionMismatch("transport arguments have inconsistent shapes")
    w1 = geodesic_step(w0, hdir, t)
    u, s, vt = np.linalg.svd(hdir.h, full_matrices=False)
    ut_h = u.T @ hmove.h
    rotated = (-(w0.w @ vt.T) * np.sin(s * t) + u * np.cos(s * t)) @ ut_h
    moved = hmove.h - u @ ut_h + rotated
    # re-projection removes O(eps) drift so the result satisfies the
    # horizontality invariant at the corrected endpoint
    moved = moved - w1.w @ (w1.w.T @ moved)
    return TangentVector(moved, base=w1)


def project_tangent(w: MappingMatrix, ambient: np.ndarray) -> TangentVector:
    """Project an ambient D x d matrix onto the horizontal space at w."""
    ambient = np.asarray(ambient, dtype=np.float64)
    if ambient.shape != w.w.shape:
        raise DimensionMismatch(
            f"ambient shape {ambient.shape} != map shape {w.w.shape}"
        )
    return TangentVector(ambient - w.w @ (w.w.T @ ambient), base=w)


def random_point(ambient_dim: int, order: int, seed: int) -> GrassmannPoint:
    """Seeded uniform-ish random subspace: QR of a standard normal matrix."""
    if not 1 <= order < ambient_dim:
        raise InvalidShape(f"need 1 <= n < D, got n={order}, D={ambient_dim}")
    rng = np.random.default_rng(seed)
    q, _ = orthonormalize(rng.standard_normal((ambient_dim, order)))
    return GrassmannPoint(q)
