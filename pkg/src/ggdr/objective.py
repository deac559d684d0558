"""Affinity-weighted objective over reduced subspaces, and its gradients.

Each sample X_i on G(n, D) is mapped to Y_i = W^T X_i and re-orthonormalized
by a positive-diagonal QR at every evaluation, so measures always act on
valid points of G(n, d). The cost sums the chosen measure over the signed
neighbor-graph pairs; the kernel measure's contribution is negated by default
so that within-class similarity is maximized rather than minimized.

The Euclidean gradient chains each pair's measure gradient through the QR
normalization and back to W; by linearity the pullback runs once per sample,
not once per pair. Projecting onto the horizontal space at W gives the
Riemannian gradient used by the optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .affinity import AffinityGraph
from .errors import DimensionMismatch, InvalidShape, RankDeficient, SingularPair
from .manifold import GrassmannPoint, MappingMatrix, TangentVector, orthonormalize
from .metrics import (
    MeasureKind,
    Orientation,
    _as_map,
    measure,
    measure_grad,
    qr_pullback,
)

# fail loudly when more than this fraction of weighted pairs is skipped
MAX_SKIP_FRACTION = 0.01


@dataclass(frozen=True)
class Problem:
    """One training instance: points, neighbor graph, measure, target dim."""

    points: tuple[GrassmannPoint, ...]
    graph: AffinityGraph
    kind: MeasureKind
    target_dim: int
    sign_flip_similarity: bool = True
    _pairs: tuple[tuple[int, int, int], ...] = field(init=False, repr=False)

    def __post_init__(self):
        points = tuple(self.points)
        if not points:
            raise InvalidShape("need at least one point")
        shape = points[0].basis.shape
        for i, p in enumerate(points):
            if p.basis.shape != shape:
                raise DimensionMismatch(
                    f"point {i} has shape {p.basis.shape}, expected {shape}"
                )
        if self.graph.size != len(points):
            raise DimensionMismatch(
                f"graph size {self.graph.size} != {len(points)} points"
            )
        ambient, order = shape
        if not order <= self.target_dim <= ambient:
            raise InvalidShape(
                f"need n <= d <= D, got n={order}, d={self.target_dim}, D={ambient}"
            )
        gm = self.graph.g
        pairs = tuple(
            (i, j, int(gm[i, j]))
            for i in range(len(points))
            for j in range(i + 1, len(points))
            if gm[i, j] != 0
        )
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "_pairs", pairs)

    @property
    def ambient_dim(self) -> int:
        return self.points[0].ambient_dim

    @property
    def order(self) -> int:
        return self.points[0].order

    @property
    def pair_sign(self) -> float:
        """Global orientation factor applied to every pair term."""
        if (
            self.sign_flip_similarity
            and self.kind.orientation is Orientation.SIMILARITY_LIKE
        ):
            return -1.0
        return 1.0


def reduce_point(w: MappingMatrix, x: GrassmannPoint) -> GrassmannPoint:
    """Map one point to the reduced manifold: the Q factor of QR(W^T X)."""
    if x.ambient_dim != w.ambient_dim:
        raise DimensionMismatch(
            f"ambient dims differ: map {w.ambient_dim}, point {x.ambient_dim}"
        )
    q, _ = orthonormalize(w.w.T @ x.basis)
    return GrassmannPoint(q)


def _reduce_active(wm: np.ndarray, p: Problem) -> dict[int, tuple]:
    """QR-normalize W^T X_i once for every sample that touches a pair."""
    active = sorted({i for i, j, _ in p._pairs} | {j for _, j, _ in p._pairs})
    out = {}
    for i in active:
        y = wm.T @ p.points[i].basis
        try:
            q, r = orthonormalize(y)
        except RankDeficient as exc:
            raise RankDeficient(f"sample {i}: {exc}") from exc
        out[i] = (y, q, r)
    return out


def cost(w, p: Problem) -> float:
    """Evaluate the affinity-weighted objective at w.

    Accepts a MappingMatrix or a raw D x d array (the raw form supports
    finite-difference probes, which step off the orthonormal constraint).
    """
    wm = _as_map(w)
    if wm.shape != (p.ambient_dim, p.target_dim):
        raise DimensionMismatch(
            f"map shape {wm.shape} != ({p.ambient_dim}, {p.target_dim})"
        )
    red = _reduce_active(wm, p)
    s = p.pair_sign
    total = 0.0
    for i, j, weight in p._pairs:
        total += weight * s * measure(p.kind, red[i][1], red[j][1])
    return total


def euclidean_grad(w, p: Problem) -> np.ndarray:
    """Ambient-space gradient of ``cost`` at w (a D x d matrix)."""
    _, grad, _ = cost_and_grad(w, p)
    return grad


def cost_and_grad(w, p: Problem) -> tuple[float, np.ndarray, int]:
    """Cost, Euclidean gradient, and the number of skipped singular pairs.

    Pairs whose measure gradient requires an inverse that does not exist
    numerically are skipped (their cost contribution is kept). If more than
    MAX_SKIP_FRACTION of the weighted pairs get skipped the evaluation
    aborts, since the gradient would no longer represent the objective.
    """
    wm = _as_map(w)
    if wm.shape != (p.ambient_dim, p.target_dim):
        raise DimensionMismatch(
            f"map shape {wm.shape} != ({p.ambient_dim}, {p.target_dim})"
        )
    red = _reduce_active(wm, p)
    s = p.pair_sign
    total = 0.0
    dq_acc: dict[int, np.ndarray] = {}
    skipped = 0
    for i, j, weight in p._pairs:
        qi, qj = red[i][1], red[j][1]
        total += weight * s * measure(p.kind, qi, qj)
        try:
            pg = measure_grad(p.kind, qi, qj)
        except SingularPair:
            skipped += 1
            continue
        coeff = weight * s
        if i in dq_acc:
            dq_acc[i] += coeff * pg.g1
        else:
            dq_acc[i] = coeff * pg.g1
        if j in dq_acc:
            dq_acc[j] += coeff * pg.g2
        else:
            dq_acc[j] = coeff * pg.g2

    if p._pairs and skipped > MAX_SKIP_FRACTION * len(p._pairs):
        raise SingularPair(
            f"{skipped} of {len(p._pairs)} weighted pairs skipped as singular; "
            "gradient would not represent the objective"
        )

    grad = np.zeros_like(wm)
    for i, dq in dq_acc.items():
        y, q, r = red[i]
        dy = qr_pullback(y, q, r, dq)
        grad += p.points[i].basis @ dy.T
    return total, grad, skipped


def riemannian_grad(w: MappingMatrix, eg: np.ndarray) -> TangentVector:
    """Project the ambient gradient onto the horizontal space at w.

    Computed as eg - w (w^T eg); the D x D projector is never formed.
    """
    eg = np.asarray(eg, dtype=np.float64)
    if eg.shape != w.w.shape:
        raise DimensionMismatch(f"gradient shape {eg.shape} != {w.w.shape}")
    return TangentVector(eg - w.w @ (w.w.T @ eg), base=w)
