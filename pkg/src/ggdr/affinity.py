"""Supervised neighbor graph: within-class pulls minus between-class pushes.

For each sample the kw nearest same-label samples and the kb nearest
different-label samples (under a caller-supplied dissimilarity matrix) are
marked; an edge is set when either endpoint selects the other. The combined
graph g = g_within - g_between has entries in {-1, 0, +1} because the two
graphs live on disjoint pairs.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateClass, DimensionMismatch, InvalidK, InvalidShape


@dataclass(frozen=True)
class AffinityGraph:
    """Symmetric N x N integer matrix with entries in {-1, 0, +1}."""

    g: np.ndarray
    kw: int
    kb: int

    def __post_init__(self):
        g = np.array(self.g, dtype=np.int64, copy=True)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise InvalidShape(f"graph must be square, got {g.shape}")
        if not np.array_equal(g, g.T):
            raise InvalidShape("graph must be symmetric")
        if np.any(np.diag(g) != 0):
            raise InvalidShape("graph diagonal must be zero")
        if not np.isin(g, (-1, 0, 1)).all():
            raise InvalidShape("graph entries must lie in {-1, 0, 1}")
        if not (1 <= self.kb <= self.kw):
            raise InvalidK(f"need 1 <= kb <= kw, got kw={self.kw}, kb={self.kb}")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    @property
    def size(self) -> int:
        return self.g.shape[0]

    def to_csv(self, path) -> None:
        np.savetxt(path, self.g, fmt="%d", delimiter=",")


def _class_sizes(labels) -> Counter:
    sizes = Counter(labels)
    singletons = [lab for lab, c in sizes.items() if c < 2]
    if singletons:
        raise DegenerateClass(
            f"classes with fewer than 2 members: {singletons!r}"
        )
    return sizes


def default_kw(labels) -> int:
    """Within-class neighborhood size: smallest class size minus self."""
    return min(_class_sizes(labels).values()) - 1


def _nearest(dist_row: np.ndarray, candidates: np.ndarray, k: int) -> np.ndarray:
    # stable ordering: ascending distance, then ascending sample index
    order = np.lexsort((candidates, dist_row[candidates]))
    return candidates[order[:k]]


def build_affinity(labels, dist: np.ndarray, kw: int, kb: int) -> AffinityGraph:
    """Construct the signed neighbor graph from labels and dissimilarities.

    dist must be symmetric with a zero diagonal; smaller means closer.
    Raises InvalidK when kw exceeds the smallest class size minus one (or kb
    exceeds the available cross-class candidates) and DegenerateClass when
    some class is a singleton.
    """
    labels = list(labels)
    n = len(labels)
    dist = np.asarray(dist, dtype=np.float64)
    if dist.shape != (n, n):
        raise DimensionMismatch(
            f"distance matrix {dist.shape} does not match {n} labels"
        )
    if np.any(dist < 0) or not np.allclose(dist, dist.T, atol=1e-12):
        raise InvalidShape("distance matrix must be symmetric and nonnegative")
    if np.any(np.abs(np.diag(dist)) > 1e-12):
        raise InvalidShape("distance matrix must have a zero diagonal")

    sizes = _class_sizes(labels)
    if kw < 1 or kb < 1 or kb > kw:
        raise InvalidK(f"need 1 <= kb <= kw, got kw={kw}, kb={kb}")
    smallest = min(sizes.values())
    if kw > smallest - 1:
        raise InvalidK(
            f"kw={kw} exceeds smallest class size minus one ({smallest - 1})"
        )
    # kb may exceed the cross-class candidates (e.g. a single-class dataset);
    # selection simply takes what exists

    lab_arr = np.asarray(labels, dtype=object)
    g = np.zeros((n, n), dtype=np.int64)
    idx = np.arange(n)
    for i in range(n):
        same = idx[(lab_arr == lab_arr[i]) & (idx != i)]
        other = idx[lab_arr != lab_arr[i]]
        for j in _nearest(dist[i], same, kw):
            g[i, j] = g[j, i] = 1
        for j in _nearest(dist[i], other, kb):
            g[i, j] = g[j, i] = -1
    return AffinityGraph(g, kw=kw, kb=kb)
