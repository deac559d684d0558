"""Experiment protocol: datasets, nearest-neighbor evaluation, grid search.

Feature matrices become subspaces by truncated SVD; labeled subspace
collections feed the affinity builder and optimizer; a nearest-neighbor
classifier under any of the five measures scores train/test splits before
and after reduction. A synthetic generator (class centers with tangent-space
Gaussian perturbations) provides controllable within/between-class structure
for experiments, and a finite-difference harness certifies the analytic
gradients end to end.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .affinity import AffinityGraph, build_affinity, default_kw
from .errors import (
    DegenerateClass,
    DimensionMismatch,
    EmptyTrainingSet,
    InvalidGrid,
    InvalidShape,
    NumericalHealthWarning,
    RankDeficient,
    SingularPair,
)
from .manifold import GrassmannPoint, MappingMatrix, orthonormalize
from .metrics import (
    MeasureKind,
    Orientation,
    health_counters,
    measure,
)
from .objective import Problem, cost, euclidean_grad, reduce_point
from .optimizer import OptimOptions, OptimTrace, minimize

FD_STEP = 1e-6
GRAD_TOL = 1e-5
SVD_GAP_RTOL = 1e-10


@dataclass(frozen=True)
class LabeledDataset:
    """Parallel lists of subspace points, class labels, and source ids."""

    samples: tuple[GrassmannPoint, ...]
    labels: tuple
    provenance: tuple[str, ...]

    def __post_init__(self):
        samples = tuple(self.samples)
        labels = tuple(self.labels)
        provenance = tuple(self.provenance)
        if not (len(samples) == len(labels) == len(provenance)):
            raise DimensionMismatch(
                f"got {len(samples)} samples, {len(labels)} labels, "
                f"{len(provenance)} provenance entries"
            )
        if not samples:
            raise EmptyTrainingSet("dataset is empty")
        shape = samples[0].basis.shape
        for i, s in enumerate(samples):
            if s.basis.shape != shape:
                raise DimensionMismatch(
                    f"sample {i} has shape {s.basis.shape}, expected {shape}"
                )
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "provenance", provenance)

    @property
    def size(self) -> int:
        return len(self.samples)

    @property
    def ambient_dim(self) -> int:
        return self.samples[0].ambient_dim

    @property
    def order(self) -> int:
        return self.samples[0].order

    def class_sizes(self) -> Counter:
        return Counter(self.labels)

    def subset(self, indices) -> "LabeledDataset":
        idx = list(indices)
        return LabeledDataset(
            tuple(self.samples[i] for i in idx),
            tuple(self.labels[i] for i in idx),
            tuple(self.provenance[i] for i in idx),
        )


@dataclass(frozen=True)
class SynthParams:
    """Synthetic-data knobs; ``signal_dim`` plants a recoverable structure.

    With ``signal_dim`` set, class centers are confined to a shared
    signal_dim-dimensional subspace while most of the within-class noise
    points away from it, so a dimensionality reduction that finds the signal
    subspace denoises the data. With ``signal_dim`` None the centers span the
    full space and the noise is isotropic in the tangent space.
    """

    classes: int
    samples_per_class: int
    ambient_dim: int
    order: int
    within_noise: float
    seed: int
    signal_dim: int | None = None

    def __post_init__(self):
        if min(self.classes, self.samples_per_class, self.ambient_dim, self.order) < 1:
            raise InvalidShape("all counts must be positive")
        if not self.order < self.ambient_dim:
            raise InvalidShape(
                f"need order < ambient dim, got {self.order} >= {self.ambient_dim}"
            )
        if self.within_noise < 0:
            raise InvalidShape("noise scale must be nonnegative")
        if self.signal_dim is not None and not (
            self.order < self.signal_dim <= self.ambient_dim
        ):
            raise InvalidShape(
                f"need order < signal_dim <= ambient dim, got "
                f"signal_dim={self.signal_dim}"
            )


def build_subspace(features: np.ndarray, order: int) -> GrassmannPoint:
    """Model a feature matrix as the span of its top left singular vectors.

    Keeps the first ``order`` left singular vectors (descending singular
    values).
    A vanishing gap between singular values order and order+1 leaves the
    subspace ill-determined; that case warns but still returns the
    deterministic choice. Column signs are fixed so equal inputs give
    bit-equal bases.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise InvalidShape(f"features must be 2-d, got {features.shape}")
    d_ambient, m = features.shape
    if m < order:
        raise InvalidShape(f"need at least {order} columns, got {m}")
    u, s, _ = np.linalg.svd(features, full_matrices=False)
    if s[0] == 0.0 or s[order - 1] <= 1e-12 * s[0]:
        raise RankDeficient(
            f"features have numerical rank < {order} "
            f"(sigma_{order} = {s[order - 1]:.3e})"
        )
    if order < len(s) and (s[order - 1] - s[order]) <= SVD_GAP_RTOL * s[0]:
        warnings.warn(
            f"singular values {order} and {order + 1} nearly equal "
            f"({s[order - 1]:.6g} vs {s[order]:.6g}); subspace ill-determined",
            NumericalHealthWarning,
            stacklevel=2,
        )
    basis = u[:, :order].copy()
    anchor = np.abs(basis).argmax(axis=0)
    flip = basis[anchor, np.arange(order)] < 0
    basis[:, flip] *= -1.0
    return GrassmannPoint(basis)


def pairwise_dissimilarity(samples, kind: MeasureKind) -> np.ndarray:
    """Symmetric zero-diagonal dissimilarity matrix under one measure.

    Similarity-like measures are flipped (1 - value) so that smaller always
    means closer; only the ordering matters for neighbor selection.
    """
    samples = list(samples)
    n = len(samples)
    out = np.zeros((n, n))
    flip = kind.orientation is Orientation.SIMILARITY_LIKE
    for i in range(n):
        for j in range(i + 1, n):
            v = measure(kind, samples[i], samples[j])
            out[i, j] = out[j, i] = (1.0 - v) if flip else v
    return out


def _nn_predict(train: LabeledDataset, test_samples, kind: MeasureKind):
    """Labels, training indices, and measure values of each nearest neighbor."""
    if train.size == 0:
        raise EmptyTrainingSet("no training samples")
    test_samples = list(test_samples)
    shape = train.samples[0].basis.shape
    pick_max = kind.orientation is Orientation.SIMILARITY_LIKE
    labels, indices, values = [], [], []
    for t in test_samples:
        if t.basis.shape != shape:
            raise DimensionMismatch(
                f"test sample shape {t.basis.shape}, train shape {shape}"
            )
        vals = np.array([measure(kind, t, x) for x in train.samples])
        best = int(vals.argmax() if pick_max else vals.argmin())
        labels.append(train.labels[best])
        indices.append(best)
        values.append(float(vals[best]))
    return labels, indices, values


def nn_classify(train: LabeledDataset, test_samples, kind: MeasureKind) -> list:
    """Nearest-neighbor labels under one measure; ties go to the lowest index."""
    return _nn_predict(train, test_samples, kind)[0]


def _reduce_dataset(ds: LabeledDataset, w: MappingMatrix) -> LabeledDataset:
    return LabeledDataset(
        tuple(reduce_point(w, x) for x in ds.samples), ds.labels, ds.provenance
    )


def evaluate(
    train: LabeledDataset,
    test: LabeledDataset,
    kind: MeasureKind,
    w: MappingMatrix | None = None,
) -> float:
    """Nearest-neighbor accuracy, optionally after reduction by w."""
    if w is not None:
        train = _reduce_dataset(train, w)
        test = _reduce_dataset(test, w)
    preds = nn_classify(train, test.samples, kind)
    hits = sum(1 for p, t in zip(preds, test.labels) if p == t)
    return hits / test.size


# within-class noise pointing away from the signal subspace is this much
# stronger than the in-signal component; the former is what a good map removes
OUT_OF_SIGNAL_NOISE_FACTOR = 4.0


def _unit_columns(t: np.ndarray) -> np.ndarray:
    return t / np.linalg.norm(t, axis=0, keepdims=True)


def synth_dataset(params: SynthParams) -> LabeledDataset:
    """Seeded synthetic classes: center subspaces plus tangent Gaussian spread.

    Every sample is orthonormalize(center + T) where T is a tangent
    perturbation with per-column norm ``within_noise`` (so the tilt angle per
    principal direction is roughly atan(within_noise)); zero noise returns
    each center verbatim. With ``signal_dim`` set, T gains an additional
    component of per-column norm OUT_OF_SIGNAL_NOISE_FACTOR * within_noise
    orthogonal to the signal subspace.
    """
    rng = np.random.default_rng(params.seed)
    d_ambient, order, sigma = params.ambient_dim, params.order, params.within_noise
    sig = None
    if params.signal_dim is not None and params.signal_dim < d_ambient:
        sig, _ = orthonormalize(rng.standard_normal((d_ambient, params.signal_dim)))
    samples, labels, provenance = [], [], []
    for c in range(params.classes):
        if sig is None:
            center, _ = orthonormalize(rng.standard_normal((d_ambient, order)))
        else:
            coeff, _ = orthonormalize(rng.standard_normal((params.signal_dim, order)))
            center = sig @ coeff
        for s in range(params.samples_per_class):
            if sigma == 0.0:
                basis = center
            else:
                z = rng.standard_normal((d_ambient, order))
                if sig is not None:
                    z = sig @ (sig.T @ z)
                t_in = z - center @ (center.T @ z)
                step = sigma * _unit_columns(t_in)
                if sig is not None:
                    z_out = rng.standard_normal((d_ambient, order))
                    t_out = z_out - sig @ (sig.T @ z_out)
                    step = step + (
                        OUT_OF_SIGNAL_NOISE_FACTOR * sigma * _unit_columns(t_out)
                    )
                basis, _ = orthonormalize(center + step)
            samples.append(GrassmannPoint(basis))
            labels.append(c)
            provenance.append(f"synth:c{c}:s{s}")
    return LabeledDataset(tuple(samples), tuple(labels), tuple(provenance))


def demo_analog_params(within_noise: float, seed: int) -> SynthParams:
    """Canonical small benchmark: 8 classes x 10 samples on G(6, 37).

    Class centers share a 10-dimensional signal subspace, so reductions to
    d >= 10 can in principle remove the out-of-signal noise entirely.
    """
    return SynthParams(
        classes=8,
        samples_per_class=10,
        ambient_dim=37,
        order=6,
        within_noise=within_noise,
        seed=seed,
        signal_dim=10,
    )


def fit(
    train: LabeledDataset,
    kind: MeasureKind,
    target_dim: int,
    kw: int | None = None,
    kb: int = 1,
    opts: OptimOptions | None = None,
    w0: MappingMatrix | None = None,
    sign_flip_similarity: bool = True,
) -> tuple[MappingMatrix, OptimTrace, AffinityGraph]:
    """Build the neighbor graph on the original manifold and train the map."""
    if kw is None:
        kw = default_kw(train.labels)
    dist = pairwise_dissimilarity(train.samples, kind)
    graph = build_affinity(train.labels, dist, kw=kw, kb=kb)
    problem = Problem(
        train.samples,
        graph,
        kind,
        target_dim=target_dim,
        sign_flip_similarity=sign_flip_similarity,
    )
    w, trace = minimize(problem, w0=w0, opts=opts)
    return w, trace, graph


@dataclass(frozen=True)
class GridSearchResult:
    best_dim: int
    best_kb: int
    cell_accuracies: dict


def _stratified_folds(ds: LabeledDataset, folds: int) -> np.ndarray:
    """Deterministic fold ids: the k-th member of each class goes to fold k mod folds."""
    sizes = ds.class_sizes()
    too_small = [lab for lab, c in sizes.items() if c < folds]
    if too_small:
        raise DegenerateClass(
            f"classes with fewer than {folds} samples: {too_small!r}"
        )
    fold_of = np.empty(ds.size, dtype=np.int64)
    seen: Counter = Counter()
    for i, lab in enumerate(ds.labels):
        fold_of[i] = seen[lab] % folds
        seen[lab] += 1
    return fold_of


def grid_search(
    train: LabeledDataset,
    folds: int,
    dims,
    kbs,
    kind: MeasureKind,
    opts: OptimOptions | None = None,
) -> GridSearchResult:
    """Stratified k-fold accuracy over a (target_dim, kb) grid.

    Returns the argmax cell (ties broken toward the smallest dim, then the
    smallest kb) together with all per-cell mean accuracies.
    """
    if folds < 2:
        raise InvalidGrid(f"need folds >= 2, got {folds}")
    dims = list(dims)
    kbs = list(kbs)
    if not dims or not kbs:
        raise InvalidGrid("empty grid")
    for d in dims:
        if d < train.order or d >= train.ambient_dim:
            raise InvalidGrid(
                f"target dim {d} outside [{train.order}, {train.ambient_dim})"
            )
    fold_of = _stratified_folds(train, folds)
    cells = {}
    for d in dims:
        for kb in kbs:
            accs = []
            for f in range(folds):
                tr = train.subset(np.flatnonzero(fold_of != f))
                te = train.subset(np.flatnonzero(fold_of == f))
                w, _, _ = fit(tr, kind, target_dim=d, kb=kb, opts=opts)
                accs.append(evaluate(tr, te, kind, w))
            cells[(d, kb)] = float(np.mean(accs))
    best_d, best_kb = min(cells, key=lambda k: (-cells[k], k[0], k[1]))
    return GridSearchResult(best_d, best_kb, cells)


@dataclass(frozen=True)
class GradCheckReport:
    kind: MeasureKind
    trials: int
    max_rel_error: float
    failures: int
    skipped: int
    clamp_events: int

    def ok(self) -> bool:
        return self.failures == 0


def gradient_check(
    kind: MeasureKind,
    ambient_dim: int,
    target_dim: int,
    order: int,
    trials: int,
    seed: int,
    corrupt: float = 0.0,
) -> GradCheckReport:
    """Compare the analytic map gradient with central finite differences.

    Each trial draws a random map and a random two-point problem, then probes
    every entry of the map with step FD_STEP. Trials whose analytic gradient
    hits a guarded singular configuration are skipped and counted, not
    failed. ``corrupt`` adds a constant to the analytic gradient (a test hook
    for the failure path).
    """
    rng = np.random.default_rng(seed)
    graph = AffinityGraph(np.array([[0, 1], [1, 0]]), kw=1, kb=1)
    clamp_before = health_counters().get("fubini_study_grad_clamped", 0)
    max_err = 0.0
    failures = 0
    skipped = 0
    for _ in range(trials):
        wq, _ = orthonormalize(rng.standard_normal((ambient_dim, target_dim)))
        x1, _ = orthonormalize(rng.standard_normal((ambient_dim, order)))
        x2, _ = orthonormalize(rng.standard_normal((ambient_dim, order)))
        problem = Problem(
            (GrassmannPoint(x1), GrassmannPoint(x2)),
            graph,
            kind,
            target_dim=target_dim,
        )
        try:
            analytic = euclidean_grad(wq, problem) + corrupt
        except SingularPair:
            skipped += 1
            continue
        fd = np.zeros_like(wq)
        for i in range(ambient_dim):
            for j in range(target_dim):
                wp = wq.copy()
                wp[i, j] += FD_STEP
                wm = wq.copy()
                wm[i, j] -= FD_STEP
                fd[i, j] = (cost(wp, problem) - cost(wm, problem)) / (2 * FD_STEP)
        scale = max(np.linalg.norm(analytic), np.linalg.norm(fd), 1e-10)
        rel = float(np.linalg.norm(analytic - fd) / scale)
        max_err = max(max_err, rel)
        if rel > GRAD_TOL:
            failures += 1
    clamp_after = health_counters().get("fubini_study_grad_clamped", 0)
    return GradCheckReport(
        kind=kind,
        trials=trials,
        max_rel_error=max_err,
        failures=failures,
        skipped=skipped,
        clamp_events=clamp_after - clamp_before,
    )
