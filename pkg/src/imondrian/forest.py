"""Ensemble training, anomaly scoring, and streaming extension.

The anomaly score of a point is 2 ** (-E(l) / c(n)), where E(l) is the mean
root-to-leaf path length over the trees and c(n) is the expected path length
of a random binary search tree on n points. Deep points (hard to isolate)
score near 0, shallow points near 1, and a point exactly as deep as the
expected average scores 0.5.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .tree import MondrianTree, as_point, as_points, extend_tree, fit_tree, path_length, path_lengths

# truncated Euler-Mascheroni constant, exactly as used by the normalization
EULER_GAMMA = 0.5772156649


def harmonic(i: int) -> float:
    """Approximate i-th harmonic number: ln(i) plus the Euler constant."""
    if i < 1:
        raise ValueError(f"harmonic number needs i >= 1, got {i}")
    return math.log(i) + EULER_GAMMA


def c_factor(n: int) -> float:
    """Expected path length of an n-point random binary search tree.

    c(n) = 2 * harmonic(n - 1) - 2 * (n - 1) / n, defined for n >= 2.
    """
    if n < 2:
        raise ValueError(f"c_factor needs n >= 2, got {n}")
    return 2.0 * harmonic(n - 1) - 2.0 * (n - 1) / n


def anomaly_score(expected_path_length, n_effective: int):
    """Map an expected path length to the (0, 1] anomaly scale.

    Accepts a scalar or an array; both scalar and batch scoring funnel
    through this one expression so their results are bit-identical.
    """
    return np.exp2(-np.asarray(expected_path_length, dtype=float) / c_factor(n_effective))


@dataclass(frozen=True)
class ForestConfig:
    """Training hyperparameters.

    ``psi`` is the per-tree subsample size; ``None`` (or the CLI's 0)
    disables subsampling and every tree sees the full batch. Subsampling
    only kicks in when the batch is actually larger than ``psi``.
    """

    num_trees: int = 100
    psi: int | None = 256
    seed: int = 0

    def __post_init__(self):
        if self.num_trees < 1:
            raise ValueError(f"num_trees must be >= 1, got {self.num_trees}")
        if self.psi is not None and self.psi < 2:
            raise ValueError(f"psi must be >= 2 when subsampling, got {self.psi}")


@dataclass
class ScoreReport:
    """Anomaly score of one point plus the path-length evidence behind it."""

    point_index: int
    expected_path_length: float
    score: float


@dataclass
class Forest:
    """A trained ensemble.

    ``n_effective`` is the sample size the score normalization uses: the
    subsample size when subsampling was applied, the batch size otherwise.
    It stays fixed under streaming extension so scores remain comparable
    across stages.
    """

    trees: list[MondrianTree]
    n_effective: int
    psi: int | None
    seed: int
    dim: int
    config: ForestConfig = field(repr=False, default=None)  # type: ignore[assignment]

    @property
    def num_trees(self) -> int:
        return len(self.trees)

    @property
    def total_population(self) -> int:
        """Points inserted into each tree (batch sample plus extensions)."""
        return int(self.trees[0].population[self.trees[0].root])


def _map_trees(fn, count: int, n_jobs: int):
    """Apply fn(tree_index) for all indices, preserving index order."""
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(fn, range(count)))
    return [fn(t) for t in range(count)]


def train_batch(points, config: ForestConfig | None = None, n_jobs: int = 1) -> Forest:
    """Train a forest: one tree per independent subsample (Exp-clock cuts).

    Each tree owns a generator seeded ``config.seed + tree_index``; the
    subsample draw (when active) comes from that same generator, so a
    (data, config) pair reproduces the forest tree for tree.
    """
    cfg = config or ForestConfig()
    X = as_points(points)
    n, d = X.shape
    if n < 2:
        raise ValueError(f"training needs at least 2 points, got {n}")
    subsampling = cfg.psi is not None and n > cfg.psi
    n_effective = cfg.psi if subsampling else n

    def build(t: int) -> MondrianTree:
        gen = np.random.default_rng(cfg.seed + t)
        if subsampling:
            sample = X[gen.choice(n, size=cfg.psi, replace=False)]
        else:
            sample = X
        return fit_tree(sample, rng=gen)

    trees = _map_trees(build, cfg.num_trees, n_jobs)
    return Forest(
        trees=trees,
        n_effective=int(n_effective),
        psi=cfg.psi,
        seed=cfg.seed,
        dim=d,
        config=cfg,
    )


def score(x, forest: Forest, point_index: int = 0) -> ScoreReport:
    """Score a single point: mean path length over trees, then 2^(-E/c)."""
    pt = as_point(x, forest.dim)
    total = 0
    for tree in forest.trees:
        total += path_length(pt, tree)
    expected = total / forest.num_trees
    return ScoreReport(
        point_index=point_index,
        expected_path_length=expected,
        score=float(anomaly_score(expected, forest.n_effective)),
    )


def score_all(points, forest: Forest, n_jobs: int = 1) -> list[ScoreReport]:
    """Elementwise scores for a batch, preserving input order.

    Per-tree depth sums are accumulated in tree-index order regardless of
    worker scheduling, so results are deterministic under parallelism.
    """
    if _is_empty(points):
        return []
    X = as_points(points, forest.dim)
    per_tree = _map_trees(lambda t: path_lengths(forest.trees[t], X), forest.num_trees, n_jobs)
    depth_sum = np.zeros(X.shape[0], dtype=np.int64)
    for depths in per_tree:
        depth_sum += depths
    expected = depth_sum / forest.num_trees
    scores = anomaly_score(expected, forest.n_effective)
    return [
        ScoreReport(point_index=i, expected_path_length=float(expected[i]), score=float(scores[i]))
        for i in range(X.shape[0])
    ]


def _is_empty(points) -> bool:
    if points is None:
        return True
    if isinstance(points, np.ndarray):
        return points.size == 0
    try:
        return len(points) == 0
    except TypeError:
        return False


def extend_forest(forest: Forest, new_points, n_jobs: int = 1) -> Forest:
    """Insert streamed points one by one, in arrival order, into every tree.

    Each point is validated before any tree sees it, so a bad point aborts
    without partially mutating the forest for that point. ``n_effective``
    is deliberately left unchanged. Mutates in place and returns the forest.
    """
    if _is_empty(new_points):
        return forest
    for raw in new_points:
        x = as_point(raw, forest.dim)
        _map_trees(lambda t: extend_tree(forest.trees[t], x), forest.num_trees, n_jobs)
    return forest


def rescore_window(
    forest: Forest,
    retained_points,
    window: int | None = None,
    n_jobs: int = 1,
) -> list[ScoreReport]:
    """Recompute scores for the last ``window`` retained points (all if None).

    Pure read: point indices in the reports are absolute positions within
    the retained history.
    """
    if window is not None and window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    if _is_empty(retained_points):
        return []
    X = as_points(retained_points, forest.dim)
    n = X.shape[0]
    start = 0 if window is None else max(0, n - window)
    reports = score_all(X[start:], forest, n_jobs=n_jobs)
    for rep in reports:
        rep.point_index += start
    return reports
