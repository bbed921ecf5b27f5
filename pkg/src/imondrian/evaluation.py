"""Evaluation machinery: ROC-AUC, stratified splits, and experiment drivers.

The streaming driver simulates a feed by cutting a labeled dataset into
stratified stages (equal anomaly counts, to within one), training on the
first stage and extending the forest with each later stage, re-scoring the
accumulated history after every step.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import StratificationError
from .forest import Forest, ForestConfig, extend_forest, rescore_window, score_all, train_batch
from .tree import as_points


@dataclass
class LabeledDataset:
    """Feature matrix plus ground-truth anomaly labels (0 normal, 1 anomaly).

    Labels are only ever used for evaluation, never for training.
    """

    points: np.ndarray
    labels: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        self.points = as_points(self.points)
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.labels.size != self.points.shape[0]:
            raise ValueError(
                f"{self.labels.size} labels for {self.points.shape[0]} points"
            )
        if self.labels.size and not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 (normal) or 1 (anomaly)")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def anomaly_count(self) -> int:
        return int(self.labels.sum())


def auc(scores, labels) -> float:
    """Probability that a random anomaly outscores a random normal point.

    Rank (Mann-Whitney) formulation with tied scores counted half, so the
    value depends only on the ordering of the scores.
    """
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels, dtype=np.int64).ravel()
    if s.size != y.size:
        raise ValueError(f"{s.size} scores for {y.size} labels")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one anomaly and one normal point")
    order = np.argsort(s, kind="mergesort")
    # average rank within each tie group (1-based)
    sorted_s = s[order]
    boundaries = np.flatnonzero(np.diff(sorted_s) != 0)
    starts = np.concatenate([[0], boundaries + 1])
    ends = np.concatenate([boundaries + 1, [s.size]])
    ranks = np.empty(s.size)
    ranks[order] = np.repeat((starts + ends + 1) / 2.0, ends - starts)
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def kfold_split(dataset: LabeledDataset, k: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold: disjoint test folds covering the dataset.

    Each class is shuffled once and dealt onto a fold cursor that keeps
    rolling across classes, so per-fold class counts differ by at most one
    and overall fold sizes stay balanced (k = n gives singleton folds).
    Deterministic under the seed.
    """
    n = dataset.n
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > n:
        raise ValueError(f"k = {k} folds but only {n} points")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    cursor = 0
    for cls in (1, 0):
        idx = np.flatnonzero(dataset.labels == cls)
        rng.shuffle(idx)
        for item in idx.tolist():
            folds[cursor % k].append(item)
            cursor += 1
    splits = []
    everything = np.arange(n)
    for f in range(k):
        test = np.sort(np.asarray(folds[f], dtype=np.int64))
        train = np.setdiff1d(everything, test, assume_unique=True)
        splits.append((train, test))
    return splits


@dataclass
class StagePlan:
    """Stratified partition of a dataset into streaming stages."""

    stages: list[np.ndarray]

    @property
    def num_stages(self) -> int:
        return len(self.stages)


def _chunk_sizes(count: int, parts: int) -> list[int]:
    base, extra = divmod(count, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def stream_stages(dataset: LabeledDataset, num_stages: int = 5, seed: int = 0) -> StagePlan:
    """Partition a labeled dataset into stages with equal anomaly counts.

    Both classes are spread to within one item per stage. Infeasible when
    there are fewer anomalies than stages.
    """
    if num_stages < 1:
        raise ValueError(f"num_stages must be >= 1, got {num_stages}")
    n_anom = dataset.anomaly_count
    if n_anom < num_stages:
        raise StratificationError(
            f"{n_anom} anomalies cannot stratify into {num_stages} stages"
        )
    rng = np.random.default_rng(seed)
    anom = np.flatnonzero(dataset.labels == 1)
    norm = np.flatnonzero(dataset.labels == 0)
    rng.shuffle(anom)
    rng.shuffle(norm)
    stages = []
    a_pos = n_pos = 0
    for a_size, n_size in zip(
        _chunk_sizes(anom.size, num_stages), _chunk_sizes(norm.size, num_stages)
    ):
        stage = np.concatenate([anom[a_pos : a_pos + a_size], norm[n_pos : n_pos + n_size]])
        a_pos += a_size
        n_pos += n_size
        rng.shuffle(stage)  # arrival order within the stage
        stages.append(stage)
    return StagePlan(stages=stages)


def config_hash(config: ForestConfig) -> str:
    payload = json.dumps(
        {"num_trees": config.num_trees, "psi": config.psi, "seed": config.seed},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


@dataclass
class ExperimentResult:
    """Per-stage metrics from one streaming run.

    ``final_scores`` are the recalculated scores of every point seen by the
    last stage (aligned with ``seen_indices``); the forest itself rides
    along for callers that want to keep scoring, e.g. a grid dump.
    """

    dataset: str
    config: ForestConfig
    stage_sizes: list[int]
    stage_auc: list[float]
    stage_seconds: list[float]
    window: int | None = None
    seen_indices: np.ndarray | None = field(default=None, repr=False)
    final_scores: np.ndarray | None = field(default=None, repr=False)
    forest: Forest | None = field(default=None, repr=False)

    @property
    def num_stages(self) -> int:
        return len(self.stage_auc)

    def to_rows(self) -> list[dict]:
        chash = config_hash(self.config)
        return [
            {
                "dataset": self.dataset,
                "unit": f"stage-{i + 1}",
                "split": "stream",
                "auc": self.stage_auc[i],
                "seconds": self.stage_seconds[i],
                "config_hash": chash,
            }
            for i in range(self.num_stages)
        ]


def run_stream_experiment(
    dataset: LabeledDataset,
    config: ForestConfig | None = None,
    num_stages: int = 5,
    seed: int = 0,
    window: int | None = None,
    n_jobs: int = 1,
) -> ExperimentResult:
    """Train on stage 1, extend with stages 2..k, re-scoring after each.

    The AUC of a stage covers every point seen up to that stage (or just
    the trailing ``window`` points when a window is set), always with
    freshly recalculated scores. Stage timings cover extension plus the
    re-score.
    """
    cfg = config or ForestConfig()
    plan = stream_stages(dataset, num_stages=num_stages, seed=seed)
    X = dataset.points
    y = dataset.labels

    stage_auc: list[float] = []
    stage_seconds: list[float] = []
    stage_sizes: list[int] = []
    seen = plan.stages[0]
    forest = None
    reports = None
    for stage_index in range(plan.num_stages):
        start = time.perf_counter()
        if stage_index == 0:
            forest = train_batch(X[seen], cfg, n_jobs=n_jobs)
        else:
            batch = plan.stages[stage_index]
            extend_forest(forest, X[batch], n_jobs=n_jobs)
            seen = np.concatenate([seen, batch])
        reports = rescore_window(forest, X[seen], window=window, n_jobs=n_jobs)
        elapsed = time.perf_counter() - start
        scored = seen[[r.point_index for r in reports]]
        stage_auc.append(auc([r.score for r in reports], y[scored]))
        stage_seconds.append(elapsed)
        stage_sizes.append(int(seen.size))
    return ExperimentResult(
        dataset=dataset.name,
        config=cfg,
        stage_sizes=stage_sizes,
        stage_auc=stage_auc,
        stage_seconds=stage_seconds,
        window=window,
        seen_indices=seen,
        final_scores=np.asarray([r.score for r in reports]),
        forest=forest,
    )


@dataclass
class FoldResult:
    """Train/test metrics for one cross-validation fold."""

    fold: int
    train_auc: float
    test_auc: float
    train_seconds: float
    test_seconds: float


def run_kfold_experiment(
    dataset: LabeledDataset,
    config: ForestConfig | None = None,
    k: int = 10,
    seed: int = 0,
    n_jobs: int = 1,
) -> list[FoldResult]:
    """Per-fold in-sample and held-out AUC with separate timings.

    Train time covers fitting plus in-sample scoring; test time covers
    scoring the held-out fold through the fitted forest (novelty path).
    """
    cfg = config or ForestConfig()
    results = []
    for fold, (train_idx, test_idx) in enumerate(kfold_split(dataset, k, seed=seed)):
        t0 = time.perf_counter()
        forest = train_batch(dataset.points[train_idx], cfg, n_jobs=n_jobs)
        train_reports = score_all(dataset.points[train_idx], forest, n_jobs=n_jobs)
        t_train = time.perf_counter() - t0
        t0 = time.perf_counter()
        test_reports = score_all(dataset.points[test_idx], forest, n_jobs=n_jobs)
        t_test = time.perf_counter() - t0
        results.append(
            FoldResult(
                fold=fold,
                train_auc=auc([r.score for r in train_reports], dataset.labels[train_idx]),
                test_auc=auc([r.score for r in test_reports], dataset.labels[test_idx]),
                train_seconds=t_train,
                test_seconds=t_test,
            )
        )
    return results


def fold_rows(dataset_name: str, config: ForestConfig, results: list[FoldResult]) -> list[dict]:
    chash = config_hash(config)
    rows = []
    for res in results:
        for split, value, seconds in (
            ("train", res.train_auc, res.train_seconds),
            ("test", res.test_auc, res.test_seconds),
        ):
            rows.append(
                {
                    "dataset": dataset_name,
                    "unit": f"fold-{res.fold + 1}",
                    "split": split,
                    "auc": value,
                    "seconds": seconds,
                    "config_hash": chash,
                }
            )
    return rows


@dataclass
class BenchPoint:
    """Median-of-repeats wall time for one (phase, n, threads) cell."""

    phase: str
    n: int
    threads: int
    seconds: list[float]

    @property
    def median_seconds(self) -> float:
        return float(np.median(self.seconds))


def measure_scaling(
    sizes: list[int],
    num_trees: int = 20,
    dim: int = 8,
    repeats: int = 3,
    extend_count: int = 256,
    threads: int = 1,
    seed: int = 0,
) -> list[BenchPoint]:
    """Time train / score / extend on uniform random data of growing size.

    Subsampling is disabled so training cost actually tracks n. Returns one
    cell per (phase, n) with all repeat timings attached.
    """
    cells: dict[tuple[str, int], BenchPoint] = {}
    for rep in range(repeats):
        data_rng = np.random.default_rng(seed + 1000 * rep)
        for n in sizes:
            X = data_rng.uniform(0.0, 1.0, size=(n, dim))
            X_new = data_rng.uniform(0.0, 1.0, size=(extend_count, dim))
            cfg = ForestConfig(num_trees=num_trees, psi=None, seed=seed + rep)

            t0 = time.perf_counter()
            forest = train_batch(X, cfg, n_jobs=threads)
            t_train = time.perf_counter() - t0

            t0 = time.perf_counter()
            score_all(X, forest, n_jobs=threads)
            t_score = time.perf_counter() - t0

            t0 = time.perf_counter()
            extend_forest(forest, X_new, n_jobs=threads)
            t_extend = time.perf_counter() - t0

            for phase, seconds in (("train", t_train), ("score", t_score), ("extend", t_extend)):
                cell = cells.setdefault(
                    (phase, n), BenchPoint(phase=phase, n=n, threads=threads, seconds=[])
                )
                cell.seconds.append(seconds)
    return list(cells.values())


def doubling_ratios(points: list[BenchPoint], phase: str) -> list[float]:
    """Median-time ratios between consecutive sizes for one phase."""
    series = sorted((p for p in points if p.phase == phase), key=lambda p: p.n)
    return [
        series[i + 1].median_seconds / series[i].median_seconds
        for i in range(len(series) - 1)
    ]
