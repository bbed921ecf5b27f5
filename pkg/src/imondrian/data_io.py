"""Dataset ingestion, synthetic data generation, and persistence.

The model file is a self-describing text format: a one-line header carrying
magic, version, and a SHA-256 checksum of the JSON payload that follows.
Node lists are stored per tree in preorder; floats go through JSON's
shortest-round-trip encoding, so reloaded structures are bit-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError, ModelFormatError
from .evaluation import LabeledDataset
from .forest import Forest, ForestConfig, ScoreReport
from .tree import NO_NODE, MondrianTree

MODEL_MAGIC = "imondrian-forest"
MODEL_VERSION = 1


# -- CSV ingestion -------------------------------------------------------------


@dataclass(frozen=True)
class CsvSchema:
    """How to read a dataset file.

    ``label_column`` may be a header name or a 0-based column index; when
    set, that column must hold 0/1 anomaly labels and the rest are features.
    """

    delimiter: str = ","
    label_column: str | int | None = None
    header: bool = True


def _parse_feature(cell: str, row: int, col: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataFormatError(
            f"row {row}, column {col}: could not parse {cell!r} as a number"
        ) from None
    if not np.isfinite(value):
        raise DataFormatError(
            f"row {row}, column {col}: non-finite value {cell!r} rejected"
        )
    return value


def _parse_label(cell: str, row: int, col: int) -> int:
    try:
        value = float(cell)
    except ValueError:
        raise DataFormatError(
            f"row {row}, column {col}: could not parse label {cell!r}"
        ) from None
    if value not in (0.0, 1.0):
        raise DataFormatError(f"row {row}, column {col}: label must be 0 or 1, got {cell!r}")
    return int(value)


def load_csv(path, schema: CsvSchema | None = None) -> LabeledDataset | np.ndarray:
    """Read a dataset; row order is preserved.

    Returns a LabeledDataset when the schema names a label column, a plain
    (n, d) array otherwise. Every feature cell must parse as a finite real;
    failures report their row and column (1-based, counting the header).
    """
    schema = schema or CsvSchema()
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.reader(handle, delimiter=schema.delimiter)
        rows = [row for row in reader if row]

    header_row: list[str] | None = None
    if schema.header:
        if not rows:
            raise DataFormatError(f"{path}: expected a header row, file is empty")
        header_row = [cell.strip() for cell in rows[0]]
        rows = rows[1:]

    label_idx: int | None = None
    if schema.label_column is not None:
        if isinstance(schema.label_column, int):
            if schema.label_column < 0:
                raise DataFormatError(f"label column index must be >= 0, got {schema.label_column}")
            label_idx = schema.label_column
        else:
            if header_row is None:
                raise DataFormatError("label column given by name but the schema has no header")
            try:
                label_idx = header_row.index(schema.label_column)
            except ValueError:
                raise DataFormatError(
                    f"label column {schema.label_column!r} not in header {header_row}"
                ) from None

    offset = 2 if schema.header else 1  # 1-based data row numbering in messages
    features: list[list[float]] = []
    labels: list[int] = []
    for i, row in enumerate(rows):
        row_no = i + offset
        if label_idx is not None and label_idx >= len(row):
            raise DataFormatError(f"row {row_no}: no column {label_idx} for the label")
        feats = []
        for j, cell in enumerate(row):
            if label_idx is not None and j == label_idx:
                labels.append(_parse_label(cell.strip(), row_no, j + 1))
            else:
                feats.append(_parse_feature(cell.strip(), row_no, j + 1))
        if features and len(feats) != len(features[0]):
            raise DataFormatError(
                f"row {row_no}: {len(feats)} features, expected {len(features[0])}"
            )
        features.append(feats)

    data = np.asarray(features, dtype=float) if features else np.zeros((0, 0))
    if label_idx is None:
        return data
    return LabeledDataset(points=data, labels=np.asarray(labels), name=path.stem)


# -- synthetic data ------------------------------------------------------------

# per-kind inlier sampler and "core" region outliers must avoid:
# (sampler(rng, n) -> points, core(points) -> bool mask, axis extent of core)


def _blob(center, sigma, rng, n):
    return rng.normal(0.0, sigma, size=(n, 2)) + np.asarray(center, dtype=float)


def _min_center_distance(points, centers):
    pts = np.asarray(points, dtype=float)
    dists = [np.linalg.norm(pts - np.asarray(c, float), axis=1) for c in centers]
    return np.min(dists, axis=0)


_GRID_CENTERS = [(a, b) for a in (-6.0, 0.0, 6.0) for b in (-6.0, 0.0, 6.0)]

_GENERATORS = {
    "gaussian-blob": (
        lambda rng, n: _blob((0.0, 0.0), 1.0, rng, n),
        lambda pts: _min_center_distance(pts, [(0.0, 0.0)]) <= 4.0,
        4.0,
    ),
    "two-blobs": (
        lambda rng, n: np.concatenate(
            [_blob((-4.0, 0.0), 1.0, rng, n // 2), _blob((4.0, 0.0), 1.0, rng, n - n // 2)]
        ),
        lambda pts: _min_center_distance(pts, [(-4.0, 0.0), (4.0, 0.0)]) <= 3.5,
        7.5,
    ),
    "ring": (
        lambda rng, n: _ring_points(rng, n),
        lambda pts: np.abs(np.linalg.norm(pts, axis=1) - 6.0) <= 1.8,
        7.8,
    ),
    "grid-cluster": (
        lambda rng, n: _blob((0.0, 0.0), 0.6, rng, n)
        + np.asarray(_GRID_CENTERS, float)[rng.integers(0, len(_GRID_CENTERS), n)],
        lambda pts: _min_center_distance(pts, _GRID_CENTERS) <= 2.0,
        8.0,
    ),
}


def _ring_points(rng, n):
    angle = rng.uniform(0.0, 2.0 * np.pi, n)
    radius = 6.0 + rng.normal(0.0, 0.4, n)
    return np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a 2-D labeled toy dataset.

    Inliers come from the chosen shape; outliers are uniform over the
    square [-halfwidth, halfwidth]^2 minus the shape's core region.
    """

    kind: str = "gaussian-blob"
    n_inliers: int = 255
    n_outliers: int = 45
    outlier_halfwidth: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _GENERATORS:
            raise ValueError(f"unknown synthetic kind {self.kind!r}; options: {sorted(_GENERATORS)}")
        if self.n_inliers < 0 or self.n_outliers < 0:
            raise ValueError("counts must be nonnegative")
        if self.n_inliers + self.n_outliers == 0:
            raise ValueError("dataset would be empty")
        extent = _GENERATORS[self.kind][2]
        if self.outlier_halfwidth < extent:
            raise ValueError(
                f"outlier box halfwidth {self.outlier_halfwidth} does not enclose "
                f"the inlier support (needs >= {extent})"
            )


def gen_synthetic(spec: SyntheticSpec) -> LabeledDataset:
    """Deterministic synthetic dataset: inliers labeled 0, outliers 1."""
    rng = np.random.default_rng(spec.seed)
    sampler, core, _ = _GENERATORS[spec.kind]
    inliers = sampler(rng, spec.n_inliers) if spec.n_inliers else np.zeros((0, 2))
    outliers = []
    hw = spec.outlier_halfwidth
    attempts = 0
    while len(outliers) < spec.n_outliers:
        draw = rng.uniform(-hw, hw, size=(max(spec.n_outliers, 8), 2))
        keep = draw[~core(draw)]
        outliers.extend(keep.tolist())
        attempts += 1
        if attempts > 1000:
            raise RuntimeError("outlier rejection sampling failed to make progress")
    outliers = np.asarray(outliers[: spec.n_outliers], dtype=float).reshape(spec.n_outliers, 2)
    points = np.concatenate([inliers, outliers])
    labels = np.concatenate(
        [np.zeros(spec.n_inliers, dtype=np.int64), np.ones(spec.n_outliers, dtype=np.int64)]
    )
    return LabeledDataset(points=points, labels=labels, name=f"synthetic-{spec.kind}")


# -- model persistence ---------------------------------------------------------


def _serialize_tree(tree: MondrianTree) -> dict:
    nodes = []
    stack = [tree.root]
    while stack:
        idx = stack.pop()
        if tree.is_leaf(idx):
            nodes.append(
                {
                    "kind": "leaf",
                    "population": int(tree.population[idx]),
                    "box_min": tree.box_min[idx].tolist(),
                    "box_max": tree.box_max[idx].tolist(),
                }
            )
        else:
            nodes.append(
                {
                    "kind": "internal",
                    "split_dim": int(tree.split_dim[idx]),
                    "split_val": float(tree.split_val[idx]),
                    "split_time": float(tree.split_time[idx]),
                    "population": int(tree.population[idx]),
                    "box_min": tree.box_min[idx].tolist(),
                    "box_max": tree.box_max[idx].tolist(),
                }
            )
            stack.append(int(tree.right[idx]))
            stack.append(int(tree.left[idx]))
    return {"rng_state": tree.rng.bit_generator.state, "nodes": nodes}


def _deserialize_tree(blob: dict, dim: int) -> MondrianTree:
    nodes = blob.get("nodes")
    if not nodes:
        raise ModelFormatError("tree with no nodes")
    tree = MondrianTree(dim, rng=None, capacity=len(nodes))
    try:
        tree.rng.bit_generator.state = blob["rng_state"]
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelFormatError(f"bad generator state: {exc}") from exc
    pending: list[tuple[int, bool]] = [(NO_NODE, False)]
    for record in nodes:
        if not pending:
            raise ModelFormatError("extra nodes after the preorder walk completed")
        parent, is_right = pending.pop()
        idx = tree._new_node()
        tree.parent[idx] = parent
        if parent == NO_NODE:
            tree.root = idx
        elif is_right:
            tree.right[parent] = idx
        else:
            tree.left[parent] = idx
        try:
            tree.population[idx] = int(record["population"])
            tree.box_min[idx] = np.asarray(record["box_min"], dtype=float)
            tree.box_max[idx] = np.asarray(record["box_max"], dtype=float)
            if record["kind"] == "internal":
                tree.split_dim[idx] = int(record["split_dim"])
                tree.split_val[idx] = float(record["split_val"])
                tree.split_time[idx] = float(record["split_time"])
                pending.append((idx, True))
                pending.append((idx, False))
            elif record["kind"] != "leaf":
                raise ModelFormatError(f"unknown node kind {record['kind']!r}")
        except (KeyError, ValueError) as exc:
            raise ModelFormatError(f"malformed node record: {exc}") from exc
    if pending:
        raise ModelFormatError("truncated node list: children missing")
    return tree


def save_model(forest: Forest, path) -> None:
    """Persist a forest; the round trip is structurally and bit exact."""
    payload = {
        "n_effective": forest.n_effective,
        "psi": forest.psi,
        "seed": forest.seed,
        "dim": forest.dim,
        "num_trees": forest.num_trees,
        "trees": [_serialize_tree(tree) for tree in forest.trees],
    }
    text = json.dumps(payload, separators=(",", ":"), allow_nan=False)
    digest = hashlib.sha256(text.encode()).hexdigest()
    header = f"{MODEL_MAGIC} v{MODEL_VERSION} sha256={digest}\n"
    Path(path).write_text(header + text)


def load_model(path) -> Forest:
    """Load a persisted forest, verifying magic, version, and checksum."""
    raw = Path(path).read_text()
    newline = raw.find("\n")
    if newline < 0:
        raise ModelFormatError(f"{path}: not a model file (missing header)")
    header, text = raw[:newline], raw[newline + 1 :]
    parts = header.split()
    if len(parts) != 3 or parts[0] != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: bad magic {header!r}")
    if parts[1] != f"v{MODEL_VERSION}":
        raise ModelFormatError(f"{path}: unsupported version {parts[1]}")
    if not parts[2].startswith("sha256="):
        raise ModelFormatError(f"{path}: malformed checksum field")
    expected = parts[2][len("sha256=") :]
    actual = hashlib.sha256(text.encode()).hexdigest()
    if actual != expected:
        raise ModelFormatError(f"{path}: checksum mismatch, file is corrupt")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: payload is not valid JSON: {exc}") from exc
    try:
        dim = int(payload["dim"])
        trees = [_deserialize_tree(blob, dim) for blob in payload["trees"]]
        psi = payload["psi"]
        forest = Forest(
            trees=trees,
            n_effective=int(payload["n_effective"]),
            psi=None if psi is None else int(psi),
            seed=int(payload["seed"]),
            dim=dim,
            config=ForestConfig(
                num_trees=int(payload["num_trees"]),
                psi=None if psi is None else int(psi),
                seed=int(payload["seed"]),
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed payload: {exc}") from exc
    if len(forest.trees) != payload["num_trees"]:
        raise ModelFormatError(f"{path}: tree count does not match header")
    return forest


# -- result export -------------------------------------------------------------


def write_scores(path, reports: list[ScoreReport], labels, mode: str) -> None:
    """Score export: one ``index,score,label,mode`` row per point.

    Scores are written with shortest-round-trip precision so identical runs
    produce byte-identical files.
    """
    labels = np.asarray(labels, dtype=np.int64)
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["index", "score", "label", "mode"])
        for rep, label in zip(reports, labels):
            writer.writerow([rep.point_index, repr(rep.score), int(label), mode])


def write_rows(path, rows: list[dict]) -> None:
    """Generic result-table export; column order is fixed by the first row."""
    if not rows:
        Path(path).write_text("")
        return
    columns = list(rows[0].keys())
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row[c]) for c in columns])


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)
