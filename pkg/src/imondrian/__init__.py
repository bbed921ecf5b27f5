"""Batch and online anomaly detection with isolation-scored Mondrian trees."""

from .decision import DecisionModel, assign, assign_all, fit_kmeans2, label_threshold
from .errors import (
    DataFormatError,
    DegenerateBoxError,
    DimensionMismatchError,
    ModelFormatError,
    StratificationError,
)
from .evaluation import (
    ExperimentResult,
    LabeledDataset,
    StagePlan,
    auc,
    kfold_split,
    run_kfold_experiment,
    run_stream_experiment,
    stream_stages,
)
from .forest import (
    Forest,
    ForestConfig,
    ScoreReport,
    anomaly_score,
    c_factor,
    extend_forest,
    harmonic,
    rescore_window,
    score,
    score_all,
    train_batch,
)
from .data_io import CsvSchema, SyntheticSpec, gen_synthetic, load_csv, load_model, save_model
from .tree import (
    BoundingBox,
    MondrianTree,
    extend_tree,
    fit_tree,
    path_length,
    path_lengths,
    sample_split,
    smallest_block,
    structurally_equal,
)

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "CsvSchema",
    "DataFormatError",
    "DecisionModel",
    "DegenerateBoxError",
    "DimensionMismatchError",
    "ExperimentResult",
    "Forest",
    "ForestConfig",
    "LabeledDataset",
    "ModelFormatError",
    "MondrianTree",
    "ScoreReport",
    "StagePlan",
    "StratificationError",
    "SyntheticSpec",
    "anomaly_score",
    "assign",
    "assign_all",
    "auc",
    "c_factor",
    "extend_forest",
    "extend_tree",
    "fit_kmeans2",
    "fit_tree",
    "gen_synthetic",
    "harmonic",
    "kfold_split",
    "label_threshold",
    "load_csv",
    "load_model",
    "path_length",
    "path_lengths",
    "rescore_window",
    "run_kfold_experiment",
    "run_stream_experiment",
    "sample_split",
    "save_model",
    "score",
    "score_all",
    "smallest_block",
    "stream_stages",
    "structurally_equal",
    "train_batch",
]
