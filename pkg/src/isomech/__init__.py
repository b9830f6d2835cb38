"""Isotonic Mechanism calibration of peer-review scores."""

__version__ = "0.1.0"

from isomech._backend import BACKEND
from isomech.data import (
    Author,
    Dataset,
    DatasetError,
    Ranking,
    Submission,
    coverage_stats,
    load_dataset,
    raw_score,
    write_dataset,
)
from isomech.isotonic import (
    Direction,
    OrderSpec,
    ProjectionResult,
    TieMode,
    pava,
    project_block_order,
    project_total_order,
)
from isomech.mechanism import (
    CalibrationResult,
    MechanismOptions,
    Variant,
    WeightMode,
    calibrate_author,
    combine_coauthors,
    residual_report,
    run_mechanism,
)

__all__ = [
    "BACKEND",
    "Author",
    "CalibrationResult",
    "Dataset",
    "DatasetError",
    "Direction",
    "MechanismOptions",
    "OrderSpec",
    "ProjectionResult",
    "Ranking",
    "Submission",
    "TieMode",
    "Variant",
    "WeightMode",
    "calibrate_author",
    "combine_coauthors",
    "coverage_stats",
    "load_dataset",
    "pava",
    "project_block_order",
    "project_total_order",
    "raw_score",
    "residual_report",
    "run_mechanism",
    "write_dataset",
]
