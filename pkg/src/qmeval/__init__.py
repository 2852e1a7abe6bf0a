"""Software product quality evaluation over hierarchical quality models."""

from .evaluate import EvaluationResult, aggregate, evaluate, grade, normalize
from .ingest import MeasurementDataset, check_completeness, findings_to_measures, load_dataset
from .model import DEFAULT_GRADING_KEY, QualityModel, applicable_activities, validate_model
from .modelfile import load_model, parse_model, serialize_model
from .sensitivity import SensitivityPlan, perturb_weight, sweep
from .weights import ComparisonMatrix, consistency_ratio, derive_weights, rebalance

__all__ = [
    "DEFAULT_GRADING_KEY",
    "ComparisonMatrix",
    "EvaluationResult",
    "MeasurementDataset",
    "QualityModel",
    "SensitivityPlan",
    "aggregate",
    "applicable_activities",
    "check_completeness",
    "consistency_ratio",
    "derive_weights",
    "evaluate",
    "findings_to_measures",
    "grade",
    "load_dataset",
    "load_model",
    "normalize",
    "parse_model",
    "perturb_weight",
    "rebalance",
    "serialize_model",
    "sweep",
    "validate_model",
]
