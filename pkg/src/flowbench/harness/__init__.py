"""Evaluation protocol: null distributions, replica scheme, selection,
reporting, and the command-line driver."""

from .nulls import NullDistribution, build_null, build_nulls, p_value, threshold
from .evaluate import TestOutcome, TargetSampler, evaluate_model
from .select import GridPointResult, ReplicaResult, Selection, select_best

__all__ = [
    "NullDistribution", "build_null", "build_nulls", "p_value", "threshold",
    "TestOutcome", "TargetSampler", "evaluate_model",
    "GridPointResult", "ReplicaResult", "Selection", "select_best",
]
