"""matchflow: process-aware schema matching.

A matching session is a timestamp-ordered history of (pair, confidence)
decisions.  This package filters those decisions against quality-preserving
thresholds, calibrates biased confidences with a recurrent network, and
complements the accepted match with algorithmic recall boosting.
"""

from .core import (
    Attribute,
    Correspondence,
    DecisionHistory,
    DecisionRecord,
    Match,
    MatchingMatrix,
    ReferenceMatch,
    Schema,
    fmeasure,
    history_to_matrix,
    precision,
    prf,
    recall,
    validate_history,
)
from .engine import (
    EstimatorKind,
    StepVerdict,
    TargetSpec,
    ThresholdMode,
    process_history,
    static_threshold,
    step,
)
from .theory import (
    ConfidenceMatch,
    MeasureKind,
    brute_force_expectations,
    expected_fmeasure,
    expected_precision,
    in_sigma_f,
    in_sigma_p,
    is_miem_pair,
    prob_annealer_condition,
)

__version__ = "0.1.0"

__all__ = [
    "Attribute",
    "Correspondence",
    "DecisionHistory",
    "DecisionRecord",
    "Match",
    "MatchingMatrix",
    "ReferenceMatch",
    "Schema",
    "fmeasure",
    "history_to_matrix",
    "precision",
    "prf",
    "recall",
    "validate_history",
    "EstimatorKind",
    "StepVerdict",
    "TargetSpec",
    "ThresholdMode",
    "process_history",
    "static_threshold",
    "step",
    "ConfidenceMatch",
    "MeasureKind",
    "brute_force_expectations",
    "expected_fmeasure",
    "expected_precision",
    "in_sigma_f",
    "in_sigma_p",
    "is_miem_pair",
    "prob_annealer_condition",
    "__version__",
]
