"""Decision calibration: feature encoding, the recurrent network, training."""

from .features import (
    ConsensusMatrix,
    FeatureContext,
    FeatureVector,
    LabelTriple,
    build_consensus,
    encode_decision,
    encode_history,
    labels_array,
    make_labels,
)
from .network import (
    CalibratorParams,
    LstmState,
    PredictionTriple,
    forward_step,
    gradient_check,
    init_params,
    init_state,
    loss_and_gradients,
    lstm_forward,
    scale_features,
    zero_params,
)
from .train import SequenceExample, TrainConfig, train

__all__ = [
    "ConsensusMatrix",
    "FeatureContext",
    "FeatureVector",
    "LabelTriple",
    "build_consensus",
    "encode_decision",
    "encode_history",
    "labels_array",
    "make_labels",
    "CalibratorParams",
    "LstmState",
    "PredictionTriple",
    "forward_step",
    "gradient_check",
    "init_params",
    "init_state",
    "loss_and_gradients",
    "lstm_forward",
    "scale_features",
    "zero_params",
    "SequenceExample",
    "TrainConfig",
    "train",
]
