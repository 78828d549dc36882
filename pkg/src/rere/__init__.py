"""Real-time anomaly detection for univariate streams.

Two small LSTM forecasters are retrained online on the last few points and
judged against self-adaptive three-sigma thresholds on their average
absolute relative error; a point is reported when both call it abnormal.
"""

from . import _backend
from .detector import (
    DetectorState,
    FinalRecord,
    Mode,
    Policy,
    ProbationRecord,
    ReRe,
    ReReConfig,
    StepVerdict,
    compute_aare,
    compute_threshold,
    detect,
    detector_step,
    rere_step,
)
from .eval import EvalConfig, LabelSet, MatchMode, Metrics, evaluate, fscore, trace_stats
from .ingest import DatasetFormat, Series, load_labels, parse_series
from .lstm import LstmModel, TrainConfig, TrainingWindow, init_model, predict_next, train_window

__version__ = "0.1.0"

BACKEND = _backend.DEFAULT.NAME

__all__ = [
    "BACKEND", "DatasetFormat", "DetectorState", "EvalConfig", "FinalRecord", "LabelSet",
    "LstmModel", "MatchMode", "Metrics", "Mode", "Policy", "ProbationRecord", "ReRe",
    "ReReConfig", "Series", "StepVerdict", "TrainConfig", "TrainingWindow", "compute_aare",
    "compute_threshold", "detect", "detector_step", "evaluate", "fscore", "init_model",
    "load_labels", "parse_series", "predict_next", "rere_step", "trace_stats", "train_window",
]
