"""Fair binary classification with an embedded distraction module.

A small fully connected classifier hosts a block of layers whose parameters are
trained by a second optimizer against a group-fairness loss, alternating with
ordinary cross-entropy updates of everything else.
"""

from .data import Dataset, Schema, SynthSpec, bias_oracle, load_csv, split, synth_generate
from .errors import ConfigError, ContractError, DataError, DistractionError, DomainError, MetricError, ShapeError
from .losses import GROUP_GAP, PROTECTED_NLL, bce_loss, fairness_loss
from .metrics import MetricsReport, area_over_curve, evaluate
from .model import ModelConfig, build_model, partition_params, predict_proba, preset_config
from .sweep import ParetoPoint, SweepSpec, pareto_front, run_sweep, summarize
from .trainer import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ContractError", "DataError", "Dataset", "DistractionError", "DomainError",
    "GROUP_GAP", "MetricError", "MetricsReport", "ModelConfig", "PROTECTED_NLL", "ParetoPoint",
    "Schema", "ShapeError", "SweepSpec", "SynthSpec", "TrainConfig", "area_over_curve", "bce_loss",
    "bias_oracle", "build_model", "evaluate", "fairness_loss", "load_csv", "pareto_front",
    "partition_params", "predict_proba", "preset_config", "run_sweep", "split", "summarize",
    "synth_generate", "train",
]
