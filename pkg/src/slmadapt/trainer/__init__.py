from slmadapt.trainer.backends import (
    AdapterTrainingBackend,
    MockTrainingBackend,
    ModelArtifact,
    StageJob,
    TrainingBackend,
    UnknownArtifact,
)
from slmadapt.trainer.config import TABLE2_DEFAULTS, ConfigError, TrainerConfig, steps_per_epoch
from slmadapt.trainer.harness import RunResult, StageFailed, predict, predict_split, run_plan

__all__ = [
    "AdapterTrainingBackend",
    "ConfigError",
    "MockTrainingBackend",
    "ModelArtifact",
    "RunResult",
    "StageFailed",
    "StageJob",
    "TABLE2_DEFAULTS",
    "TrainerConfig",
    "TrainingBackend",
    "UnknownArtifact",
    "predict",
    "predict_split",
    "run_plan",
    "steps_per_epoch",
]
