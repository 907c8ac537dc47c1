from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any

from slmadapt.errors import ValidationError

LR_SCHEDULERS = ("cosine", "linear", "constant", "constant_with_warmup")

# Finetuning hyperparameters reported for the 8B student model.
TABLE2_DEFAULTS: dict[str, Any] = {
    "max_sequence_length": 4096,
    "per_device_batch_size": 2,
    "gradient_accumulation_steps": 4,
    "warmup_steps": 5,
    "lr_scheduler": "cosine",
    "epochs": 4,
}


class ConfigError(ValidationError):
    pass


@dataclass(frozen=True)
class TrainerConfig:
    """Trainer hyperparameters.

    ``learning_rate`` has no default on purpose: the reported setup omits it,
    and :func:`slmadapt.trainer.run_plan` refuses to start until it is set.
    ``epochs`` is the single-stage default; each plan stage carries its own
    epoch count, which takes precedence.
    """

    model_id: str = "meta-llama/Llama-3.1-8B"
    learning_rate: float | None = None
    max_sequence_length: int = 4096
    per_device_batch_size: int = 2
    gradient_accumulation_steps: int = 4
    warmup_steps: int = 5
    lr_scheduler: str = "cosine"
    epochs: int = 4
    seed: int = 0
    reuse_optimizer_state: bool = False
    restart_schedule: bool = True

    def __post_init__(self) -> None:
        if self.lr_scheduler not in LR_SCHEDULERS:
            raise ConfigError(f"lr_scheduler must be one of {LR_SCHEDULERS}, got {self.lr_scheduler!r}")
        for name in ("max_sequence_length", "per_device_batch_size", "gradient_accumulation_steps", "epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.warmup_steps < 0:
            raise ConfigError("warmup_steps must be non-negative")
        if self.learning_rate is not None and not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")

    @property
    def effective_batch_size(self) -> int:
        return self.per_device_batch_size * self.gradient_accumulation_steps

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def steps_per_epoch(n_instances: int, config: TrainerConfig) -> int:
    return math.ceil(n_instances / config.effective_batch_size)
