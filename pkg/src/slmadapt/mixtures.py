"""Declarative training plans for the three finetuning strategies.

* M1 baseline: one stage on the original pairs, 4 epochs.
* M2 continued: original pairs for 2 epochs, then synthetic pairs for
  2 more epochs starting from the stage-1 weights.
* M3 multi-source: one 4-epoch stage over original plus every synthetic set.

Plans only reference splits (name, content digest, optional path); the
trainer resolves them at run time and refuses a digest mismatch.
"""

from __future__ import annotations

import hashlib
import json
import random
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from slmadapt.data_core import DatasetSplit, Provenance, QAPair, merge_splits
from slmadapt.errors import ValidationError


class Strategy(str, Enum):
    M1_BASELINE = "M1_baseline"
    M2_CONTINUED = "M2_continued"
    M3_MULTISOURCE = "M3_multisource"
    CUSTOM = "custom"


class InitFrom(str, Enum):
    BASE_MODEL = "base_model"
    PREVIOUS_STAGE = "previous_stage"


class Role(str, Enum):
    ORIGINAL = "original"
    SYNTHETIC = "synthetic"
    MIXED = "mixed"


class PlanValidationError(ValidationError):
    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("invalid training plan: " + "; ".join(self.violations))


class MissingAnswers(ValidationError):
    pass


@dataclass(frozen=True)
class SplitRef:
    name: str
    digest: str
    role: Role
    path: str | None = None

    @classmethod
    def of(cls, split: DatasetSplit, path: str | Path | None = None) -> SplitRef:
        return cls(split.name, split.digest(), split_role(split), None if path is None else str(path))


@dataclass(frozen=True)
class MixtureEntry:
    split: SplitRef
    instances: int


@dataclass(frozen=True)
class TrainingStage:
    stage_index: int
    mixture: tuple[MixtureEntry, ...]
    epochs: int
    init_from: InitFrom

    @property
    def instances(self) -> int:
        return sum(m.instances for m in self.mixture)


@dataclass(frozen=True)
class TrainingPlan:
    plan_id: str
    strategy: Strategy
    stages: tuple[TrainingStage, ...]
    seed: int = 0
    resume_from: str | None = None
    notes: Mapping[str, Any] = field(default_factory=dict, compare=False, hash=False)

    @property
    def total_epochs(self) -> int:
        return sum(s.epochs for s in self.stages)

    def to_dict(self) -> dict[str, Any]:
        return {
            "plan_id": self.plan_id,
            "strategy": self.strategy.value,
            "seed": self.seed,
            "resume_from": self.resume_from,
            "stages": [
                {
                    "stage_index": s.stage_index,
                    "epochs": s.epochs,
                    "init_from": s.init_from.value,
                    "mixture": [
                        {
                            "split": m.split.name,
                            "digest": m.split.digest,
                            "role": m.split.role.value,
                            "path": m.split.path,
                            "instances": m.instances,
                        }
                        for m in s.mixture
                    ],
                }
                for s in self.stages
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> TrainingPlan:
        try:
            stages = tuple(
                TrainingStage(
                    stage_index=int(s["stage_index"]),
                    epochs=int(s["epochs"]),
                    init_from=InitFrom(s["init_from"]),
                    mixture=tuple(
                        MixtureEntry(SplitRef(m["split"], m["digest"], Role(m["role"]), m.get("path")), int(m["instances"]))
                        for m in s["mixture"]
                    ),
                )
                for s in data["stages"]
            )
            return cls(
                plan_id=data["plan_id"],
                strategy=Strategy(data["strategy"]),
                stages=stages,
                seed=int(data.get("seed", 0)),
                resume_from=data.get("resume_from"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed plan document: {exc}") from exc

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def save_plan(plan: TrainingPlan, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(plan.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_plan(path: str | Path) -> TrainingPlan:
    return TrainingPlan.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def split_role(split: DatasetSplit) -> Role:
    kinds = {p.provenance for p in split.pairs}
    if kinds == {Provenance.ORIGINAL}:
        return Role.ORIGINAL
    if kinds == {Provenance.SYNTHETIC}:
        return Role.SYNTHETIC
    return Role.MIXED


def _require_trainable(split: DatasetSplit) -> None:
    if not split.pairs:
        raise ValidationError(f"split {split.name!r} has no QA pairs")
    missing = [p.pair_id for p in split.pairs if p.answer is None]
    if missing:
        raise MissingAnswers(f"split {split.name!r} has {len(missing)} pairs without answers (first: {missing[0]!r})")


def _entry(split: DatasetSplit, paths: Mapping[str, str] | None) -> MixtureEntry:
    return MixtureEntry(SplitRef.of(split, (paths or {}).get(split.name)), len(split.pairs))


def _checked(plan: TrainingPlan) -> TrainingPlan:
    report = validate_plan(plan)
    if not report.ok:
        raise PlanValidationError(report.violations)
    return plan


def plan_m1(
    original: DatasetSplit, *, epochs: int = 4, seed: int = 0, plan_id: str = "m1",
    paths: Mapping[str, str] | None = None,
) -> TrainingPlan:
    _require_trainable(original)
    stage = TrainingStage(1, (_entry(original, paths),), epochs, InitFrom.BASE_MODEL)
    return _checked(TrainingPlan(plan_id, Strategy.M1_BASELINE, (stage,), seed))


def plan_m2(
    original: DatasetSplit,
    synthetic: DatasetSplit,
    *,
    stage_epochs: tuple[int, int] = (2, 2),
    seed: int = 0,
    plan_id: str = "m2",
    resume_from: str | None = None,
    paths: Mapping[str, str] | None = None,
) -> TrainingPlan:
    """Two chained stages; ``resume_from`` names an existing stage-1 checkpoint to reuse."""
    _require_trainable(original)
    _require_trainable(synthetic)
    stages = (
        TrainingStage(1, (_entry(original, paths),), stage_epochs[0], InitFrom.BASE_MODEL),
        TrainingStage(2, (_entry(synthetic, paths),), stage_epochs[1], InitFrom.PREVIOUS_STAGE),
    )
    return _checked(TrainingPlan(plan_id, Strategy.M2_CONTINUED, stages, seed, resume_from))


def plan_m3(
    original: DatasetSplit,
    synthetic_sets: Sequence[DatasetSplit],
    *,
    epochs: int = 4,
    seed: int = 0,
    plan_id: str = "m3",
    paths: Mapping[str, str] | None = None,
) -> TrainingPlan:
    """One stage over the union; synthetic entries are ordered by (name, digest)."""
    sources = [original, *sorted(synthetic_sets, key=lambda s: (s.name, s.digest()))]
    for split in sources:
        _require_trainable(split)
    names = [s.name for s in sources]
    if len(set(names)) != len(names):
        raise ValidationError(f"split names must be distinct within a mixture: {names}")
    merge_splits(sources, plan_id)  # raises on pair_id collisions or conflicting contexts
    strategy = Strategy.M3_MULTISOURCE if synthetic_sets else Strategy.CUSTOM
    stage = TrainingStage(1, tuple(_entry(s, paths) for s in sources), epochs, InitFrom.BASE_MODEL)
    return _checked(TrainingPlan(plan_id, strategy, (stage,), seed))


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def _roles(stage: TrainingStage) -> set[Role]:
    return {m.split.role for m in stage.mixture}


def validate_plan(plan: TrainingPlan) -> ValidationReport:
    """Collect every structural and strategy violation (never raises)."""
    v: list[str] = []
    if not plan.stages:
        v.append("plan has no stages")
    for pos, stage in enumerate(plan.stages, start=1):
        if stage.stage_index != pos:
            v.append(f"stage at position {pos} has stage_index {stage.stage_index}")
        expected = InitFrom.BASE_MODEL if pos == 1 else InitFrom.PREVIOUS_STAGE
        if stage.init_from is not expected:
            v.append(f"broken stage chain: stage {pos} init_from={stage.init_from.value}, expected {expected.value}")
        if stage.epochs < 1:
            v.append(f"stage {pos} has non-positive epochs {stage.epochs}")
        if not stage.mixture:
            v.append(f"stage {pos} has an empty mixture")
        for m in stage.mixture:
            if m.instances < 1:
                v.append(f"stage {pos} mixture entry {m.split.name!r} has {m.instances} instances")
        names = [m.split.name for m in stage.mixture]
        if len(set(names)) != len(names):
            v.append(f"stage {pos} lists a split more than once")

    stages = plan.stages
    if plan.strategy is Strategy.M1_BASELINE:
        if len(stages) != 1:
            v.append(f"M1 requires exactly 1 stage, got {len(stages)}")
        elif _roles(stages[0]) != {Role.ORIGINAL} or len(stages[0].mixture) != 1:
            v.append("M1 stage must train on the original split only")
    elif plan.strategy is Strategy.M2_CONTINUED:
        if len(stages) != 2:
            v.append(f"M2 requires exactly 2 stages, got {len(stages)}")
        else:
            if _roles(stages[0]) != {Role.ORIGINAL}:
                v.append("M2 stage 1 must train on original data only")
            if _roles(stages[1]) != {Role.SYNTHETIC}:
                v.append("M2 stage 2 must train on synthetic data only")
    elif plan.strategy is Strategy.M3_MULTISOURCE:
        if len(stages) != 1:
            v.append(f"M3 requires exactly 1 stage, got {len(stages)}")
        else:
            roles = [m.split.role for m in stages[0].mixture]
            if roles.count(Role.ORIGINAL) != 1:
                v.append("M3 stage must include exactly one original split")
            if Role.SYNTHETIC not in roles or Role.MIXED in roles:
                v.append("M3 stage must combine the original split with synthetic splits only")
    return ValidationReport(tuple(v))


def stage_examples(stage: TrainingStage, splits: Mapping[str, DatasetSplit], seed: int) -> list[tuple[str, QAPair]]:
    """Resolve a stage's mixture to (context text, pair) examples in shuffled order.

    The shuffle is seeded by ``(seed, stage_index)`` so every run of a plan
    sees the same order.
    """
    examples: list[tuple[str, QAPair]] = []
    for entry in stage.mixture:
        split = splits.get(entry.split.name)
        if split is None:
            raise ValidationError(f"stage {stage.stage_index} needs split {entry.split.name!r}, which was not supplied")
        if split.digest() != entry.split.digest:
            raise ValidationError(f"split {entry.split.name!r} does not match the digest recorded in the plan")
        if len(split.pairs) != entry.instances:
            raise ValidationError(
                f"split {entry.split.name!r} has {len(split.pairs)} pairs, plan expects {entry.instances}"
            )
        texts = split.context_by_id
        examples.extend((texts[p.context_id].text, p) for p in split.pairs)
    random.Random(f"{seed}:{stage.stage_index}").shuffle(examples)
    return examples
