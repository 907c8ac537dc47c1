"""Execute training plans stage by stage and produce prediction files."""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

from slmadapt.data_core import DatasetSplit
from slmadapt.errors import BackendError
from slmadapt.metrics.evaluate import write_predictions
from slmadapt.mixtures import PlanValidationError, TrainingPlan, stage_examples, validate_plan
from slmadapt.trainer.backends import ModelArtifact, StageJob, TrainingBackend
from slmadapt.trainer.config import ConfigError, TrainerConfig, steps_per_epoch

log = logging.getLogger(__name__)


class StageFailed(BackendError):
    def __init__(self, message: str, *, manifest: dict[str, Any], artifacts: Sequence[ModelArtifact]):
        super().__init__(message)
        self.manifest = manifest
        self.artifacts = list(artifacts)


@dataclass(frozen=True)
class RunResult:
    artifacts: tuple[ModelArtifact, ...]
    manifest: dict[str, Any]
    manifest_path: Path | None = None


def _write_manifest(run_dir: Path | None, manifest: dict[str, Any]) -> Path | None:
    if run_dir is None:
        return None
    run_dir.mkdir(parents=True, exist_ok=True)
    path = run_dir / "manifest.json"
    path.write_text(json.dumps(manifest, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _write_loss_log(run_dir: Path | None, artifact: ModelArtifact) -> str | None:
    if run_dir is None:
        return None
    name = f"loss_stage{artifact.stage_index}.jsonl"
    run_dir.mkdir(parents=True, exist_ok=True)
    with (run_dir / name).open("w", encoding="utf-8") as fh:
        for step, loss in artifact.metrics_log:
            fh.write(json.dumps({"step": step, "loss": loss}) + "\n")
    return name


def run_plan(
    plan: TrainingPlan,
    config: TrainerConfig,
    backend: TrainingBackend,
    splits: Mapping[str, DatasetSplit],
    *,
    run_dir: str | Path | None = None,
) -> RunResult:
    """Train every stage of ``plan`` in order, chaining each to its predecessor.

    The manifest (``run_dir/manifest.json``) is rewritten after every stage.
    A backend failure marks the stage ``failed`` in the manifest, skips the
    remaining stages and raises :class:`StageFailed`.
    """
    report = validate_plan(plan)
    if not report.ok:
        raise PlanValidationError(report.violations)
    if config.learning_rate is None:
        raise ConfigError("learning_rate must be set explicitly; there is no default")
    run_dir = None if run_dir is None else Path(run_dir)
    # resolve every stage up front so a bad split reference fails before training
    resolved = [stage_examples(stage, splits, plan.seed) for stage in plan.stages]

    manifest: dict[str, Any] = {
        "plan_id": plan.plan_id,
        "plan_digest": plan.digest(),
        "strategy": plan.strategy.value,
        "seed": plan.seed,
        "backend": backend.name,
        "config": config.to_dict(),
        "effective_batch_size": config.effective_batch_size,
        "stages": [],
        "status": "running",
    }
    artifacts: list[ModelArtifact] = []
    parent: ModelArtifact | None = None
    for stage, examples in zip(plan.stages, resolved):
        spe = steps_per_epoch(len(examples), config)
        entry: dict[str, Any] = {
            "stage_index": stage.stage_index,
            "init_from": stage.init_from.value,
            "instances": len(examples),
            "epochs": stage.epochs,
            "steps_per_epoch": spe,
            "total_steps": spe * stage.epochs,
            "mixture": [{"split": m.split.name, "digest": m.split.digest, "instances": m.instances} for m in stage.mixture],
        }
        manifest["stages"].append(entry)
        if stage.stage_index == 1 and plan.resume_from is not None:
            artifact = backend.load_artifact(plan.resume_from)
            entry.update(status="resumed", artifact_id=artifact.artifact_id, parent_id=artifact.parent_id)
        else:
            job = StageJob(
                plan_id=plan.plan_id,
                stage_index=stage.stage_index,
                examples=examples,
                epochs=stage.epochs,
                steps_per_epoch=spe,
                config=replace(config, epochs=stage.epochs),
                seed=plan.seed,
                parent=parent,
            )
            try:
                artifact = backend.train(job)
            except BackendError as exc:
                entry.update(status="failed", error=str(exc))
                manifest["status"] = "failed"
                manifest["failed_stage"] = stage.stage_index
                _write_manifest(run_dir, manifest)
                log.error("plan %s stage %d failed: %s", plan.plan_id, stage.stage_index, exc)
                raise StageFailed(
                    f"plan {plan.plan_id!r} failed at stage {stage.stage_index}: {exc}",
                    manifest=manifest,
                    artifacts=artifacts,
                ) from exc
            entry.update(
                status="ok",
                artifact_id=artifact.artifact_id,
                parent_id=artifact.parent_id,
                digest=artifact.digest,
                loss_log=_write_loss_log(run_dir, artifact),
            )
        artifacts.append(artifact)
        parent = artifact
        _write_manifest(run_dir, manifest)
    manifest["status"] = "ok"
    manifest["final_artifact_id"] = artifacts[-1].artifact_id
    return RunResult(tuple(artifacts), manifest, _write_manifest(run_dir, manifest))


def predict(
    artifact: ModelArtifact | str,
    questions: Sequence[tuple[str, str]],
    backend: TrainingBackend,
    *,
    pair_ids: Sequence[str] | None = None,
    out_path: str | Path | None = None,
) -> list[str]:
    """Answer ``(context, question)`` inputs in order; optionally write a prediction file."""
    artifact_id = artifact if isinstance(artifact, str) else artifact.artifact_id
    backend.load_artifact(artifact_id)
    answers = backend.predict(artifact_id, list(questions)) if questions else []
    if out_path is not None:
        if pair_ids is None or len(pair_ids) != len(answers):
            raise ValueError("pair_ids must be given, one per question, to write a prediction file")
        write_predictions(out_path, dict(zip(pair_ids, answers)))
    return answers


def predict_split(
    artifact: ModelArtifact | str, split: DatasetSplit, backend: TrainingBackend, *, out_path: str | Path | None = None
) -> dict[str, str]:
    texts = split.context_by_id
    inputs = [(texts[p.context_id].text, p.question) for p in split.pairs]
    ids = [p.pair_id for p in split.pairs]
    answers = predict(artifact, inputs, backend, pair_ids=ids, out_path=out_path)
    return dict(zip(ids, answers))
