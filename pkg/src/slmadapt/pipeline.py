"""Config-driven end-to-end run: generate, mix, train, evaluate, report.

Everything lands under the configured root::

    data/<split>.jsonl              canonical copies of the input splits
    synthetic/<backend>.jsonl       generated corpus per backend
    synthetic/<backend>.manifest.jsonl
    plans/<plan_id>.json
    artifacts/<artifact_id>.json    mock-trainer weights
    runs/<plan_id>/manifest.json    plus loss logs, predictions/, reports/
    registry.json, report.md, report.csv

All stored paths are relative to the root, and with ``reproducible = true``
(the default) manifests carry a fixed timestamp, so identical configs give
byte-identical trees.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from slmadapt.data_core import DatasetSplit, ingest_dataset, write_split
from slmadapt.errors import PipelineError, ToolkitError, ValidationError
from slmadapt.metrics.evaluate import METRIC_GROUPS, evaluate_split
from slmadapt.mixtures import TrainingPlan, plan_m1, plan_m2, plan_m3, save_plan
from slmadapt.report import RunRegistry, cmd_report
from slmadapt.synthgen.backends import HttpGenerationBackend, MockGenerationBackend
from slmadapt.synthgen.campaign import fixed_clock, run_generation_campaign, utc_now_iso
from slmadapt.synthgen.prompt import GenerationConfig
from slmadapt.trainer.backends import AdapterTrainingBackend, MockTrainingBackend
from slmadapt.trainer.config import TrainerConfig
from slmadapt.trainer.harness import predict_split, run_plan

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger(__name__)

STRATEGIES = ("m1", "m2", "m3")


def load_config(path: str | Path) -> dict[str, Any]:
    """Read a TOML or JSON pipeline config and resolve paths against its directory."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        cfg = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ValidationError(f"cannot parse config {path}: {exc}") from exc
    cfg.setdefault("base_dir", str(path.parent))
    return cfg


@dataclass
class PipelineResult:
    root: Path
    registry_digest: str
    run_ids: list[str]
    artifacts: dict[str, list[str]] = field(default_factory=dict)
    reports: dict[str, dict[str, Path]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def _generation_backend(spec: Mapping[str, Any]):
    kind = spec.get("backend", "mock")
    backend_id = spec.get("backend_id", kind)
    if kind == "mock":
        return MockGenerationBackend(backend_id, int(spec.get("pairs_per_context", 5)))
    if kind == "http":
        if "endpoint" not in spec:
            raise ValidationError(f"generation backend {backend_id!r}: http backend needs an endpoint")
        return HttpGenerationBackend(
            spec["endpoint"], backend_id,
            api_key_env=spec.get("api_key_env", "SLMADAPT_API_KEY"),
            timeout=float(spec.get("timeout", 120)),
        )
    raise ValidationError(f"unknown generation backend {kind!r}")


def _training_backend(spec: Mapping[str, Any], store: Path):
    kind = spec.get("trainer", "mock")
    if kind == "mock":
        return MockTrainingBackend(store)
    if kind == "adapter":
        command = spec.get("adapter_command")
        if not command:
            raise ValidationError("adapter trainer needs training.adapter_command")
        return AdapterTrainingBackend(command)
    raise ValidationError(f"unknown trainer {kind!r}")


def run_pipeline(cfg: Mapping[str, Any], *, overrides: Mapping[str, Any] | None = None) -> PipelineResult:
    """Run every stage; errors after ingestion raise :class:`PipelineError`."""
    cfg = {**cfg, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    base = Path(cfg.get("base_dir", "."))
    root = base / cfg.get("root", "runs")
    seed = int(cfg.get("seed", 0))
    clock = fixed_clock() if cfg.get("reproducible", True) else utc_now_iso

    data = cfg.get("data") or {}
    if "train" not in data:
        raise ValidationError("config needs data.train")
    train = ingest_dataset(base / data["train"], "train")
    evals = {name: ingest_dataset(base / p, name) for name, p in sorted((data.get("eval") or {}).items())}
    gen_specs = list(cfg.get("generation") or [])
    training = dict(cfg.get("training") or {})
    strategies = [s.lower() for s in training.get("strategies", STRATEGIES)]
    if bad := [s for s in strategies if s not in STRATEGIES]:
        raise ValidationError(f"unknown strategies {bad}")
    if {"m2", "m3"} & set(strategies) and not gen_specs:
        raise ValidationError("strategies m2/m3 need at least one [[generation]] entry")
    trainer_config = TrainerConfig(
        learning_rate=training.get("learning_rate"),
        seed=seed,
        **{k: training[k] for k in ("model_id", "max_sequence_length", "per_device_batch_size",
                                    "gradient_accumulation_steps", "warmup_steps", "lr_scheduler",
                                    "reuse_optimizer_state", "restart_schedule") if k in training},
    )
    if trainer_config.learning_rate is None:
        raise ValidationError("training.learning_rate must be set explicitly")
    evaluation = dict(cfg.get("evaluation") or {})
    metrics = list(evaluation.get("metrics", METRIC_GROUPS))

    try:
        return _execute(root, seed, clock, train, evals, gen_specs, strategies, training, trainer_config,
                        metrics, evaluation)
    except PipelineError:
        raise
    except ToolkitError as exc:
        raise PipelineError(f"pipeline aborted: {exc}") from exc


def _execute(root, seed, clock, train, evals, gen_specs, strategies, training, trainer_config, metrics, evaluation):
    warnings: list[str] = []
    paths: dict[str, str] = {}
    splits: dict[str, DatasetSplit] = {}
    for split in (train, *evals.values()):
        rel = f"data/{split.name}.jsonl"
        write_split(split, root / rel)
        paths[split.name] = rel
        splits[split.name] = split

    synthetic: dict[str, DatasetSplit] = {}
    for spec in gen_specs:
        backend = _generation_backend(spec)
        gen_config = GenerationConfig(
            backend_id=backend.backend_id,
            temperature=float(spec.get("temperature", 0.7)),
            top_p=float(spec.get("top_p", 0.9)),
            max_new_tokens=int(spec.get("max_new_tokens", 1024)),
            num_fewshot=int(spec.get("num_fewshot", 2)),
            seed=spec.get("seed", seed),
            **({"system_preamble": spec["preamble"]} if "preamble" in spec else {}),
        )
        rel = f"synthetic/{backend.backend_id}.jsonl"
        result = run_generation_campaign(
            train, gen_config, backend, train,
            manifest_path=root / f"synthetic/{backend.backend_id}.manifest.jsonl",
            workers=int(spec.get("workers", 1)),
            dedup_threshold=spec.get("dedup_threshold"),
            clock=clock,
        )
        write_split(result.split, root / rel)
        if result.failed_context_ids:
            raise PipelineError(
                f"generation with {backend.backend_id!r} failed for contexts: {', '.join(result.failed_context_ids)}"
            )
        synthetic[backend.backend_id] = result.split
        paths[result.split.name] = rel
        splits[result.split.name] = result.split

    plans: list[TrainingPlan] = []
    if "m1" in strategies:
        plans.append(plan_m1(train, seed=seed, paths=paths))
    if "m2" in strategies:
        m2_id = training.get("m2_synthetic", gen_specs[0].get("backend_id", gen_specs[0].get("backend", "mock")))
        if m2_id not in synthetic:
            raise ValidationError(f"training.m2_synthetic {m2_id!r} is not a configured generation backend")
        plans.append(plan_m2(train, synthetic[m2_id], seed=seed, paths=paths))
    if "m3" in strategies:
        plans.append(plan_m3(train, list(synthetic.values()), seed=seed, paths=paths))

    backend = _training_backend(training, root / "artifacts")
    registry = RunRegistry(root)
    registry.save()
    result = PipelineResult(root, "", [])
    bleu_max_n = int(evaluation.get("bleu_max_n", 4))
    for plan in plans:
        save_plan(plan, root / f"plans/{plan.plan_id}.json")
        run_dir = root / "runs" / plan.plan_id
        run = run_plan(plan, trainer_config, backend, splits, run_dir=run_dir)
        final = run.artifacts[-1]
        predictions, reports = {}, {}
        for name, split in evals.items():
            pred_path = run_dir / "predictions" / f"{name}.jsonl"
            preds = predict_split(final, split, backend, out_path=pred_path)
            predictions[name] = pred_path
            if not split.fully_answered:
                msg = f"split {name!r} has held-out answers; predictions written, scoring skipped"
                log.warning(msg)
                warnings.append(msg)
                continue
            report = evaluate_split(preds, split, metrics, model=plan.plan_id, bleu_max_n=bleu_max_n)
            reports[name] = report.save(run_dir / "reports" / f"{name}.json")
        registry.register(plan.plan_id, plan_digest=plan.digest(), manifest=run.manifest_path,
                          predictions=predictions, reports=reports, replace=True)
        result.run_ids.append(plan.plan_id)
        result.artifacts[plan.plan_id] = [a.artifact_id for a in run.artifacts]
        result.reports[plan.plan_id] = reports

    scored = [name for name, split in evals.items() if split.fully_answered]
    if result.run_ids and scored:
        table = cmd_report(registry, result.run_ids, scored, style=evaluation.get("report_style", "table3"))
        (root / "report.md").write_text(table.to_markdown(), encoding="utf-8")
        (root / "report.csv").write_text(table.to_csv(), encoding="utf-8")
        warnings.extend(table.warnings)
    result.warnings = warnings
    result.registry_digest = registry.digest()
    return result
