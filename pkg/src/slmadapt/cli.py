"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 backend error,
3 partial-pipeline failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import shlex
import sys
from pathlib import Path

from slmadapt.data_core import compute_statistics, ingest_dataset, write_split
from slmadapt.errors import ToolkitError, ValidationError
from slmadapt.metrics.evaluate import METRIC_GROUPS, evaluate_split, per_example_csv, per_example_jsonl
from slmadapt.mixtures import plan_m1, plan_m2, plan_m3, load_plan, save_plan
from slmadapt.pipeline import load_config, run_pipeline
from slmadapt.report import RunRegistry, cmd_report, render_stats_csv, render_stats_markdown
from slmadapt.synthgen.backends import HttpGenerationBackend, MockGenerationBackend
from slmadapt.synthgen.campaign import fixed_clock, run_generation_campaign, utc_now_iso
from slmadapt.synthgen.prompt import GenerationConfig
from slmadapt.trainer.backends import AdapterTrainingBackend, MockTrainingBackend
from slmadapt.trainer.config import TrainerConfig
from slmadapt.trainer.harness import predict_split, run_plan

log = logging.getLogger("slmadapt")


def _labelled(spec: str) -> tuple[str, Path]:
    """``name=path`` or bare ``path`` (label = file stem)."""
    if "=" in spec:
        name, path = spec.split("=", 1)
        return name, Path(path)
    return Path(spec).stem, Path(spec)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_stats(args) -> int:
    rows = []
    for spec in args.paths:
        name, path = _labelled(spec)
        rows.append((name, compute_statistics(ingest_dataset(path, name))))
    _emit(render_stats_csv(rows) if args.format == "csv" else render_stats_markdown(rows), args.out)
    return 0


def cmd_generate(args) -> int:
    split = ingest_dataset(args.input, args.split_name)
    pool = ingest_dataset(args.exemplars) if args.exemplars else split
    backend_id = args.backend_id or args.backend
    if args.backend == "mock":
        backend = MockGenerationBackend(backend_id, args.pairs_per_context)
    else:
        if not args.endpoint:
            raise ValidationError("--endpoint is required with --backend http")
        backend = HttpGenerationBackend(args.endpoint, backend_id, api_key_env=args.api_key_env)
    config = GenerationConfig(
        backend_id=backend_id,
        temperature=args.temperature,
        top_p=args.top_p,
        max_new_tokens=args.max_new_tokens,
        num_fewshot=args.fewshot,
        seed=args.seed,
    )
    out = Path(args.out)
    manifest = Path(args.manifest) if args.manifest else out.with_suffix(".manifest.jsonl")
    result = run_generation_campaign(
        split, config, backend, pool,
        manifest_path=manifest,
        workers=args.workers,
        dedup_threshold=args.dedup_threshold,
        clock=fixed_clock() if args.fixed_timestamps else utc_now_iso,
    )
    write_split(result.split, out)
    print(f"{len(result.split.pairs)} synthetic pairs for {len(split.contexts)} contexts -> {out}", file=sys.stderr)
    if result.dedup is not None:
        print(f"dedup kept {result.dedup.kept}, dropped {result.dedup.dropped}", file=sys.stderr)
    if result.failed_context_ids:
        print("generation failed for: " + ", ".join(result.failed_context_ids), file=sys.stderr)
        return 2
    return 0


def cmd_mix(args) -> int:
    original = ingest_dataset(args.original)
    synthetic = [ingest_dataset(p) for p in args.synthetic or []]
    paths = {original.name: str(args.original), **{s.name: str(p) for s, p in zip(synthetic, args.synthetic or [])}}
    plan_id = args.plan_id or args.strategy
    if args.strategy == "m1":
        plan = plan_m1(original, seed=args.seed, plan_id=plan_id, paths=paths)
    elif args.strategy == "m2":
        if len(synthetic) != 1:
            raise ValidationError("m2 takes exactly one --synthetic split")
        plan = plan_m2(original, synthetic[0], seed=args.seed, plan_id=plan_id, resume_from=args.resume_from, paths=paths)
    else:
        plan = plan_m3(original, synthetic, seed=args.seed, plan_id=plan_id, paths=paths)
    if args.out:
        save_plan(plan, args.out)
    else:
        sys.stdout.write(json.dumps(plan.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n")
    return 0


def _trainer_backend(args):
    if args.trainer == "mock":
        return MockTrainingBackend(args.store)
    if not args.adapter_cmd:
        raise ValidationError("--adapter-cmd is required with --trainer adapter")
    return AdapterTrainingBackend(shlex.split(args.adapter_cmd))


def _plan_splits(plan, plan_path: Path) -> dict:
    splits = {}
    for stage in plan.stages:
        for entry in stage.mixture:
            if entry.split.path is None:
                raise ValidationError(f"plan entry {entry.split.name!r} has no path")
            path = Path(entry.split.path)
            if not path.is_absolute() and not path.is_file():
                path = plan_path.parent / path
            splits[entry.split.name] = ingest_dataset(path, entry.split.name)
    return splits


def cmd_train(args) -> int:
    plan_path = Path(args.plan)
    plan = load_plan(plan_path)
    config = TrainerConfig(learning_rate=args.lr, seed=args.seed, model_id=args.model_id)
    result = run_plan(plan, config, _trainer_backend(args), _plan_splits(plan, plan_path), run_dir=args.out_dir)
    for artifact in result.artifacts:
        print(f"stage {artifact.stage_index}: {artifact.artifact_id} (parent {artifact.parent_id})")
    return 0


def cmd_predict(args) -> int:
    split = ingest_dataset(args.input)
    predict_split(args.artifact, split, _trainer_backend(args), out_path=args.out)
    return 0


def cmd_evaluate(args) -> int:
    gold = ingest_dataset(args.gold, args.split_name)
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    report = evaluate_split(
        args.predictions, gold, metrics,
        bleu_max_n=args.bleu_max_n, naive_tokenization=args.naive_tokenization, model=args.model or "",
    )
    if args.out:
        report.save(args.out)
    else:
        sys.stdout.write(json.dumps(report.to_dict(include_examples=False), indent=2, sort_keys=True) + "\n")
    if args.per_example_csv:
        _emit(per_example_csv(report), args.per_example_csv)
    if args.per_example_jsonl:
        _emit(per_example_jsonl(report), args.per_example_jsonl)
    return 0


def cmd_report_(args) -> int:
    registry = RunRegistry(args.registry)
    runs = [r for r in args.runs.split(",") if r] if args.runs else sorted(registry.entries)
    splits = [s for s in args.splits.split(",") if s]
    table = cmd_report(registry, runs, splits, style=args.style)
    for warning in table.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    _emit(table.render(args.format), args.out)
    return 0


def cmd_pipeline(args) -> int:
    cfg = load_config(args.config)
    result = run_pipeline(cfg, overrides={"root": args.root, "seed": args.seed})
    print(f"registry {result.root} digest {result.registry_digest}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slmadapt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset statistics table")
    p.add_argument("paths", nargs="+", help="jsonl files, optionally as name=path")
    p.add_argument("--format", choices=("md", "csv"), default="md")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("generate", help="generate synthetic QA pairs")
    p.add_argument("--input", required=True, help="split whose contexts are used")
    p.add_argument("--split-name")
    p.add_argument("--exemplars", help="few-shot exemplar pool (default: --input)")
    p.add_argument("--backend", choices=("mock", "http"), default="mock")
    p.add_argument("--backend-id")
    p.add_argument("--endpoint")
    p.add_argument("--api-key-env", default="SLMADAPT_API_KEY")
    p.add_argument("--pairs-per-context", type=int, default=5, help="mock backend only")
    p.add_argument("--temperature", type=float, default=0.7)
    p.add_argument("--top-p", type=float, default=0.9)
    p.add_argument("--fewshot", type=int, default=2)
    p.add_argument("--max-new-tokens", type=int, default=1024)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dedup-threshold", type=float)
    p.add_argument("--fixed-timestamps", action="store_true")
    p.add_argument("--manifest")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("mix", help="build a training plan")
    p.add_argument("--strategy", choices=("m1", "m2", "m3"), required=True)
    p.add_argument("--original", required=True)
    p.add_argument("--synthetic", nargs="*")
    p.add_argument("--plan-id")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resume-from", help="m2: reuse an existing stage-1 artifact")
    p.add_argument("--out")
    p.set_defaults(func=cmd_mix)

    def trainer_flags(p):
        p.add_argument("--trainer", choices=("mock", "adapter"), default="mock")
        p.add_argument("--adapter-cmd", help="command line of the external trainer")
        p.add_argument("--store", default="artifacts", help="mock artifact directory")

    p = sub.add_parser("train", help="execute a training plan")
    p.add_argument("--plan", required=True)
    trainer_flags(p)
    p.add_argument("--lr", type=float, required=True)
    p.add_argument("--model-id", default="meta-llama/Llama-3.1-8B")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="run")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write a prediction file for a split")
    p.add_argument("--artifact", required=True)
    p.add_argument("--input", required=True)
    trainer_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against gold answers")
    p.add_argument("--predictions", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--split-name")
    p.add_argument("--metrics", default=",".join(METRIC_GROUPS))
    p.add_argument("--bleu-max-n", type=int, default=4)
    p.add_argument("--naive-tokenization", action="store_true", help="whitespace tokens only")
    p.add_argument("--model")
    p.add_argument("--out")
    p.add_argument("--per-example-csv")
    p.add_argument("--per-example-jsonl")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render a comparison table from the registry")
    p.add_argument("--registry", required=True, help="registry root directory")
    p.add_argument("--runs", help="comma-separated run ids (default: all)")
    p.add_argument("--splits", required=True, help="comma-separated split names")
    p.add_argument("--format", choices=("md", "csv"), default="md")
    p.add_argument("--style", choices=("table3", "table4"), default="table3")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report_)

    p = sub.add_parser("pipeline", help="generate -> mix -> train -> evaluate -> report")
    p.add_argument("--config", required=True)
    p.add_argument("--root", help="override the config's root directory")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
