"""Per-context generation with retries, and whole-split campaigns."""

from __future__ import annotations

import hashlib
import json
import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any

from slmadapt.data_core import ContextRecord, DatasetSplit, Provenance, QAPair, pair_to_json
from slmadapt.errors import BackendError
from slmadapt.synthgen.backends import GenerationBackend, GenerationRequest
from slmadapt.synthgen.dedup import DedupReport, dedup_filter
from slmadapt.synthgen.grammar import scan_blocks
from slmadapt.synthgen.prompt import GenerationConfig, PromptBundle, build_prompt, select_exemplars

log = logging.getLogger(__name__)

Clock = Callable[[], str]


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def fixed_clock(stamp: str = "1970-01-01T00:00:00Z") -> Clock:
    return lambda: stamp


class GenerationStatus(str, Enum):
    OK = "ok"
    PARSE_PARTIAL = "parse_partial"
    PARSE_FAILED = "parse_failed"


@dataclass(frozen=True)
class GenerationRecord:
    context_id: str
    prompt_hash: str
    backend_id: str
    raw_output: str
    parsed_pairs: tuple[QAPair, ...]
    status: GenerationStatus
    timestamp: str
    attempts: int = 1
    error: str | None = None

    def __post_init__(self) -> None:
        if self.status is GenerationStatus.OK and not self.parsed_pairs:
            raise ValueError("status ok requires at least one parsed pair")

    def to_json(self) -> dict[str, Any]:
        return {
            "context_id": self.context_id,
            "prompt_hash": self.prompt_hash,
            "backend_id": self.backend_id,
            "raw_output": self.raw_output,
            "parsed_pairs": [pair_to_json(p) for p in self.parsed_pairs],
            "status": self.status.value,
            "timestamp": self.timestamp,
            "attempts": self.attempts,
            "error": self.error,
        }


def generation_meta(config: GenerationConfig, bundle: PromptBundle) -> dict[str, Any]:
    meta: dict[str, Any] = {
        "temperature": config.temperature,
        "top_p": config.top_p,
        "prompt_hash": bundle.prompt_hash,
    }
    if config.seed is not None:
        meta["seed"] = config.seed
    return meta


def generate_for_context(
    target: ContextRecord,
    bundle: PromptBundle,
    config: GenerationConfig,
    backend: GenerationBackend,
    *,
    clock: Clock = utc_now_iso,
) -> GenerationRecord:
    """Query ``backend`` for one context, retrying failures with the same prompt.

    Backend errors and empty completions are retried up to
    ``config.max_attempts`` times in total; after that the record is
    ``parse_failed`` with no pairs and the last error message.
    """
    request = GenerationRequest(
        prompt=bundle.rendered,
        temperature=config.temperature,
        top_p=config.top_p,
        max_new_tokens=config.max_new_tokens,
        seed=config.seed,
    )
    raw, error, attempt = "", None, 0
    for attempt in range(1, config.max_attempts + 1):
        try:
            raw = backend.generate(request)
        except BackendError as exc:
            error = str(exc) or type(exc).__name__
            log.warning("context %s attempt %d failed: %s", target.context_id, attempt, error)
            continue
        if raw.strip():
            error = None
            break
        error = "empty completion"
    if error is not None:
        return GenerationRecord(
            context_id=target.context_id, prompt_hash=bundle.prompt_hash, backend_id=config.backend_id,
            raw_output=raw, parsed_pairs=(), status=GenerationStatus.PARSE_FAILED,
            timestamp=clock(), attempts=attempt, error=error,
        )
    outcome = scan_blocks(raw)
    meta = generation_meta(config, bundle)
    pairs = tuple(
        QAPair(
            pair_id=f"{config.backend_id}:{target.context_id}:{k}",
            context_id=target.context_id,
            question=q,
            answer=a,
            provenance=Provenance.SYNTHETIC,
            generator_id=config.backend_id,
            generation_meta=dict(meta),
        )
        for k, (q, a) in enumerate(outcome.pairs, start=1)
    )
    if not pairs:
        status = GenerationStatus.PARSE_FAILED
    elif outcome.incomplete:
        status = GenerationStatus.PARSE_PARTIAL
    else:
        status = GenerationStatus.OK
    return GenerationRecord(
        context_id=target.context_id, prompt_hash=bundle.prompt_hash, backend_id=config.backend_id,
        raw_output=raw, parsed_pairs=pairs, status=status, timestamp=clock(), attempts=attempt,
    )


@dataclass(frozen=True)
class CampaignResult:
    split: DatasetSplit
    records: tuple[GenerationRecord, ...]
    failed_context_ids: tuple[str, ...]
    manifest_digest: str
    dedup: DedupReport | None = field(default=None)

    @property
    def ok(self) -> bool:
        return not self.failed_context_ids


def run_generation_campaign(
    split: DatasetSplit,
    config: GenerationConfig,
    backend: GenerationBackend,
    exemplar_pool: DatasetSplit,
    *,
    manifest_path: str | Path | None = None,
    output_name: str | None = None,
    workers: int = 1,
    dedup_threshold: float | None = None,
    clock: Clock = utc_now_iso,
) -> CampaignResult:
    """Generate synthetic pairs for every context of ``split``.

    Records reach the manifest in context order whatever the worker count.
    Contexts that end in ``parse_failed`` are listed in
    ``failed_context_ids``; the pairs of every other context are returned.
    """
    bundles = [
        (ctx, build_prompt(ctx, select_exemplars(exemplar_pool, ctx, config.num_fewshot), config))
        for ctx in split.contexts
    ]

    def work(item: tuple[ContextRecord, PromptBundle]) -> GenerationRecord:
        ctx, bundle = item
        return generate_for_context(ctx, bundle, config, backend, clock=clock)

    sink = None
    if manifest_path is not None:
        manifest_path = Path(manifest_path)
        manifest_path.parent.mkdir(parents=True, exist_ok=True)
        sink = manifest_path.open("w", encoding="utf-8")
    digest = hashlib.sha256()
    records = []
    try:
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            # map() yields in submission order, which serializes manifest appends
            for record in pool.map(work, bundles):
                records.append(record)
                line = json.dumps(record.to_json(), ensure_ascii=False, sort_keys=True) + "\n"
                digest.update(line.encode("utf-8"))
                if sink is not None:
                    sink.write(line)
    finally:
        if sink is not None:
            sink.close()

    pairs = [p for r in records for p in r.parsed_pairs]
    report = None
    if dedup_threshold is not None:
        pairs, report = dedup_filter(pairs, dedup_threshold)
    failed = tuple(r.context_id for r in records if r.status is GenerationStatus.PARSE_FAILED)
    for cid in failed:
        log.error("generation failed for context %s", cid)
    name = output_name or f"synthetic-{config.backend_id}"
    contexts = tuple(ContextRecord(c.context_id, c.text, name) for c in split.contexts)
    return CampaignResult(
        split=DatasetSplit(name, contexts, tuple(pairs)),
        records=tuple(records),
        failed_context_ids=failed,
        manifest_digest=digest.hexdigest(),
        dedup=report,
    )
