"""Dataset schema, JSONL ingestion and split statistics.

A corpus file holds two kinds of lines, distinguished by ``kind``::

    {"kind": "context", "context_id": "c1", "text": "..."}
    {"kind": "qa", "pair_id": "p1", "context_id": "c1", "question": "...",
     "answer": "..." | null, "provenance": "original" | "synthetic",
     "generator_id": "..." | null}

``answer`` is ``null`` for held-out splits. QA lines may also carry an optional
``generation_meta`` object (sampling parameters, prompt hash).
"""

from __future__ import annotations

import hashlib
import json
import unicodedata
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from slmadapt.errors import (
    DatasetFileMissing,
    DegenerateInputError,
    DuplicateIdError,
    SchemaViolation,
    ValidationError,
)


class Provenance(str, Enum):
    ORIGINAL = "original"
    SYNTHETIC = "synthetic"


def nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


@dataclass(frozen=True)
class ContextRecord:
    context_id: str
    text: str
    split_name: str = ""

    def __post_init__(self) -> None:
        if not self.context_id:
            raise SchemaViolation("empty context_id", field="context_id")
        if not self.text.strip():
            raise SchemaViolation(f"context {self.context_id!r} has empty text", field="text")


@dataclass(frozen=True)
class QAPair:
    pair_id: str
    context_id: str
    question: str
    answer: str | None
    provenance: Provenance = Provenance.ORIGINAL
    generator_id: str | None = None
    generation_meta: Mapping[str, Any] | None = field(default=None, hash=False)

    def __post_init__(self) -> None:
        if not self.pair_id:
            raise SchemaViolation("empty pair_id", field="pair_id")
        if not self.question.strip():
            raise SchemaViolation(f"pair {self.pair_id!r} has empty question", field="question")
        if not isinstance(self.provenance, Provenance):
            object.__setattr__(self, "provenance", Provenance(self.provenance))
        if self.provenance is Provenance.SYNTHETIC and not self.generator_id:
            raise SchemaViolation(
                f"synthetic pair {self.pair_id!r} lacks generator_id", field="generator_id"
            )

    @property
    def has_answer(self) -> bool:
        return self.answer is not None


@dataclass(frozen=True)
class DatasetSplit:
    name: str
    contexts: tuple[ContextRecord, ...] = ()
    pairs: tuple[QAPair, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "contexts", tuple(self.contexts))
        object.__setattr__(self, "pairs", tuple(self.pairs))
        seen: set[str] = set()
        for ctx in self.contexts:
            if ctx.context_id in seen:
                raise DuplicateIdError(f"duplicate context_id {ctx.context_id!r} in split {self.name!r}")
            seen.add(ctx.context_id)
        pair_ids: set[str] = set()
        for pair in self.pairs:
            if pair.pair_id in pair_ids:
                raise DuplicateIdError(f"duplicate pair_id {pair.pair_id!r} in split {self.name!r}")
            pair_ids.add(pair.pair_id)
            if pair.context_id not in seen:
                raise SchemaViolation(
                    f"pair {pair.pair_id!r} references unknown context_id {pair.context_id!r}",
                    field="context_id",
                )

    @property
    def context_by_id(self) -> dict[str, ContextRecord]:
        return {c.context_id: c for c in self.contexts}

    def pairs_by_context(self) -> dict[str, list[QAPair]]:
        grouped: dict[str, list[QAPair]] = {c.context_id: [] for c in self.contexts}
        for pair in self.pairs:
            grouped[pair.context_id].append(pair)
        return grouped

    @property
    def fully_answered(self) -> bool:
        return all(p.has_answer for p in self.pairs)

    def digest(self) -> str:
        """SHA-256 of the canonical JSONL serialization."""
        return hashlib.sha256(serialize_split(self).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SplitStatistics:
    context_count: int
    qa_count: int
    qa_per_context: float
    mean_question_len: float
    mean_answer_len: float | None

    def display(self) -> dict[str, str]:
        """Table-style strings: ratios and lengths at 2 decimals, ``--`` for held-out answers."""
        return {
            "contexts": str(self.context_count),
            "qa_pairs": str(self.qa_count),
            "qa_per_context": f"{self.qa_per_context:.2f}",
            "question_len": f"{self.mean_question_len:.2f}",
            "answer_len": "--" if self.mean_answer_len is None else f"{self.mean_answer_len:.2f}",
        }


def whitespace_words(text: str) -> list[str]:
    return text.split()


# --- serialization ----------------------------------------------------------

_CONTEXT_KEYS = {"kind", "context_id", "text"}
_QA_REQUIRED = {"kind", "pair_id", "context_id", "question", "answer", "provenance", "generator_id"}
_QA_OPTIONAL = {"generation_meta"}


def context_to_json(ctx: ContextRecord) -> dict[str, Any]:
    return {"kind": "context", "context_id": ctx.context_id, "text": ctx.text}


def pair_to_json(pair: QAPair) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "kind": "qa",
        "pair_id": pair.pair_id,
        "context_id": pair.context_id,
        "question": pair.question,
        "answer": pair.answer,
        "provenance": pair.provenance.value,
        "generator_id": pair.generator_id,
    }
    if pair.generation_meta is not None:
        obj["generation_meta"] = dict(pair.generation_meta)
    return obj


def _dumps(obj: Mapping[str, Any]) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def serialize_split(split: DatasetSplit) -> str:
    """Canonical JSONL: all contexts first, then pairs, each in split order."""
    lines = [_dumps(context_to_json(c)) for c in split.contexts]
    lines.extend(_dumps(pair_to_json(p)) for p in split.pairs)
    return "".join(line + "\n" for line in lines)


def write_split(split: DatasetSplit, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_split(split), encoding="utf-8")
    return path


def _require_str(obj: Mapping[str, Any], key: str, lineno: int, *, nullable: bool = False) -> str | None:
    value = obj.get(key)
    if value is None and nullable:
        return None
    if not isinstance(value, str):
        kind = "string or null" if nullable else "string"
        raise SchemaViolation(f"expected {kind}, got {type(value).__name__}", line=lineno, field=key)
    return nfc(value)


def _parse_line(obj: Any, lineno: int, split_name: str) -> ContextRecord | QAPair:
    if not isinstance(obj, dict):
        raise SchemaViolation("entry is not a JSON object", line=lineno)
    kind = obj.get("kind")
    if kind == "context":
        extra = set(obj) - _CONTEXT_KEYS
        if extra:
            raise SchemaViolation(f"unexpected keys {sorted(extra)}", line=lineno, field=sorted(extra)[0])
        missing = _CONTEXT_KEYS - set(obj)
        if missing:
            raise SchemaViolation("missing key", line=lineno, field=sorted(missing)[0])
        context_id = _require_str(obj, "context_id", lineno)
        text = _require_str(obj, "text", lineno)
        try:
            return ContextRecord(context_id, text, split_name)
        except SchemaViolation as exc:
            raise SchemaViolation(str(exc), line=lineno, field=exc.field) from None
    if kind == "qa":
        missing = _QA_REQUIRED - set(obj)
        if missing:
            raise SchemaViolation("missing key", line=lineno, field=sorted(missing)[0])
        extra = set(obj) - _QA_REQUIRED - _QA_OPTIONAL
        if extra:
            raise SchemaViolation(f"unexpected keys {sorted(extra)}", line=lineno, field=sorted(extra)[0])
        provenance = obj["provenance"]
        if provenance not in ("original", "synthetic"):
            raise SchemaViolation(f"invalid provenance {provenance!r}", line=lineno, field="provenance")
        meta = obj.get("generation_meta")
        if meta is not None and not isinstance(meta, dict):
            raise SchemaViolation("expected object or null", line=lineno, field="generation_meta")
        try:
            return QAPair(
                pair_id=_require_str(obj, "pair_id", lineno),
                context_id=_require_str(obj, "context_id", lineno),
                question=_require_str(obj, "question", lineno),
                answer=_require_str(obj, "answer", lineno, nullable=True),
                provenance=Provenance(provenance),
                generator_id=_require_str(obj, "generator_id", lineno, nullable=True),
                generation_meta=meta,
            )
        except SchemaViolation as exc:
            if exc.line is not None:
                raise
            raise SchemaViolation(str(exc), line=lineno, field=exc.field) from None
    raise SchemaViolation(f"unknown kind {kind!r}", line=lineno, field="kind")


def parse_jsonl(lines: Iterable[str], split_name: str) -> DatasetSplit:
    contexts: list[ContextRecord] = []
    pairs: list[tuple[int, QAPair]] = []
    context_ids: set[str] = set()
    pair_ids: set[str] = set()
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"invalid JSON ({exc.msg})", line=lineno) from None
        record = _parse_line(obj, lineno, split_name)
        if isinstance(record, ContextRecord):
            if record.context_id in context_ids:
                raise DuplicateIdError(f"line {lineno}: duplicate context_id {record.context_id!r}")
            context_ids.add(record.context_id)
            contexts.append(record)
        else:
            if record.pair_id in pair_ids:
                raise DuplicateIdError(f"line {lineno}: duplicate pair_id {record.pair_id!r}")
            pair_ids.add(record.pair_id)
            pairs.append((lineno, record))
    for lineno, pair in pairs:
        if pair.context_id not in context_ids:
            raise SchemaViolation(
                f"pair {pair.pair_id!r} references unknown context_id {pair.context_id!r}",
                line=lineno,
                field="context_id",
            )
    return DatasetSplit(split_name, tuple(contexts), tuple(p for _, p in pairs))


def ingest_dataset(path: str | Path, split_name: str | None = None) -> DatasetSplit:
    """Load and validate a JSONL corpus file.

    The split is named after the file stem unless ``split_name`` is given.
    Malformed entries raise :class:`SchemaViolation` with the offending line.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetFileMissing(f"dataset file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        return parse_jsonl(fh, split_name or path.stem)


# --- statistics -------------------------------------------------------------


def compute_statistics(
    split: DatasetSplit, tokenizer: Callable[[str], Sequence[str]] = whitespace_words
) -> SplitStatistics:
    n_ctx = len(split.contexts)
    if n_ctx == 0:
        raise DegenerateInputError(f"split {split.name!r} has no contexts")
    n_qa = len(split.pairs)
    q_total = sum(len(tokenizer(p.question)) for p in split.pairs)
    mean_q = q_total / n_qa if n_qa else 0.0
    if split.fully_answered:
        a_total = sum(len(tokenizer(p.answer)) for p in split.pairs)
        mean_a: float | None = a_total / n_qa if n_qa else 0.0
    else:
        mean_a = None
    return SplitStatistics(n_ctx, n_qa, n_qa / n_ctx, mean_q, mean_a)


# --- merging ----------------------------------------------------------------


def namespaced(split: DatasetSplit, prefix: str | None = None) -> DatasetSplit:
    """Prefix every pair_id with ``<prefix>:`` (the split name by default)."""
    prefix = split.name if prefix is None else prefix
    pairs = tuple(
        QAPair(
            pair_id=f"{prefix}:{p.pair_id}",
            context_id=p.context_id,
            question=p.question,
            answer=p.answer,
            provenance=p.provenance,
            generator_id=p.generator_id,
            generation_meta=p.generation_meta,
        )
        for p in split.pairs
    )
    return DatasetSplit(split.name, split.contexts, pairs)


def merge_splits(splits: Sequence[DatasetSplit], name: str, *, namespace: bool = False) -> DatasetSplit:
    """Union of contexts (deduplicated by id) and pairs.

    A context id that appears in several inputs must carry identical text.
    With ``namespace=True`` pair ids are prefixed by their source split name
    before the union; colliding pair ids raise :class:`DuplicateIdError`.
    """
    contexts: dict[str, ContextRecord] = {}
    pairs: dict[str, QAPair] = {}
    for split in splits:
        if namespace:
            split = namespaced(split)
        for ctx in split.contexts:
            prior = contexts.get(ctx.context_id)
            if prior is None:
                contexts[ctx.context_id] = ctx
            elif prior.text != ctx.text:
                raise ValidationError(
                    f"conflicting text for context_id {ctx.context_id!r} "
                    f"(splits {prior.split_name!r} and {ctx.split_name!r})"
                )
        for pair in split.pairs:
            if pair.pair_id in pairs:
                raise DuplicateIdError(f"pair_id collision {pair.pair_id!r} while merging into {name!r}")
            pairs[pair.pair_id] = pair
    return DatasetSplit(name, tuple(contexts.values()), tuple(pairs.values()))
