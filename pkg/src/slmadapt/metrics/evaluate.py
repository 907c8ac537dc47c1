"""Score a prediction file against a gold split."""

from __future__ import annotations

import csv
import io
import json
from collections.abc import Collection, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from slmadapt.data_core import DatasetSplit
from slmadapt.errors import SchemaViolation, ValidationError
from slmadapt.metrics.bertscore import HashEmbedder, TokenEmbedder, pair_bert_score
from slmadapt.metrics.lexical import BleuStats, bleu_from_stats, bleu_stats, rouge_l, rouge_n, token_f1
from slmadapt.metrics.tokenize import tokenize_hindi

METRIC_GROUPS = ("rouge", "bleu", "qa_f1", "bertscore")
DEFAULT_BLEU_MAX_N = 4


class PredictionMismatch(ValidationError):
    def __init__(self, missing: list[str], extra: list[str]):
        self.missing = missing
        self.extra = extra
        parts = []
        if missing:
            parts.append(f"missing predictions for {len(missing)} pair_ids: {', '.join(missing)}")
        if extra:
            parts.append(f"{len(extra)} predictions for unknown pair_ids: {', '.join(extra)}")
        super().__init__("; ".join(parts))


class HeldOutGold(ValidationError):
    pass


@dataclass(frozen=True)
class ExampleScore:
    pair_id: str
    rouge1_f: float | None = None
    rouge2_f: float | None = None
    rougeL_f: float | None = None
    qa_f1: float | None = None
    bertscore_f: float | None = None
    bleu_stats: BleuStats | None = None

    def flat(self) -> dict[str, Any]:
        row = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "bleu_stats"}
        if self.bleu_stats is not None:
            row["pred_len"] = self.bleu_stats.pred_len
            row["ref_len"] = self.bleu_stats.ref_len
            for n, (m, t) in enumerate(zip(self.bleu_stats.matches, self.bleu_stats.totals), start=1):
                row[f"match_{n}"] = m
                row[f"total_{n}"] = t
        return row


@dataclass(frozen=True)
class MetricReport:
    """Corpus scores for one model on one split.

    ROUGE, QA-F1 and BERTScore are per-example means in [0, 1]. ``bleu`` is
    corpus BLEU in [0, 1] at ``bleu_max_n``; ``bleu1``/``bleu2`` are corpus
    BLEU at orders 1 and 2 scaled to [0, 100].
    """

    model: str
    split: str
    n_examples: int
    rouge1_f: float | None = None
    rouge2_f: float | None = None
    rougeL_f: float | None = None
    bleu: float | None = None
    bleu1: float | None = None
    bleu2: float | None = None
    qa_f1: float | None = None
    bertscore_f: float | None = None
    bleu_max_n: int = DEFAULT_BLEU_MAX_N
    tokenizer: str = "hindi"
    per_example: tuple[ExampleScore, ...] = field(default=(), compare=False)

    def to_dict(self, *, include_examples: bool = True) -> dict[str, Any]:
        out = asdict(self)
        out["per_example"] = [asdict(e) for e in self.per_example] if include_examples else []
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> MetricReport:
        data = dict(data)
        examples = []
        for e in data.pop("per_example", []) or []:
            e = dict(e)
            stats = e.pop("bleu_stats", None)
            if stats is not None:
                stats = BleuStats(
                    stats["pred_len"], stats["ref_len"], tuple(stats["matches"]), tuple(stats["totals"])
                )
            examples.append(ExampleScore(bleu_stats=stats, **e))
        return cls(per_example=tuple(examples), **data)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> MetricReport:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def read_predictions(path: str | Path) -> dict[str, str]:
    preds: dict[str, str] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            pid, text = obj.get("pair_id"), obj.get("prediction")
            if not isinstance(pid, str) or not isinstance(text, str):
                raise SchemaViolation("expected string pair_id and prediction", line=lineno)
            if pid in preds:
                raise SchemaViolation(f"duplicate prediction for {pid!r}", line=lineno, field="pair_id")
            preds[pid] = text
    return preds


def write_predictions(path: str | Path, items: Mapping[str, str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for pid, text in items.items():
            fh.write(json.dumps({"pair_id": pid, "prediction": text}, ensure_ascii=False, sort_keys=True) + "\n")
    return path


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def evaluate_split(
    predictions: Mapping[str, str] | str | Path,
    gold: DatasetSplit,
    metrics: Collection[str] = METRIC_GROUPS,
    *,
    embedder: TokenEmbedder | None = None,
    bleu_max_n: int = DEFAULT_BLEU_MAX_N,
    naive_tokenization: bool = False,
    model: str = "",
    workers: int = 1,
) -> MetricReport:
    unknown = set(metrics) - set(METRIC_GROUPS)
    if unknown:
        raise ValidationError(f"unknown metrics {sorted(unknown)}; choose from {METRIC_GROUPS}")
    if not isinstance(predictions, Mapping):
        predictions = read_predictions(predictions)
    if not gold.fully_answered:
        raise HeldOutGold(f"split {gold.name!r} has held-out (null) gold answers; it cannot be scored")
    gold_ids = [p.pair_id for p in gold.pairs]
    gold_set = set(gold_ids)
    missing = [pid for pid in gold_ids if pid not in predictions]
    extra = sorted(pid for pid in predictions if pid not in gold_set)
    if missing or extra:
        raise PredictionMismatch(missing, extra)
    if not gold_ids:
        raise ValidationError(f"split {gold.name!r} has no QA pairs to score")
    if "bertscore" in metrics and embedder is None:
        embedder = HashEmbedder()
    stats_order = max(bleu_max_n, 2)

    def score(pair) -> ExampleScore:
        pred = tokenize_hindi(predictions[pair.pair_id], naive=naive_tokenization).tokens
        ref = tokenize_hindi(pair.answer, naive=naive_tokenization).tokens
        kw: dict[str, Any] = {}
        if "rouge" in metrics:
            kw["rouge1_f"] = rouge_n(pred, ref, 1).fmeasure
            kw["rouge2_f"] = rouge_n(pred, ref, 2).fmeasure
            kw["rougeL_f"] = rouge_l(pred, ref).fmeasure
        if "qa_f1" in metrics:
            kw["qa_f1"] = token_f1(pred, ref)
        if "bertscore" in metrics:
            kw["bertscore_f"] = pair_bert_score(pred, ref, embedder).f1
        if "bleu" in metrics:
            kw["bleu_stats"] = bleu_stats(pred, ref, stats_order)
        return ExampleScore(pair.pair_id, **kw)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            examples = list(pool.map(score, gold.pairs))
    else:
        examples = [score(p) for p in gold.pairs]
    return aggregate(examples, model=model, split=gold.name, bleu_max_n=bleu_max_n,
                     tokenizer="whitespace" if naive_tokenization else "hindi")


def aggregate(
    examples: list[ExampleScore], *, model: str, split: str, bleu_max_n: int = DEFAULT_BLEU_MAX_N,
    tokenizer: str = "hindi",
) -> MetricReport:
    """Reduce per-example scores to corpus values in input order."""
    corpus: dict[str, Any] = {}
    first = examples[0]
    for name in ("rouge1_f", "rouge2_f", "rougeL_f", "qa_f1", "bertscore_f"):
        if getattr(first, name) is not None:
            corpus[name] = _mean([getattr(e, name) for e in examples])
    if first.bleu_stats is not None:
        order = len(first.bleu_stats.matches)
        total = BleuStats(0, 0, (0,) * order, (0,) * order)
        for e in examples:
            total = total + e.bleu_stats

        def upto(n: int) -> BleuStats:
            return BleuStats(total.pred_len, total.ref_len, total.matches[:n], total.totals[:n])

        corpus["bleu"] = bleu_from_stats(upto(bleu_max_n))
        corpus["bleu1"] = 100 * bleu_from_stats(upto(1))
        corpus["bleu2"] = 100 * bleu_from_stats(upto(2))
    return MetricReport(
        model=model, split=split, n_examples=len(examples), bleu_max_n=bleu_max_n,
        tokenizer=tokenizer, per_example=tuple(examples), **corpus,
    )


def per_example_csv(report: MetricReport) -> str:
    rows = [e.flat() for e in report.per_example]
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def per_example_jsonl(report: MetricReport) -> str:
    return "".join(json.dumps(e.flat(), ensure_ascii=False, sort_keys=True) + "\n" for e in report.per_example)
