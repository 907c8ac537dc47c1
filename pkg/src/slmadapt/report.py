"""Run registry and comparison-table rendering (Markdown and CSV).

Display precision follows the published tables: 3 decimals for [0, 1]
scores in the per-split comparison, 1 decimal for the 0-100 BLEU-1/BLEU-2
columns and 4 decimals for ROUGE in the leaderboard-style comparison.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import threading
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from slmadapt.data_core import SplitStatistics
from slmadapt.errors import ValidationError
from slmadapt.metrics.evaluate import MetricReport

log = logging.getLogger(__name__)

GAP = "n/a"


@dataclass(frozen=True)
class MetricColumn:
    attr: str
    label: str
    decimals: int


STYLES: dict[str, tuple[MetricColumn, ...]] = {
    "table3": (
        MetricColumn("rougeL_f", "Rouge-L", 3),
        MetricColumn("bleu", "BLEU", 3),
        MetricColumn("bertscore_f", "BERTScore", 3),
    ),
    "table4": (
        MetricColumn("bleu1", "BLEU-1", 1),
        MetricColumn("bleu2", "BLEU-2", 1),
        MetricColumn("rouge1_f", "ROUGE-1", 4),
        MetricColumn("rouge2_f", "ROUGE-2", 4),
        MetricColumn("rougeL_f", "ROUGE-L", 4),
        MetricColumn("qa_f1", "QA-F1", 3),
    ),
}


# --- registry ---------------------------------------------------------------


class RunRegistry:
    """Index of runs under ``root``; all stored paths are relative to it."""

    FILENAME = "registry.json"

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.Lock()
        self.entries: dict[str, dict[str, Any]] = {}
        path = self.root / self.FILENAME
        if path.is_file():
            self.entries = json.loads(path.read_text(encoding="utf-8")).get("runs", {})

    def _rel(self, path: str | Path) -> str:
        p = Path(path)
        full = p if p.is_absolute() else self.root / p
        if not full.is_file():
            raise ValidationError(f"cannot register missing file {full}")
        try:
            return full.resolve().relative_to(self.root.resolve()).as_posix()
        except ValueError:
            raise ValidationError(f"{full} lies outside the registry root {self.root}") from None

    def register(
        self,
        run_id: str,
        *,
        plan_digest: str,
        manifest: str | Path,
        predictions: Mapping[str, str | Path] | None = None,
        reports: Mapping[str, str | Path] | None = None,
        replace: bool = False,
    ) -> dict[str, Any]:
        entry = {
            "plan_digest": plan_digest,
            "manifest": self._rel(manifest),
            "predictions": {k: self._rel(v) for k, v in sorted((predictions or {}).items())},
            "reports": {k: self._rel(v) for k, v in sorted((reports or {}).items())},
        }
        with self._lock:
            if run_id in self.entries and not replace:
                raise ValidationError(f"run_id {run_id!r} is already registered")
            self.entries[run_id] = entry
            self.save()
        return entry

    def save(self) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / self.FILENAME
        doc = {"runs": {k: self.entries[k] for k in sorted(self.entries)}}
        path.write_text(json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    def report(self, run_id: str, split: str) -> MetricReport | None:
        rel = self.entries.get(run_id, {}).get("reports", {}).get(split)
        if rel is None:
            return None
        return MetricReport.load(self.root / rel)

    def missing_files(self) -> list[str]:
        missing = []
        for run_id, entry in self.entries.items():
            paths = [entry["manifest"], *entry["predictions"].values(), *entry["reports"].values()]
            missing.extend(f"{run_id}: {p}" for p in paths if not (self.root / p).is_file())
        return missing

    def digest(self) -> str:
        """SHA-256 over every file under the root (relative path and content)."""
        h = hashlib.sha256()
        for dirpath, dirnames, filenames in os.walk(self.root):
            dirnames.sort()
            for name in sorted(filenames):
                full = Path(dirpath) / name
                rel = full.relative_to(self.root).as_posix()
                h.update(rel.encode("utf-8") + b"\0")
                h.update(hashlib.sha256(full.read_bytes()).digest())
        return h.hexdigest()


# --- tables -----------------------------------------------------------------


def _md_row(cells: Sequence[str]) -> str:
    return "| " + " | ".join(cells) + " |"


def _csv(rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


STATS_HEADER = ("Split", "Contexts", "QA Pairs", "QA/Context", "Ques. length", "Ans. length")


def _stats_rows(rows: Sequence[tuple[str, SplitStatistics]]) -> list[list[str]]:
    out = []
    for label, stats in rows:
        d = stats.display()
        out.append([label, d["contexts"], d["qa_pairs"], d["qa_per_context"], d["question_len"], d["answer_len"]])
    return out


def render_stats_markdown(rows: Sequence[tuple[str, SplitStatistics]]) -> str:
    lines = [_md_row(STATS_HEADER), "|" + "|".join(["---"] + ["---:"] * 5) + "|"]
    lines.extend(_md_row(r) for r in _stats_rows(rows))
    return "\n".join(lines) + "\n"


def render_stats_csv(rows: Sequence[tuple[str, SplitStatistics]]) -> str:
    return _csv([list(STATS_HEADER), *_stats_rows(rows)])


@dataclass
class ComparisonTable:
    """Wide table: one row per model, one column per (split, metric)."""

    style: str
    splits: tuple[str, ...]
    rows: list[tuple[str, dict[tuple[str, str], float | None]]]
    warnings: list[str] = field(default_factory=list)

    @property
    def columns(self) -> list[tuple[str, MetricColumn]]:
        return [(split, col) for split in self.splits for col in STYLES[self.style]]

    def best(self) -> dict[tuple[str, str], str]:
        """Best displayed value per column; ties at display precision are all flagged."""
        out = {}
        for split, col in self.columns:
            values = [v for _, cells in self.rows if (v := cells.get((split, col.attr))) is not None]
            if values:
                out[(split, col.attr)] = f"{max(values):.{col.decimals}f}"
        return out

    def _cells(self, bold: str, star: str) -> list[list[str]]:
        best = self.best()
        body = []
        for label, cells in self.rows:
            row = [label]
            for split, col in self.columns:
                value = cells.get((split, col.attr))
                if value is None:
                    row.append(GAP)
                    continue
                text = f"{value:.{col.decimals}f}"
                if text == best.get((split, col.attr)):
                    text = f"{bold}{text}{bold}{star}"
                row.append(text)
            body.append(row)
        return body

    def header(self) -> list[str]:
        multi = len(self.splits) > 1
        return ["Model"] + [f"{split} {col.label}" if multi else col.label for split, col in self.columns]

    def to_markdown(self) -> str:
        lines = [_md_row(self.header()), "|" + "|".join(["---"] + ["---:"] * len(self.columns)) + "|"]
        lines.extend(_md_row(r) for r in self._cells("**", ""))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        """CSV with best-per-column values suffixed by ``*``."""
        return _csv([self.header(), *self._cells("", "*")])

    def render(self, fmt: str) -> str:
        if fmt == "md":
            return self.to_markdown()
        if fmt == "csv":
            return self.to_csv()
        raise ValueError(f"unknown format {fmt!r}; expected 'md' or 'csv'")


def comparison_table(
    reports: Mapping[str, Mapping[str, MetricReport | None]],
    splits: Sequence[str],
    *,
    style: str = "table3",
) -> ComparisonTable:
    """Build a table from ``reports[run_id][split]``; rows sort by run_id."""
    if style not in STYLES:
        raise ValidationError(f"unknown table style {style!r}; expected one of {sorted(STYLES)}")
    table = ComparisonTable(style, tuple(splits), [])
    for run_id in sorted(reports):
        cells: dict[tuple[str, str], float | None] = {}
        for split in splits:
            report = reports[run_id].get(split)
            if report is None:
                msg = f"no metric report for run {run_id!r} on split {split!r}"
                log.warning(msg)
                table.warnings.append(msg)
            for col in STYLES[style]:
                cells[(split, col.attr)] = None if report is None else getattr(report, col.attr)
        table.rows.append((run_id, cells))
    return table


def cmd_report(registry: RunRegistry, run_ids: Sequence[str], splits: Sequence[str], *, style: str = "table3") -> ComparisonTable:
    unknown = [r for r in run_ids if r not in registry.entries]
    if unknown:
        raise ValidationError(f"unknown run ids: {', '.join(unknown)}")
    return comparison_table({r: {s: registry.report(r, s) for s in splits} for r in run_ids}, splits, style=style)
