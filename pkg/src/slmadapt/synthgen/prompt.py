"""Generation config and few-shot prompt assembly."""

from __future__ import annotations

import hashlib
from collections.abc import Sequence
from dataclasses import dataclass, field

from slmadapt.data_core import ContextRecord, DatasetSplit, QAPair
from slmadapt.errors import ValidationError
from slmadapt.synthgen.grammar import render_pairs

# Placeholder instruction; deployments are expected to supply their own.
DEFAULT_PREAMBLE = (
    "You are given passages from a Hindi tourism guide. For the final passage, write new "
    "question-answer pairs in Hindi that can be answered from the passage alone. Follow the "
    "format of the examples exactly: each question on a line starting with Q<number>, its "
    "answer on the next line starting with A<number>, and a blank line between pairs."
)
CONTEXT_LABEL = "Context:"


class PromptError(ValidationError):
    pass


@dataclass(frozen=True)
class GenerationConfig:
    backend_id: str
    temperature: float = 0.7
    top_p: float = 0.9
    max_new_tokens: int = 1024
    num_fewshot: int = 2
    seed: int | None = None
    max_attempts: int = 3
    system_preamble: str = field(default=DEFAULT_PREAMBLE, repr=False)

    def __post_init__(self) -> None:
        if not self.backend_id:
            raise ValidationError("backend_id must be non-empty")
        if not 0 <= self.temperature <= 2:
            raise ValidationError(f"temperature must lie in [0, 2], got {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise ValidationError(f"top_p must lie in (0, 1], got {self.top_p}")
        if self.max_new_tokens < 1:
            raise ValidationError(f"max_new_tokens must be positive, got {self.max_new_tokens}")
        if self.num_fewshot < 0:
            raise ValidationError(f"num_fewshot must be non-negative, got {self.num_fewshot}")
        if self.max_attempts < 1:
            raise ValidationError(f"max_attempts must be positive, got {self.max_attempts}")


@dataclass(frozen=True)
class PromptBundle:
    system_preamble: str
    fewshot_examples: tuple[tuple[str, tuple[tuple[str, str], ...]], ...]
    target_context: str
    rendered: str
    prompt_hash: str


Exemplar = tuple[ContextRecord, Sequence[QAPair]]


def _context_block(text: str) -> str:
    return f"{CONTEXT_LABEL}\n{text}"


def build_prompt(target: ContextRecord, exemplars: Sequence[Exemplar], config: GenerationConfig) -> PromptBundle:
    if len(exemplars) != config.num_fewshot:
        raise PromptError(f"expected {config.num_fewshot} exemplars, got {len(exemplars)}")
    shots = []
    for ctx, pairs in exemplars:
        if not pairs:
            raise PromptError(f"exemplar context {ctx.context_id!r} has no QA pairs")
        for p in pairs:
            if p.answer is None:
                raise PromptError(f"exemplar pair {p.pair_id!r} has no answer")
        shots.append((ctx.text, tuple((p.question, p.answer) for p in pairs)))
    parts = [config.system_preamble]
    for text, qa in shots:
        parts.append(_context_block(text) + "\n\n" + render_pairs(qa))
    parts.append(_context_block(target.text))
    rendered = "\n\n".join(parts) + "\n"
    if rendered.count(target.text) != 1:
        raise PromptError(f"target context {target.context_id!r} text occurs more than once in the prompt")
    return PromptBundle(
        system_preamble=config.system_preamble,
        fewshot_examples=tuple(shots),
        target_context=target.text,
        rendered=rendered,
        prompt_hash=hashlib.sha256(rendered.encode("utf-8")).hexdigest(),
    )


def select_exemplars(pool: DatasetSplit, target: ContextRecord, k: int) -> list[Exemplar]:
    """First ``k`` pool contexts ordered by their smallest answered pair_id.

    The target's own context, and any whose text overlaps it, are skipped.
    """
    if k == 0:
        return []
    by_id = pool.context_by_id
    grouped: dict[str, list[QAPair]] = {}
    for pair in sorted((p for p in pool.pairs if p.answer is not None), key=lambda p: p.pair_id):
        grouped.setdefault(pair.context_id, []).append(pair)
    chosen: list[Exemplar] = []
    for cid, pairs in grouped.items():
        ctx = by_id[cid]
        if cid == target.context_id or target.text in ctx.text or ctx.text in target.text:
            continue
        chosen.append((ctx, pairs))
        if len(chosen) == k:
            return chosen
    raise PromptError(f"exemplar pool {pool.name!r} has fewer than {k} usable answered contexts")
