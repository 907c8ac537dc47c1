"""ROUGE-N, ROUGE-L, corpus BLEU and SQuAD-style token F1."""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import NamedTuple

from slmadapt.metrics.tokenize import TokenSequence, tokenize_hindi


class Score(NamedTuple):
    precision: float
    recall: float
    fmeasure: float


def _tokens(seq: TokenSequence | Sequence[str]) -> tuple[str, ...]:
    return seq.tokens if isinstance(seq, TokenSequence) else tuple(seq)


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def rouge_n(pred: TokenSequence | Sequence[str], ref: TokenSequence | Sequence[str], n: int) -> Score:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    pred_counts = ngrams(_tokens(pred), n)
    ref_counts = ngrams(_tokens(ref), n)
    pred_total = sum(pred_counts.values())
    ref_total = sum(ref_counts.values())
    if pred_total == 0 or ref_total == 0:
        return Score(0.0, 0.0, 0.0)
    overlap = sum((pred_counts & ref_counts).values())
    p, r = overlap / pred_total, overlap / ref_total
    return Score(p, r, _f1(p, r))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    row = [0] * (len(b) + 1)
    for x in a:
        diag = 0
        for j, y in enumerate(b, start=1):
            up = row[j]
            row[j] = diag + 1 if x == y else max(row[j], row[j - 1])
            diag = up
    return row[-1]


def rouge_l(pred: TokenSequence | Sequence[str], ref: TokenSequence | Sequence[str]) -> Score:
    p_tok, r_tok = _tokens(pred), _tokens(ref)
    if not p_tok or not r_tok:
        return Score(0.0, 0.0, 0.0)
    lcs = lcs_length(p_tok, r_tok)
    p, r = lcs / len(p_tok), lcs / len(r_tok)
    return Score(p, r, _f1(p, r))


@dataclass(frozen=True)
class BleuStats:
    """Sufficient statistics for corpus BLEU; they add across sentences."""

    pred_len: int
    ref_len: int
    matches: tuple[int, ...]
    totals: tuple[int, ...]

    def __add__(self, other: BleuStats) -> BleuStats:
        return BleuStats(
            self.pred_len + other.pred_len,
            self.ref_len + other.ref_len,
            tuple(a + b for a, b in zip(self.matches, other.matches)),
            tuple(a + b for a, b in zip(self.totals, other.totals)),
        )


def bleu_stats(pred: TokenSequence | Sequence[str], ref: TokenSequence | Sequence[str], max_n: int) -> BleuStats:
    p_tok, r_tok = _tokens(pred), _tokens(ref)
    matches, totals = [], []
    for n in range(1, max_n + 1):
        pc, rc = ngrams(p_tok, n), ngrams(r_tok, n)
        matches.append(sum((pc & rc).values()))
        totals.append(sum(pc.values()))
    return BleuStats(len(p_tok), len(r_tok), tuple(matches), tuple(totals))


SMOOTHING = ("none", "epsilon")


def bleu_from_stats(stats: BleuStats, smoothing: str = "none", epsilon: float = 0.1) -> float:
    if smoothing not in SMOOTHING:
        raise ValueError(f"unknown smoothing {smoothing!r}; expected one of {SMOOTHING}")
    if stats.pred_len == 0:
        return 0.0
    log_sum = 0.0
    for m, t in zip(stats.matches, stats.totals):
        if t == 0:
            return 0.0
        if m == 0:
            if smoothing == "none":
                return 0.0
            m = epsilon
        log_sum += math.log(m / t)
    geo_mean = math.exp(log_sum / len(stats.matches))
    c, r = stats.pred_len, stats.ref_len
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return bp * geo_mean


def bleu(
    preds: Sequence[TokenSequence | Sequence[str]],
    refs: Sequence[TokenSequence | Sequence[str]],
    max_n: int = 4,
    smoothing: str = "none",
    epsilon: float = 0.1,
) -> float:
    """Corpus BLEU in [0, 1] with n-gram counts pooled over all sentences.

    Uniform weights over orders 1..max_n, one reference per prediction, and
    the brevity penalty ``exp(1 - r/c)`` applied only when the pooled
    prediction length ``c`` is shorter than the pooled reference length ``r``.
    """
    if len(preds) != len(refs):
        raise ValueError(f"{len(preds)} predictions but {len(refs)} references")
    if not preds:
        raise ValueError("empty corpus")
    if max_n < 1:
        raise ValueError(f"max_n must be >= 1, got {max_n}")
    total = BleuStats(0, 0, (0,) * max_n, (0,) * max_n)
    for p, r in zip(preds, refs):
        total = total + bleu_stats(p, r, max_n)
    return bleu_from_stats(total, smoothing, epsilon)


def token_f1(pred_tokens: Sequence[str], ref_tokens: Sequence[str]) -> float:
    if not pred_tokens and not ref_tokens:
        return 1.0
    if not pred_tokens or not ref_tokens:
        return 0.0
    overlap = sum((Counter(pred_tokens) & Counter(ref_tokens)).values())
    return 2 * overlap / (len(pred_tokens) + len(ref_tokens))


def qa_f1(pred: str, refs: Iterable[str], *, naive: bool = False) -> float:
    """Bag-of-tokens F1 against the best-matching reference."""
    refs = list(refs)
    if not refs:
        raise ValueError("qa_f1 needs at least one reference")
    p_tok = tokenize_hindi(pred, naive=naive).tokens
    return max(token_f1(p_tok, tokenize_hindi(r, naive=naive).tokens) for r in refs)
