"""Greedy-matching BERTScore over a pluggable token embedder.

Only deterministic mock embedders ship here; a production multilingual
encoder plugs in by implementing :class:`TokenEmbedder`.
"""

from __future__ import annotations

import hashlib
from collections.abc import Sequence
from typing import NamedTuple, Protocol

import numpy as np

from slmadapt.errors import BackendError
from slmadapt.metrics.tokenize import tokenize_hindi


class TokenEmbedder(Protocol):
    dim: int

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        """Return an array of shape ``(len(tokens), dim)``."""
        ...


class HashEmbedder:
    """Unit vectors seeded by a hash of each token.

    Components are non-negative, so cosines lie in [0, 1] and equal tokens
    always map to the same vector.
    """

    def __init__(self, dim: int = 64, salt: str = ""):
        self.dim = dim
        self.salt = salt
        self._cache: dict[str, np.ndarray] = {}

    def _vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            seed = int.from_bytes(hashlib.sha256(f"{self.salt}\x1f{token}".encode()).digest()[:8], "little")
            raw = np.abs(np.random.default_rng(seed).standard_normal(self.dim))
            vec = raw / np.linalg.norm(raw)
            self._cache[token] = vec
        return vec

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        if not tokens:
            return np.zeros((0, self.dim))
        return np.stack([self._vector(t) for t in tokens])


class OrthogonalEmbedder:
    """One-hot vectors: each distinct token gets its own basis direction."""

    def __init__(self, dim: int = 1024):
        self.dim = dim
        self._index: dict[str, int] = {}

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(tokens), self.dim))
        for row, token in enumerate(tokens):
            idx = self._index.setdefault(token, len(self._index))
            if idx >= self.dim:
                raise BackendError(f"OrthogonalEmbedder exhausted its {self.dim} dimensions")
            out[row, idx] = 1.0
        return out


class BertScore(NamedTuple):
    precision: float
    recall: float
    f1: float


def _embed(embedder: TokenEmbedder, tokens: Sequence[str]) -> np.ndarray:
    try:
        vecs = np.asarray(embedder.embed(list(tokens)), dtype=float)
    except BackendError:
        raise
    except Exception as exc:  # embedder implementations are third-party code
        raise BackendError(f"embedder failed: {exc}") from exc
    if vecs.shape != (len(tokens), embedder.dim):
        raise BackendError(f"embedder returned shape {vecs.shape}, expected {(len(tokens), embedder.dim)}")
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    return vecs / np.where(norms == 0, 1.0, norms)


def pair_bert_score(pred_tokens: Sequence[str], ref_tokens: Sequence[str], embedder: TokenEmbedder) -> BertScore:
    if not pred_tokens and not ref_tokens:
        return BertScore(1.0, 1.0, 1.0)
    if not pred_tokens or not ref_tokens:
        return BertScore(0.0, 0.0, 0.0)
    sims = np.clip(_embed(embedder, pred_tokens) @ _embed(embedder, ref_tokens).T, -1.0, 1.0)
    p = float(sims.max(axis=1).mean())
    r = float(sims.max(axis=0).mean())
    f = 0.0 if p + r <= 0 else 2 * p * r / (p + r)
    return BertScore(p, r, f)


def bert_score(
    preds: Sequence[str], refs: Sequence[str], embedder: TokenEmbedder, *, naive: bool = False
) -> BertScore:
    """Corpus means of per-pair greedy-match precision, recall and F1."""
    if len(preds) != len(refs):
        raise ValueError(f"{len(preds)} predictions but {len(refs)} references")
    if not preds:
        raise ValueError("empty corpus")
    scores = [
        pair_bert_score(tokenize_hindi(p, naive=naive).tokens, tokenize_hindi(r, naive=naive).tokens, embedder)
        for p, r in zip(preds, refs)
    ]
    n = len(scores)
    return BertScore(
        sum(s.precision for s in scores) / n,
        sum(s.recall for s in scores) / n,
        sum(s.f1 for s in scores) / n,
    )
