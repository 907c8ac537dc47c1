"""Devanagari-aware word tokenizer shared by every lexical metric.

English-centric ROUGE tokenizers drop everything outside ``[a-z0-9]``,
which erases Hindi text entirely. This one keeps Devanagari letter and digit
runs intact (including virama, nukta and ZWJ/ZWNJ sequences), removes
danda/double danda and punctuation, and lowercases Latin script only.
"""

from __future__ import annotations

import string
import unicodedata
from dataclasses import dataclass
from functools import lru_cache

DANDA = "।"
DOUBLE_DANDA = "॥"

_ASCII_PUNCT = frozenset(string.punctuation)


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    source_text: str = ""

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    @classmethod
    def of(cls, tokens) -> TokenSequence:
        tokens = tuple(tokens)
        return cls(tokens, " ".join(tokens))


@lru_cache(maxsize=4096)
def _is_separator(ch: str) -> bool:
    if ch in _ASCII_PUNCT or ch == DANDA or ch == DOUBLE_DANDA:
        return True
    # General Punctuation block: curly quotes, dashes, ellipsis. Format
    # characters there (ZWJ/ZWNJ) are part of Devanagari words and stay.
    if "\u2000" <= ch <= "\u206f":
        return unicodedata.category(ch).startswith("P")
    return False


@lru_cache(maxsize=4096)
def _is_latin(ch: str) -> bool:
    try:
        return unicodedata.name(ch).startswith("LATIN")
    except ValueError:
        return False


def _lower_latin(token: str) -> str:
    if token.isascii():
        return token.lower()
    return "".join(c.lower() if _is_latin(c) else c for c in token)


def hindi_words(text: str) -> list[str]:
    text = unicodedata.normalize("NFC", text)
    cleaned = "".join(" " if _is_separator(c) else c for c in text)
    return [_lower_latin(tok) for tok in cleaned.split()]


def tokenize_hindi(text: str, *, naive: bool = False) -> TokenSequence:
    """Tokenize ``text``; ``naive=True`` falls back to plain whitespace splitting."""
    if naive:
        return TokenSequence(tuple(text.split()), text)
    return TokenSequence(tuple(hindi_words(text)), text)
