"""Line grammar for generated question/answer blocks.

Canonical form, one pair per block, blocks separated by a blank line::

    Q1: <question>
    A1: <answer>

The block number is optional when parsing (``Q: ...`` works too), as are
Markdown bold around the marker and the Hindi markers प्रश्न/उत्तर. A line
without a marker continues the question or answer above it until a blank
line closes the block; anything else is commentary and is ignored.
"""

from __future__ import annotations

import re
from collections.abc import Sequence
from dataclasses import dataclass

_MARKER = re.compile(
    r"^\s*(?:\*\*)?(?P<kind>Q|A|प्रश्न|उत्तर)\s*(?P<num>\d+)?\s*[:：](?:\*\*)?[ \t]?(?P<text>.*)$"
)
_KIND = {"Q": "Q", "प्रश्न": "Q", "A": "A", "उत्तर": "A"}


@dataclass(frozen=True)
class ParseOutcome:
    pairs: list[tuple[str, str]]
    incomplete: int


def scan_blocks(raw: str) -> ParseOutcome:
    """Extract pairs and count blocks that started but never completed."""
    pairs: list[tuple[str, str]] = []
    incomplete = 0
    question: list[str] | None = None
    answer: list[str] | None = None
    contiguous = False  # no blank line since the last marker

    def close() -> None:
        nonlocal question, answer, incomplete
        if question is not None:
            q = "\n".join(question).strip()
            a = "\n".join(answer).strip() if answer is not None else ""
            if q and a:
                pairs.append((q, a))
            else:
                incomplete += 1
        question = answer = None

    for line in raw.replace("\r\n", "\n").replace("\r", "\n").split("\n"):
        m = _MARKER.match(line)
        if m:
            kind = _KIND[m.group("kind")]
            text = m.group("text")
            if kind == "Q":
                close()
                question, answer = [text], None
            elif question is not None and answer is None:
                answer = [text]
            else:
                # answer without an open question, or a second answer
                close()
                incomplete += 1
            contiguous = True
        elif not line.strip():
            if answer is not None:
                close()
            contiguous = False
        elif contiguous and question is not None:
            (answer if answer is not None else question).append(line)
    close()
    return ParseOutcome(pairs, incomplete)


def parse_generation(raw: str) -> list[tuple[str, str]]:
    """Return every well-formed (question, answer) pair in ``raw``, trimmed."""
    return scan_blocks(raw).pairs


def render_pairs(pairs: Sequence[tuple[str, str]], *, numbered: bool = True) -> str:
    blocks = []
    for i, (q, a) in enumerate(pairs, start=1):
        tag = str(i) if numbered else ""
        blocks.append(f"Q{tag}: {q}\nA{tag}: {a}")
    return "\n\n".join(blocks)
