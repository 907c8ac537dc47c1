from __future__ import annotations

import sys
from pathlib import Path

import pytest

from slmadapt.data_core import ContextRecord, DatasetSplit, Provenance, QAPair, ingest_dataset

DATA = Path(__file__).parent / "data"
sys.path.insert(0, str(Path(__file__).parent))


def make_split(name, spec, *, provenance=Provenance.ORIGINAL, generator_id=None, answered=True):
    """Build a split from ``{context_id: (text, [(question, answer), ...])}``."""
    contexts, pairs = [], []
    for cid, (text, qas) in spec.items():
        contexts.append(ContextRecord(cid, text, name))
        for k, (q, a) in enumerate(qas, start=1):
            pairs.append(
                QAPair(
                    pair_id=f"{name}-{cid}-{k}",
                    context_id=cid,
                    question=q,
                    answer=a if answered else None,
                    provenance=provenance,
                    generator_id=generator_id,
                )
            )
    return DatasetSplit(name, tuple(contexts), tuple(pairs))


def dedup_fixture_pairs():
    """Ten questions over two contexts forming three paraphrase clusters."""
    qs = [
        ("c1", "गंगा आरती कब होती है?"),
        ("c1", "गंगा आरती कब होती है"),
        ("c1", "गंगा की आरती कब होती है?"),
        ("c1", "आरती कितने बजे होती है?"),
        ("c1", "मंदिर किसने बनवाया?"),
        ("c1", "मंदिर किसने बनवाया था?"),
        ("c1", "इस मंदिर को किसने बनवाया था?"),
        ("c2", "घाट कितनी दूर है?"),
        ("c2", "घाट कितनी दूर है?"),
        ("c2", "गंगा आरती कब होती है?"),
    ]
    return [QAPair(f"p{i}", c, q, "a", Provenance.SYNTHETIC, "g") for i, (c, q) in enumerate(qs, start=1)]


def sized_split(name, n_pairs, *, provenance=Provenance.ORIGINAL, generator_id=None, per_context=5):
    """A split with exactly ``n_pairs`` synthetic-looking pairs."""
    n_ctx = -(-n_pairs // per_context)
    contexts = tuple(ContextRecord(f"c{i}", f"संदर्भ {i}", name) for i in range(n_ctx))
    pairs = tuple(
        QAPair(f"{name}-{i}", f"c{i // per_context}", f"प्रश्न {i}?", f"उत्तर {i}", provenance, generator_id)
        for i in range(n_pairs)
    )
    return DatasetSplit(name, contexts, pairs)


@pytest.fixture
def toy_train():
    return ingest_dataset(DATA / "toy_train.jsonl", "train")


@pytest.fixture
def toy_validation():
    return ingest_dataset(DATA / "toy_validation.jsonl", "validation")


@pytest.fixture
def toy_heldout():
    return ingest_dataset(DATA / "toy_test2.jsonl", "test2")


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
