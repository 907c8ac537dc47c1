"""Near-duplicate filtering of QA pairs by question-token Jaccard similarity.

Pairs on the same context are linked when their question similarity reaches
the threshold; each connected component keeps only its earliest pair. Linking
through dropped pairs (single linkage) makes the kept count monotone in the
threshold, which nearest-kept-only filtering is not.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

from slmadapt.data_core import QAPair
from slmadapt.metrics.tokenize import hindi_words


@dataclass(frozen=True)
class DedupCluster:
    representative: str
    duplicates: tuple[str, ...]
    # weakest link that still holds the cluster together
    score: float


@dataclass(frozen=True)
class DedupReport:
    kept: int
    dropped: int
    clusters: tuple[DedupCluster, ...] = field(default=())

    @property
    def dropped_ids(self) -> set[str]:
        return {d for c in self.clusters for d in c.duplicates}


def jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def _bottleneck(members: list[int], sim: Callable[[int, int], float]) -> float:
    """Smallest edge on the maximum spanning tree of ``members``."""
    if len(members) < 2:
        return 1.0
    best = {m: sim(members[0], m) for m in members[1:]}
    weakest = 1.0
    while best:
        m = max(best, key=lambda k: (best[k], -k))
        weakest = min(weakest, best.pop(m))
        for other in best:
            best[other] = max(best[other], sim(m, other))
    return weakest


def dedup_filter(
    pairs: Sequence[QAPair],
    threshold: float,
    *,
    enabled: bool = True,
    tokenizer: Callable[[str], Sequence[str]] = hindi_words,
) -> tuple[list[QAPair], DedupReport]:
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    if not enabled:
        return list(pairs), DedupReport(kept=len(pairs), dropped=0)
    token_sets = [frozenset(tokenizer(p.question)) for p in pairs]
    by_context: dict[str, list[int]] = {}
    for i, p in enumerate(pairs):
        by_context.setdefault(p.context_id, []).append(i)

    def sim(i: int, j: int) -> float:
        return jaccard(token_sets[i], token_sets[j])

    parent = list(range(len(pairs)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for members in by_context.values():
        for a_pos, i in enumerate(members):
            for j in members[a_pos + 1:]:
                if sim(i, j) >= threshold:
                    ri, rj = find(i), find(j)
                    if ri != rj:
                        parent[max(ri, rj)] = min(ri, rj)

    components: dict[int, list[int]] = {}
    for i in range(len(pairs)):
        components.setdefault(find(i), []).append(i)
    kept = [pairs[root] for root in sorted(components)]
    clusters = tuple(
        DedupCluster(
            representative=pairs[members[0]].pair_id,
            duplicates=tuple(pairs[m].pair_id for m in members[1:]),
            score=_bottleneck(members, sim),
        )
        for root, members in sorted(components.items())
        if len(members) > 1
    )
    return kept, DedupReport(kept=len(kept), dropped=len(pairs) - len(kept), clusters=clusters)
