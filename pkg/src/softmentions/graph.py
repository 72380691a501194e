"""Sparse similarity matrix assembly, post-processing, connected components.

The matrix stores one value per unordered mention pair: 1.0 for
knowledge-base pairs, 0.99 for keyword-index pairs not covered by the
knowledge base, and the string-similarity score for remaining pairs at or
above the use threshold. Post-processing promotes a few classes of pairs
to 1.0 and deletes every edge touching a stoplisted broad term.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ConsistencyError, FormatError
from .fileio import iter_tsv_rows, open_text, read_lines, write_tsv
from .synonyms import SynonymPair, SynonymSource

DEFAULT_STOPLIST = ("R package", "r package", "interface")

COPYRIGHT_MARKS = "©®™"  # (c), (r), TM

_PRECEDENCE = {
    SynonymSource.KNOWLEDGE_BASE: 3,
    SynonymSource.KEYWORD_INDEX: 2,
    SynonymSource.STRING_SIMILARITY: 1,
}


@dataclass(frozen=True)
class Component:
    """A maximal set of mentions mutually reachable over stored edges."""

    members: tuple[int, ...]


@dataclass
class SimilarityGraph:
    mentions: Sequence[str]
    entries: dict[tuple[int, int], tuple[float, SynonymSource]]
    stoplist: frozenset[str] = frozenset(DEFAULT_STOPLIST)

    @property
    def n(self) -> int:
        return len(self.mentions)

    def value(self, i: int, j: int) -> float | None:
        if i > j:
            i, j = j, i
        entry = self.entries.get((i, j))
        return entry[0] if entry else None

    def covered_vertices(self) -> set[int]:
        covered: set[int] = set()
        for i, j in self.entries:
            covered.add(i)
            covered.add(j)
        return covered

    def submatrix(self, members: Iterable[int]) -> dict[tuple[int, int], float]:
        keep = set(members)
        return {
            key: value
            for key, (value, _) in self.entries.items()
            if key[0] in keep and key[1] in keep
        }


def build_matrix(
    pairs: Iterable[SynonymPair],
    mentions: Sequence[str],
    use_threshold: float = 0.97,
    stoplist: Iterable[str] = DEFAULT_STOPLIST,
) -> SimilarityGraph:
    """Assemble the similarity matrix from canonical synonym pairs.

    Knowledge-base pairs enter at 1.0 and keyword pairs at 0.99 regardless
    of threshold; string-similarity pairs enter at their score only when it
    reaches ``use_threshold``. When several channels cover one pair the
    higher-precedence channel wins (knowledge base, then keywords, then
    string similarity).
    """
    n = len(mentions)
    entries: dict[tuple[int, int], tuple[float, SynonymSource]] = {}
    best_rank: dict[tuple[int, int], int] = {}
    for pair in pairs:
        if pair.b >= n or pair.a < 0:
            raise ConsistencyError(
                f"pair ({pair.a}, {pair.b}) references an unknown mention id"
            )
        rank = _PRECEDENCE.get(pair.source)
        if rank is None:
            raise ConsistencyError(f"unexpected pair source: {pair.source}")
        if pair.source is SynonymSource.KNOWLEDGE_BASE:
            value = 1.0
        elif pair.source is SynonymSource.KEYWORD_INDEX:
            value = 0.99
        else:
            if pair.confidence < use_threshold:
                continue
            value = pair.confidence
        key = (pair.a, pair.b)
        if rank > best_rank.get(key, 0):
            best_rank[key] = rank
            entries[key] = (value, pair.source)
    return SimilarityGraph(mentions=mentions, entries=entries, stoplist=frozenset(stoplist))


def strip_for_comparison(text: str) -> str:
    """Drop digits, punctuation and copyright marks."""
    return "".join(
        ch
        for ch in text
        if not (
            ch.isdigit()
            or unicodedata.category(ch).startswith("P")
            or ch in COPYRIGHT_MARKS
        )
    )


def _promotable(a: str, b: str) -> bool:
    if strip_for_comparison(a) == strip_for_comparison(b):
        return True
    return len(a.split()) > 1 and len(b.split()) > 1 and a.lower() == b.lower()


def post_process(graph: SimilarityGraph) -> SimilarityGraph:
    """Apply the promotion and stoplist rules; idempotent.

    Stored pairs whose strings are equal once stripped, or that are
    multi-token and equal case-insensitively, are promoted to 1.0. Edges
    touching a stoplisted mention are removed.
    """
    entries: dict[tuple[int, int], tuple[float, SynonymSource]] = {}
    for (i, j), (value, source) in graph.entries.items():
        a, b = graph.mentions[i], graph.mentions[j]
        if a in graph.stoplist or b in graph.stoplist:
            continue
        if value < 1.0 and _promotable(a, b):
            entries[(i, j)] = (1.0, SynonymSource.POST_PROCESS)
        else:
            entries[(i, j)] = (value, source)
    return SimilarityGraph(mentions=graph.mentions, entries=entries, stoplist=graph.stoplist)


class UnionFind:
    """Disjoint sets with path compression and union by size."""

    def __init__(self):
        self.parent: dict[int, int] = {}
        self.size: dict[int, int] = {}

    def add(self, x: int) -> None:
        if x not in self.parent:
            self.parent[x] = x
            self.size[x] = 1

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return
        if self.size[rx] < self.size[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        self.size[rx] += self.size[ry]


def connected_components(graph: SimilarityGraph) -> list[Component]:
    """Components over stored edges, ordered by smallest member ID.

    Vertices without edges belong to no component; they are the mentions
    with no significant synonyms.
    """
    uf = UnionFind()
    for i, j in graph.entries:
        uf.add(i)
        uf.add(j)
        uf.union(i, j)
    groups: dict[int, list[int]] = {}
    for vertex in uf.parent:
        groups.setdefault(uf.find(vertex), []).append(vertex)
    components = [Component(members=tuple(sorted(g))) for g in groups.values()]
    components.sort(key=lambda c: c.members[0])
    return components


def read_stoplist(path) -> frozenset[str]:
    return frozenset(read_lines(path))


MATRIX_HEADER = ("i", "j", "value", "source")


def write_matrix_tsv(path, graph: SimilarityGraph) -> None:
    rows = [
        (str(i), str(j), repr(value), source.value)
        for (i, j), (value, source) in sorted(graph.entries.items())
    ]
    write_tsv(path, MATRIX_HEADER, rows)


def read_matrix_tsv(path, mentions: Sequence[str], stoplist: Iterable[str] = ()) -> SimilarityGraph:
    entries: dict[tuple[int, int], tuple[float, SynonymSource]] = {}
    with open_text(path) as fh:
        rows = iter_tsv_rows(fh)
        _, header = next(rows)
        if tuple(header) != MATRIX_HEADER:
            raise FormatError(f"bad matrix header: {header}")
        for _, fields in rows:
            if fields == [""]:
                continue
            i, j = int(fields[0]), int(fields[1])
            entries[(i, j)] = (float(fields[2]), SynonymSource(fields[3]))
    return SimilarityGraph(mentions=mentions, entries=entries, stoplist=frozenset(stoplist))
