"""Synonym-pair generation.

Three channels produce scored pairs between mention IDs:

* keyword expansion around package-registry entries (confidence 0.99),
* a knowledge-base synonym dictionary (confidence 1.0),
* Jaro-Winkler similarity over all mention pairs (confidence = score,
  recorded when the score clears the record threshold, 0.9 by default).

Pairs are stored canonically with a < b. The clustering stage later keeps
only pairs usable at its stricter threshold; everything recorded here goes
to the synonyms TSV for audit.
"""
from __future__ import annotations

import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import FormatError, RowError
from .fileio import iter_tsv_rows, open_text, write_tsv


class SynonymSource(str, Enum):
    KNOWLEDGE_BASE = "KnowledgeBase"
    KEYWORD_INDEX = "KeywordIndex"
    STRING_SIMILARITY = "StringSimilarity"
    POST_PROCESS = "PostProcess"


class Registry(str, Enum):
    PY = "PkgIndexPy"
    R = "PkgIndexR"
    BIOC = "PkgIndexBioc"


# Per-registry keyword lists used to qualify containment matches. Matching
# is case-sensitive; the lists carry both case variants on purpose.
REGISTRY_KEYWORDS: dict[Registry, tuple[str, ...]] = {
    Registry.PY: ("python", "Python", "API"),
    Registry.R: ("R", "r", "package", "Package", "R-package", "R-Package", "r-package"),
    Registry.BIOC: (
        "R",
        "r",
        "package",
        "Package",
        "R-package",
        "R-Package",
        "r-package",
        "bioconductor",
        "Bioconductor",
    ),
}

KB_CONFIDENCE = 1.0
KEYWORD_CONFIDENCE = 0.99

WINKLER_PREFIX_SCALE = 0.1
WINKLER_MAX_PREFIX = 4
# Classic formulation: the prefix boost only kicks in above this Jaro score.
WINKLER_BOOST_THRESHOLD = 0.7


@dataclass(frozen=True)
class SynonymPair:
    """A scored, source-attributed edge between two mention IDs (a < b)."""

    a: int
    b: int
    confidence: float
    source: SynonymSource

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError(f"self-pair for mention id {self.a}")
        if self.a > self.b:
            raise ValueError("pair not in canonical order (a < b)")
        if not 0.0 < self.confidence <= 1.0:
            raise ValueError(f"confidence out of range: {self.confidence}")

    @classmethod
    def of(cls, a: int, b: int, confidence: float, source: SynonymSource) -> "SynonymPair":
        if a > b:
            a, b = b, a
        return cls(a, b, confidence, source)


@dataclass
class RegistryIndex:
    """A package-registry snapshot: entry names plus qualifying keywords."""

    registry: Registry
    entries: set[str]
    keywords: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.keywords:
            self.keywords = REGISTRY_KEYWORDS[self.registry]


_TOKEN_SPLIT = re.compile(r"[\W_]+", re.UNICODE)


def tokens(text: str) -> tuple[str, ...]:
    """Word tokens, splitting on whitespace, hyphens and other punctuation."""
    return tuple(t for t in _TOKEN_SPLIT.split(text) if t)


def contains_tokens(haystack: tuple[str, ...], needle: tuple[str, ...]) -> bool:
    """True when needle occurs as a contiguous run of whole tokens."""
    if not needle or len(needle) > len(haystack):
        return False
    first = needle[0]
    span = len(needle)
    for i, tok in enumerate(haystack[: len(haystack) - span + 1]):
        if tok == first and haystack[i : i + span] == needle:
            return True
    return False


def generate_keyword_synonyms(
    index: RegistryIndex,
    id_table: Mapping[str, int],
    skip_report: list[str] | None = None,
) -> list[SynonymPair]:
    """Pair registry entries with mentions that contain them plus a keyword.

    Containment means the entry appears literally inside the mention AND on
    whole-token boundaries, so "R" never matches inside "PRISM" and a
    hyphenated entry does not match a respelled variant. An entry
    participates only when it is itself a corpus mention. Entries shorter
    than two characters are skipped (and reported) to guard against
    pathological containment.
    """
    mention_tokens = {m: tokens(m) for m in id_table}
    keyword_token_seqs = [tokens(k) for k in index.keywords]
    pairs: list[SynonymPair] = []
    for entry in sorted(index.entries):
        if len(entry) < 2:
            if skip_report is not None:
                skip_report.append(entry)
            continue
        entry_id = id_table.get(entry)
        if entry_id is None:
            continue
        entry_toks = mention_tokens[entry]
        for mention, mention_id in id_table.items():
            if mention == entry or entry not in mention:
                continue
            toks = mention_tokens[mention]
            if not contains_tokens(toks, entry_toks):
                continue
            if any(contains_tokens(toks, kw) for kw in keyword_token_seqs):
                pairs.append(
                    SynonymPair.of(
                        entry_id, mention_id, KEYWORD_CONFIDENCE, SynonymSource.KEYWORD_INDEX
                    )
                )
    return sorted(set(pairs), key=lambda p: (p.a, p.b))


def load_kb_synonyms(
    kb: Mapping[str, Sequence[str]],
    id_table: Mapping[str, int],
    unmatched: list[tuple[str, str]] | None = None,
) -> list[SynonymPair]:
    """Turn dictionary entries into pairs where both sides are corpus mentions."""
    pairs: list[SynonymPair] = []
    for key in sorted(kb):
        key_id = id_table.get(key)
        for syn in kb[key]:
            if syn == key:
                continue
            syn_id = id_table.get(syn)
            if key_id is None or syn_id is None:
                if unmatched is not None:
                    unmatched.append((key, syn))
                continue
            pairs.append(
                SynonymPair.of(key_id, syn_id, KB_CONFIDENCE, SynonymSource.KNOWLEDGE_BASE)
            )
    return sorted(set(pairs), key=lambda p: (p.a, p.b))


def read_kb_dict(path) -> dict[str, list[str]]:
    """Two-column TSV (key, synonym); values deduplicated, self-maps dropped."""
    kb: dict[str, list[str]] = {}
    with open_text(path) as fh:
        rows = iter_tsv_rows(fh)
        _, header = next(rows)
        if header != ["key", "synonym"]:
            raise FormatError(f"bad KB dictionary header: {header}")
        for lineno, fields in rows:
            if fields == [""]:
                continue
            if len(fields) != 2:
                raise RowError(lineno, f"expected 2 columns, found {len(fields)}")
            key, syn = fields
            if syn == key:
                continue
            bucket = kb.setdefault(key, [])
            if syn not in bucket:
                bucket.append(syn)
    return kb


def jaro_winkler(a: str, b: str) -> float:
    """Jaro similarity with the Winkler prefix boost.

    Boost parameters are the canonical defaults (scale 0.1 over at most 4
    prefix characters, applied when the Jaro score exceeds 0.7). Two empty
    strings compare equal (1.0 by convention); empty against non-empty is 0.
    """
    if a == b:
        return 1.0
    la, lb = len(a), len(b)
    if not la or not lb:
        return 0.0
    window = max(la, lb) // 2 - 1
    if window < 0:
        window = 0
    a_match = [False] * la
    b_match = [False] * lb
    matches = 0
    for i, ch in enumerate(a):
        lo = i - window if i > window else 0
        hi = i + window + 1
        if hi > lb:
            hi = lb
        for j in range(lo, hi):
            if not b_match[j] and b[j] == ch:
                a_match[i] = True
                b_match[j] = True
                matches += 1
                break
    if matches == 0:
        return 0.0
    transposed = 0
    k = 0
    for i in range(la):
        if not a_match[i]:
            continue
        while not b_match[k]:
            k += 1
        if a[i] != b[k]:
            transposed += 1
        k += 1
    t = transposed / 2.0
    m = float(matches)
    jaro = (m / la + m / lb + (m - t) / m) / 3.0
    if jaro > WINKLER_BOOST_THRESHOLD:
        prefix = 0
        for ca, cb in zip(a, b):
            if ca != cb or prefix == WINKLER_MAX_PREFIX:
                break
            prefix += 1
        jaro += prefix * WINKLER_PREFIX_SCALE * (1.0 - jaro)
    return jaro


def _similarity_block(
    args: tuple[list[tuple[int, str]], int, int, float]
) -> list[tuple[int, int, float]]:
    items, start, stop, threshold = args
    min_ratio = 5.0 * threshold - 4.0
    out = []
    for i in range(start, stop):
        id_i, s_i = items[i]
        len_i = len(s_i)
        for j in range(i + 1, len(items)):
            id_j, s_j = items[j]
            shorter, longer = sorted((len_i, len(s_j)))
            if longer == 0 or shorter / longer < min_ratio:
                continue
            score = jaro_winkler(s_i, s_j)
            if score >= threshold:
                out.append((id_i, id_j, score) if id_i < id_j else (id_j, id_i, score))
    return out


def all_pairs_similarity(
    id_table: Mapping[str, int],
    record_threshold: float = 0.9,
    workers: int = 1,
) -> list[SynonymPair]:
    """All mention pairs scoring at or above the record threshold.

    Candidate pairs are pruned by a length-ratio bound that provably cannot
    exclude a qualifying pair: with matches capped by the shorter string,
    Jaro is at most (2 + short/long) / 3 and the Winkler boost at most
    closes 40% of the gap to 1, so any pair below the bound scores below
    the threshold. The result equals the exhaustive double loop.
    """
    if not 0.0 < record_threshold <= 1.0:
        raise ValueError(f"record_threshold out of range: {record_threshold}")
    items = sorted((idx, mention) for mention, idx in id_table.items())
    n = len(items)
    triples: list[tuple[int, int, float]] = []
    if workers > 1 and n > 2:
        bounds = [round(k * n / (2 * workers)) for k in range(2 * workers + 1)]
        blocks = [
            (items, lo, hi, record_threshold)
            for lo, hi in zip(bounds, bounds[1:])
            if lo < hi
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for block in pool.map(_similarity_block, blocks):
                triples.extend(block)
    else:
        triples = _similarity_block((items, 0, n, record_threshold))
    triples.sort()
    return [
        SynonymPair.of(a, b, score, SynonymSource.STRING_SIMILARITY)
        for a, b, score in triples
    ]


KbSynonymDict = Mapping[str, Sequence[str]]


def generate_synonym_pairs(
    id_table: Mapping[str, int],
    registries: Sequence[RegistryIndex] = (),
    kb: KbSynonymDict | None = None,
    record_threshold: float = 0.9,
    workers: int = 1,
    skip_report: list[str] | None = None,
    unmatched: list[tuple[str, str]] | None = None,
) -> list[SynonymPair]:
    """Run all three channels and return their pairs, sorted.

    Duplicate coverage across channels is kept; matrix assembly resolves
    precedence.
    """
    pairs: list[SynonymPair] = []
    for index in registries:
        pairs.extend(generate_keyword_synonyms(index, id_table, skip_report))
    if kb:
        pairs.extend(load_kb_synonyms(kb, id_table, unmatched))
    pairs.extend(all_pairs_similarity(id_table, record_threshold, workers=workers))
    return sorted(set(pairs), key=lambda p: (p.a, p.b, p.source.value))


SYNONYMS_HEADER = (
    "ID",
    "synonym_ID",
    "software_mention",
    "synonym",
    "synonym_conf",
    "synonym_source",
)


def write_synonyms_tsv(path, pairs: Iterable[SynonymPair], reverse: Mapping[int, str]) -> None:
    rows = [
        (str(p.a), str(p.b), reverse[p.a], reverse[p.b], repr(p.confidence), p.source.value)
        for p in sorted(pairs, key=lambda p: (p.a, p.b, p.source.value))
    ]
    write_tsv(path, SYNONYMS_HEADER, rows)


def read_synonyms_tsv(path) -> list[SynonymPair]:
    pairs: list[SynonymPair] = []
    with open_text(path) as fh:
        rows = iter_tsv_rows(fh)
        _, header = next(rows)
        if tuple(header) != SYNONYMS_HEADER:
            raise FormatError(f"bad synonyms header: {header}")
        for lineno, fields in rows:
            if fields == [""]:
                continue
            if len(fields) != len(SYNONYMS_HEADER):
                raise RowError(lineno, f"expected {len(SYNONYMS_HEADER)} columns")
            pairs.append(
                SynonymPair.of(
                    int(fields[0]), int(fields[1]), float(fields[4]), SynonymSource(fields[5])
                )
            )
    return pairs
