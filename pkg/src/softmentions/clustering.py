"""Density clustering per connected component and cluster naming.

Each component's similarity submatrix becomes a distance matrix
(distance = 1 - similarity, pairs without a stored similarity are treated
as farther than any eps). DBSCAN runs per component with deterministic
tie-breaking, and every cluster is named after its member with the highest
distinct-paper frequency.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import FormatError
from .fileio import format_tsv, write_text
from .graph import (
    DEFAULT_STOPLIST,
    SimilarityGraph,
    build_matrix,
    connected_components,
    post_process,
)
from .ingest import (
    CORPUS_FIELDS,
    FrequencyTable,
    MentionRecord,
    assign_ids,
    compute_frequencies,
    serialize_mentions,
)
from .synonyms import (
    KbSynonymDict,
    RegistryIndex,
    SynonymPair,
    generate_synonym_pairs,
)


def to_distance(submatrix: Mapping[tuple[int, int], float]) -> dict[tuple[int, int], float]:
    """Distance = 1 - similarity for stored entries; absent entries stay unknown.

    Distances are rounded to 12 decimals so that binary float noise cannot
    push an edge at the use threshold past an eps meant to admit it
    (1 - 0.97 must compare equal to 0.03).
    """
    return {key: round(1.0 - value, 12) for key, value in submatrix.items()}


def dbscan(
    distances: Mapping[tuple[int, int], float],
    points: Sequence[int],
    eps: float,
    min_pts: int,
) -> tuple[list[tuple[int, ...]], tuple[int, ...]]:
    """DBSCAN over a sparse precomputed distance matrix.

    A point is core when it has at least min_pts neighbors within eps,
    counting itself. Cluster seeds are scanned in ascending ID order, so a
    border point reachable from several clusters joins the cluster whose
    core set was discovered first. Returns (clusters, noise); clusters keep
    discovery order and their members are sorted.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive: {eps}")
    if min_pts < 1:
        raise ValueError(f"min_pts must be at least 1: {min_pts}")
    ordered = sorted(points)
    neighbors: dict[int, list[int]] = {p: [] for p in ordered}
    for (i, j), dist in distances.items():
        if dist <= eps and i in neighbors and j in neighbors:
            neighbors[i].append(j)
            neighbors[j].append(i)
    for adjacency in neighbors.values():
        adjacency.sort()
    core = {p for p in ordered if len(neighbors[p]) + 1 >= min_pts}
    assigned: dict[int, int] = {}
    clusters: list[list[int]] = []
    for seed in ordered:
        if seed in assigned or seed not in core:
            continue
        label = len(clusters)
        clusters.append([seed])
        assigned[seed] = label
        queue = [seed]
        while queue:
            current = queue.pop(0)
            for neighbor in neighbors[current]:
                if neighbor in assigned:
                    continue
                assigned[neighbor] = label
                clusters[label].append(neighbor)
                if neighbor in core:
                    queue.append(neighbor)
    noise = tuple(p for p in ordered if p not in assigned)
    return [tuple(sorted(c)) for c in clusters], noise


@dataclass(frozen=True)
class Cluster:
    """A disambiguated software entity."""

    members: tuple[int, ...]
    name_id: int
    name: str


def name_clusters(
    clusters: Iterable[Sequence[int]],
    freq: FrequencyTable,
    reverse: Mapping[int, str],
) -> list[Cluster]:
    """Name each cluster after its highest-frequency member.

    Ties break on the lexicographically smallest mention string, then the
    smallest ID. Members without a recorded frequency count as 0.
    """
    named = []
    for members in clusters:
        name_id = min(members, key=lambda m: (-freq.get(m), reverse[m], m))
        named.append(
            Cluster(members=tuple(sorted(members)), name_id=name_id, name=reverse[name_id])
        )
    return named


@dataclass
class Accounting:
    """Partition of all unique mentions by disambiguation outcome."""

    no_significant_synonyms: int
    no_cluster_output: int
    disambiguated: int

    @property
    def total(self) -> int:
        return self.no_significant_synonyms + self.no_cluster_output + self.disambiguated


@dataclass
class DisambiguationResult:
    clusters: list[Cluster]
    mention_to_cluster: dict[int, int]
    accounting: Accounting
    id_table: dict[str, int]
    reverse: dict[int, str]
    frequencies: FrequencyTable
    graph: SimilarityGraph
    noise_ids: tuple[int, ...] = ()


def cluster_graph(
    graph: SimilarityGraph,
    freq: FrequencyTable,
    reverse: Mapping[int, str],
    eps: float = 0.03,
    min_pts: int = 2,
) -> tuple[list[Cluster], tuple[int, ...]]:
    """Run DBSCAN on every connected component and name the clusters."""
    raw_clusters: list[tuple[int, ...]] = []
    noise: list[int] = []
    for component in connected_components(graph):
        distances = to_distance(graph.submatrix(component.members))
        found, component_noise = dbscan(distances, component.members, eps, min_pts)
        raw_clusters.extend(found)
        noise.extend(component_noise)
    return name_clusters(raw_clusters, freq, reverse), tuple(sorted(noise))


def disambiguate(
    records: Iterable[MentionRecord],
    registries: Sequence[RegistryIndex] = (),
    kb: KbSynonymDict | None = None,
    stoplist: Iterable[str] = DEFAULT_STOPLIST,
    record_threshold: float = 0.9,
    use_threshold: float = 0.97,
    eps: float = 0.03,
    min_pts: int = 2,
    workers: int = 1,
) -> DisambiguationResult:
    """Full in-memory chain from raw records to named clusters."""
    records = list(records)
    id_table, reverse = assign_ids(r.software for r in records)
    freq = compute_frequencies(records, id_table)
    pairs = generate_synonym_pairs(
        id_table,
        registries=registries,
        kb=kb,
        record_threshold=record_threshold,
        workers=workers,
    )
    return disambiguate_pairs(
        pairs,
        id_table=id_table,
        reverse=reverse,
        freq=freq,
        stoplist=stoplist,
        use_threshold=use_threshold,
        eps=eps,
        min_pts=min_pts,
    )


def disambiguate_pairs(
    pairs: Iterable[SynonymPair],
    id_table: dict[str, int],
    reverse: dict[int, str],
    freq: FrequencyTable,
    stoplist: Iterable[str] = DEFAULT_STOPLIST,
    use_threshold: float = 0.97,
    eps: float = 0.03,
    min_pts: int = 2,
) -> DisambiguationResult:
    """Cluster pre-generated synonym pairs (the per-stage entry point)."""
    mentions = [reverse[i] for i in range(len(reverse))]
    graph = post_process(
        build_matrix(pairs, mentions, use_threshold=use_threshold, stoplist=stoplist)
    )
    clusters, noise = cluster_graph(graph, freq, reverse, eps=eps, min_pts=min_pts)
    mention_to_cluster = {
        member: idx for idx, cluster in enumerate(clusters) for member in cluster.members
    }
    covered = graph.covered_vertices()
    accounting = Accounting(
        no_significant_synonyms=len(mentions) - len(covered),
        no_cluster_output=len(noise),
        disambiguated=len(mention_to_cluster),
    )
    return DisambiguationResult(
        clusters=clusters,
        mention_to_cluster=mention_to_cluster,
        accounting=accounting,
        id_table=id_table,
        reverse=reverse,
        frequencies=freq,
        graph=graph,
        noise_ids=noise,
    )


def write_disambiguated_tsv(
    path,
    records: Sequence[MentionRecord],
    corpus_kind: str,
    result: DisambiguationResult,
) -> None:
    """Raw corpus rows plus mapped_to_software / mapped_to_software_ID."""
    fields = CORPUS_FIELDS.get(corpus_kind)
    if fields is None:
        raise FormatError(f"unknown corpus kind: {corpus_kind!r}")
    base = serialize_mentions(records, corpus_kind).splitlines()
    header = base[0].split("\t") + ["mapped_to_software", "mapped_to_software_ID"]
    rows = []
    for record, line in zip(records, base[1:]):
        mention_id = result.id_table[record.software]
        cluster_idx = result.mention_to_cluster.get(mention_id)
        if cluster_idx is None:
            extra = ["", ""]
        else:
            cluster = result.clusters[cluster_idx]
            extra = [cluster.name, str(cluster.name_id)]
        rows.append(line.split("\t") + extra)
    write_text(path, format_tsv(header, rows))
