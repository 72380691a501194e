import random

import pytest

from softmentions.clustering import (
    dbscan,
    disambiguate,
    name_clusters,
    to_distance,
    write_disambiguated_tsv,
)
from softmentions.graph import connected_components
from softmentions.ingest import FrequencyTable, assign_ids
from softmentions.synonyms import Registry, RegistryIndex

from conftest import make_record
from oracles import dbscan_reference

def test_to_distance_values():
    sub = {(0, 1): 1.0, (0, 2): 0.99, (1, 2): 0.97}
    dist = to_distance(sub)
    assert dist[(0, 1)] == 0.0
    assert dist[(0, 2)] == 0.01
    assert dist[(1, 2)] == 0.03  # exact despite binary float subtraction


def test_dbscan_clique_is_one_cluster():
    dist = {(0, 1): 0.01, (0, 2): 0.01, (1, 2): 0.01}
    clusters, noise = dbscan(dist, [0, 1, 2], eps=0.03, min_pts=2)
    assert clusters == [(0, 1, 2)]
    assert noise == ()


def test_dbscan_isolated_point_is_noise():
    clusters, noise = dbscan({(0, 1): 0.01}, [0, 1, 2], eps=0.03, min_pts=2)
    assert clusters == [(0, 1)]
    assert noise == (2,)


def test_dbscan_min_pts_one_makes_singleton_clusters():
    clusters, noise = dbscan({}, [4, 7], eps=0.03, min_pts=1)
    assert clusters == [(4,), (7,)]
    assert noise == ()


def test_dbscan_borders_join_first_discovered_cluster():
    # two star cores (0 and 10) share border 2; the cluster seeded at the
    # smaller core id claims it
    dist = {
        (0, 1): 0.01, (0, 2): 0.01, (0, 3): 0.01,
        (2, 10): 0.01, (10, 11): 0.01, (10, 12): 0.01,
    }
    points = [0, 1, 2, 3, 10, 11, 12]
    clusters, noise = dbscan(dist, points, eps=0.03, min_pts=4)
    assert clusters == [(0, 1, 2, 3), (10, 11, 12)]
    assert noise == ()


def test_dbscan_parameter_validation():
    with pytest.raises(ValueError):
        dbscan({}, [0], eps=0.0, min_pts=2)
    with pytest.raises(ValueError):
        dbscan({}, [0], eps=0.01, min_pts=0)


def _random_instance(rng, max_points=60):
    n = rng.randint(1, max_points)
    points = list(range(n))
    dist = {}
    for _ in range(rng.randint(0, 3 * n)):
        i, j = rng.sample(points, 2) if n > 1 else (0, 0)
        if i == j:
            continue
        key = (min(i, j), max(i, j))
        dist[key] = rng.choice([0.0, 0.01, 0.02, 0.03, 0.05, 0.1])
    return dist, points


def test_dbscan_matches_density_reachability_oracle():
    rng = random.Random(11)
    for trial in range(60):
        dist, points = _random_instance(rng)
        eps = rng.choice([0.01, 0.02, 0.03])
        min_pts = rng.choice([1, 2, 3])
        clusters, noise = dbscan(dist, points, eps, min_pts)
        ref_clusters, ref_noise = dbscan_reference(dist, points, eps, min_pts)
        assert [frozenset(c) for c in clusters] == ref_clusters
        assert frozenset(noise) == ref_noise


def test_dbscan_core_partition_invariant_under_relabeling():
    rng = random.Random(13)
    for _ in range(25):
        dist, points = _random_instance(rng, max_points=30)
        eps, min_pts = rng.choice([0.01, 0.03]), rng.choice([2, 3])
        cores = {
            p
            for p in points
            if 1 + sum(
                1
                for q in points
                if q != p and dist.get((min(p, q), max(p, q)), 1.0) <= eps
            )
            >= min_pts
        }
        clusters, _ = dbscan(dist, points, eps, min_pts)
        base_cores = {frozenset(set(c) & cores) for c in clusters}
        mapping = dict(zip(points, rng.sample(points, len(points))))
        relabeled = {
            (min(mapping[i], mapping[j]), max(mapping[i], mapping[j])): d
            for (i, j), d in dist.items()
        }
        clusters2, _ = dbscan(relabeled, points, eps, min_pts)
        inverse = {v: k for k, v in mapping.items()}
        back_cores = {
            frozenset({inverse[m] for m in c} & cores) for c in clusters2
        }
        assert base_cores == back_cores


def test_name_clusters_highest_frequency_wins():
    id_table, reverse = assign_ids(["ImageJ", "Image J", "Image-J"])
    freq = FrequencyTable(counts={
        id_table["ImageJ"]: 5000, id_table["Image J"]: 1200, id_table["Image-J"]: 40,
    })
    named = name_clusters([tuple(id_table.values())], freq, reverse)
    assert named[0].name == "ImageJ"
    assert named[0].name_id == id_table["ImageJ"]


def test_name_clusters_singleton_and_ties():
    id_table, reverse = assign_ids(["abc", "abd", "only"])
    freq = FrequencyTable(counts={i: 3 for i in reverse})
    named = name_clusters([(id_table["only"],)], freq, reverse)
    assert named[0].name == "only"
    named = name_clusters([(id_table["abd"], id_table["abc"])], freq, reverse)
    assert named[0].name == "abc"  # equal frequency, lexicographic tie-break


def test_name_clusters_monotone_frequency_invariance():
    rng = random.Random(3)
    mentions = [f"m{i}" for i in range(12)]
    id_table, reverse = assign_ids(mentions)
    counts = {i: rng.randint(0, 50) for i in reverse}
    clusters = [tuple(rng.sample(list(reverse), rng.randint(1, 6))) for _ in range(5)]
    base = name_clusters(clusters, FrequencyTable(counts=counts), reverse)
    scaled = name_clusters(
        clusters, FrequencyTable(counts={i: 3 * c + 1 for i, c in counts.items()}), reverse
    )
    assert [c.name_id for c in base] == [c.name_id for c in scaled]


def test_missing_frequency_defaults_to_zero():
    id_table, reverse = assign_ids(["a", "b"])
    named = name_clusters([(0, 1)], FrequencyTable(counts={1: 5}), reverse)
    assert named[0].name == "b"


def test_disambiguate_mutually_dissimilar_strings():
    records = [make_record(s, pmcid=str(i)) for i, s in enumerate(
        ["alpha", "Bowtie", "Cytoscape", "delta9", "epsilon"]
    )]
    result = disambiguate(records)
    assert result.clusters == []
    assert result.accounting.no_significant_synonyms == 5
    assert result.accounting.no_cluster_output == 0
    assert result.accounting.disambiguated == 0
    assert result.accounting.total == 5


def test_disambiguate_accounting_identity_random_corpora():
    rng = random.Random(5)
    vocab = ["ImageJ", "Image J", "ImageJ2", "BLAST", "Blast", "tool alpha",
             "tool  alpha", "SPSS", "spss", "R package limma", "limma",
             "interface", "python interface", "unrelated-one", "unrelated two"]
    for _ in range(25):
        strings = rng.sample(vocab, rng.randint(2, len(vocab)))
        records = [make_record(s, pmcid=str(i % 4)) for i, s in enumerate(strings)]
        kb = {"BLAST": ["Blast"], "SPSS": ["spss"]}
        result = disambiguate(
            records,
            registries=[RegistryIndex(Registry.BIOC, {"limma"}),
                        RegistryIndex(Registry.PY, {"interface"})],
            kb=kb,
            min_pts=rng.choice([1, 2, 3]),
            eps=rng.choice([0.01, 0.03]),
        )
        acc = result.accounting
        assert acc.total == len(result.id_table)
        assert acc.no_significant_synonyms >= 0
        seen = set()
        for cluster in result.clusters:
            assert not (set(cluster.members) & seen)
            seen |= set(cluster.members)
            assert cluster.name_id in cluster.members
            assert cluster.name == result.reverse[cluster.name_id]
        assert len(seen) == acc.disambiguated


def test_clusters_never_span_components():
    records = [make_record(s, pmcid=str(i)) for i, s in enumerate(
        ["ImageJ", "Image J", "GraphPad Prism4", "GraphPad Prism5"]
    )]
    result = disambiguate(records)
    comps = connected_components(result.graph)
    comp_of = {}
    for idx, comp in enumerate(comps):
        for member in comp.members:
            comp_of[member] = idx
    for cluster in result.clusters:
        assert len({comp_of[m] for m in cluster.members}) == 1


def test_limma_variants_form_single_cluster(variant_lists):
    variants = variant_lists["limma"]
    records = [make_record("limma", pmcid=str(i)) for i in range(40)]
    for idx, variant in enumerate(variants):
        records.append(make_record(variant, pmcid=f"v{idx}"))
    result = disambiguate(
        records, registries=[RegistryIndex(Registry.BIOC, {"limma"})]
    )
    assert len(result.clusters) == 1
    cluster = result.clusters[0]
    assert cluster.name == "limma"
    assert len(cluster.members) == len(variants) + 1


def test_write_disambiguated_tsv(tmp_path):
    records = [make_record("limma", pmcid="1"), make_record("limma", pmcid="4"),
               make_record("R package limma", pmcid="2"), make_record("Bowtie", pmcid="3")]
    result = disambiguate(
        records, registries=[RegistryIndex(Registry.BIOC, {"limma"})]
    )
    out = tmp_path / "disambiguated.tsv"
    write_disambiguated_tsv(out, records, "comm", result)
    lines = out.read_text(encoding="utf-8").splitlines()
    header = lines[0].split("\t")
    assert header[-2:] == ["mapped_to_software", "mapped_to_software_ID"]
    rows = {line.split("\t")[9]: line.split("\t")[-2:] for line in lines[1:]}
    limma_id = str(result.id_table["limma"])
    assert rows["limma"] == ["limma", limma_id]
    assert rows["R package limma"] == ["limma", limma_id]
    assert rows["Bowtie"] == ["", ""]
