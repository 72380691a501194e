"""Command-line pipeline driver.

Subcommands mirror the stage boundaries: ingest, synonyms, cluster, link,
evaluate, run-all. Every stage writes its artifacts plus a manifest with
input digests, the effective configuration and row counts, so identical
inputs and configuration reproduce identical outputs byte for byte.

Exit codes: 0 success, 1 configuration problem, 2 data problem or missing
artifact, 3 external service failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import clustering, evaluation, graph, ingest, linking, synonyms
from .config import PipelineConfig, apply_settings, load_config
from .errors import (
    ExternalServiceError,
    SoftMentionsError,
    ValidationError,
)
from .fileio import open_text, read_lines, write_text, write_tsv, iter_tsv_rows

logger = logging.getLogger(__name__)

MENTION2ID = "mention2id.tsv"
FREQUENCIES = "frequencies.tsv"
SYNONYMS = "synonyms.tsv"
DISAMBIGUATED = "disambiguated.tsv"
CLUSTERS = "clusters.tsv"
MATRIX = "matrix.tsv"
METADATA = "metadata.tsv"
LINK_REPORT = "link_report.tsv"
METRICS_JSON = "metrics.json"
METRICS_TXT = "metrics.txt"


def _require(path: str | Path, what: str) -> Path:
    if not path:
        raise SoftMentionsError(f"missing input: {what} is not configured")
    path = Path(path)
    if not path.exists():
        raise SoftMentionsError(f"missing input: {what} not found at {path}")
    return path


def _digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(cfg: PipelineConfig, stage: str, inputs: list[Path], counts: dict) -> None:
    manifest = {
        "stage": stage,
        "inputs": {str(p): _digest(p) for p in sorted(inputs)},
        "config": cfg.snapshot(),
        "row_counts": counts,
    }
    out = Path(cfg.out_dir) / f"manifest_{stage}.json"
    write_text(out, json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _read_corpus(cfg: PipelineConfig) -> list[ingest.MentionRecord]:
    corpus = _require(cfg.corpus, "corpus TSV (paths.corpus)")
    errors: list = []
    with open_text(corpus) as fh:
        records = list(
            ingest.parse_mentions(
                fh, cfg.corpus_kind, lenient=not cfg.strict, errors=errors
            )
        )
    for err in errors:
        logger.warning("skipped row: %s", err)
    return records


def stage_ingest(cfg: PipelineConfig) -> dict:
    corpus = _require(cfg.corpus, "corpus TSV (paths.corpus)")
    records = _read_corpus(cfg)
    id_table, reverse = ingest.assign_ids(r.software for r in records)
    freq = ingest.compute_frequencies(records, id_table)
    out = Path(cfg.out_dir)
    ingest.write_id_table(out / MENTION2ID, id_table)
    ingest.write_frequencies(out / FREQUENCIES, freq, reverse)
    counts = {
        "rows": len(records),
        "unique_mentions": len(id_table),
        "rows_missing_paper_key": freq.missing_paper_key_rows,
    }
    write_manifest(cfg, "ingest", [corpus], counts)
    logger.info("ingest: %(rows)d rows, %(unique_mentions)d unique mentions", counts)
    return counts


def _load_registries(cfg: PipelineConfig) -> list[synonyms.RegistryIndex]:
    configured = (
        (synonyms.Registry.PY, cfg.registry_py),
        (synonyms.Registry.R, cfg.registry_r),
        (synonyms.Registry.BIOC, cfg.registry_bioc),
    )
    out = []
    for registry, path in configured:
        if path:
            names = set(read_lines(_require(path, f"{registry.value} name list")))
            out.append(synonyms.RegistryIndex(registry=registry, entries=names))
    return out


def stage_synonyms(cfg: PipelineConfig) -> dict:
    out = Path(cfg.out_dir)
    id_path = _require(out / MENTION2ID, "mention2id.tsv (run ingest first)")
    id_table, reverse = ingest.read_id_table(id_path)
    registries = _load_registries(cfg)
    kb = synonyms.read_kb_dict(_require(cfg.kb_dict, "KB dictionary")) if cfg.kb_dict else None
    skip_report: list[str] = []
    unmatched: list[tuple[str, str]] = []
    pairs = synonyms.generate_synonym_pairs(
        id_table,
        registries=registries,
        kb=kb,
        record_threshold=cfg.record_threshold,
        workers=cfg.workers,
        skip_report=skip_report,
        unmatched=unmatched,
    )
    synonyms.write_synonyms_tsv(out / SYNONYMS, pairs, reverse)
    by_source: dict[str, int] = {}
    for pair in pairs:
        by_source[pair.source.value] = by_source.get(pair.source.value, 0) + 1
    counts = {
        "pairs": len(pairs),
        "by_source": by_source,
        "skipped_registry_entries": len(skip_report),
        "unmatched_kb_entries": len(unmatched),
    }
    inputs = [id_path] + [
        Path(p) for p in (cfg.registry_py, cfg.registry_r, cfg.registry_bioc, cfg.kb_dict) if p
    ]
    write_manifest(cfg, "synonyms", inputs, counts)
    logger.info("synonyms: %d pairs", len(pairs))
    return counts


def stage_cluster(cfg: PipelineConfig) -> dict:
    out = Path(cfg.out_dir)
    id_path = _require(out / MENTION2ID, "mention2id.tsv (run ingest first)")
    freq_path = _require(out / FREQUENCIES, "frequencies.tsv (run ingest first)")
    pairs_path = _require(out / SYNONYMS, "synonyms.tsv (run synonyms first)")
    id_table, reverse = ingest.read_id_table(id_path)
    freq = ingest.read_frequencies(freq_path, id_table)
    pairs = synonyms.read_synonyms_tsv(pairs_path)
    stoplist = (
        graph.read_stoplist(_require(cfg.stoplist, "stoplist"))
        if cfg.stoplist
        else frozenset(graph.DEFAULT_STOPLIST)
    )
    result = clustering.disambiguate_pairs(
        pairs,
        id_table=id_table,
        reverse=reverse,
        freq=freq,
        stoplist=stoplist,
        use_threshold=cfg.use_threshold,
        eps=cfg.eps,
        min_pts=cfg.min_pts,
    )
    records = _read_corpus(cfg)
    clustering.write_disambiguated_tsv(out / DISAMBIGUATED, records, cfg.corpus_kind, result)
    cluster_rows = [
        (str(idx), str(c.name_id), c.name, str(member), reverse[member])
        for idx, c in enumerate(result.clusters)
        for member in c.members
    ]
    write_tsv(out / CLUSTERS, ("cluster", "name_id", "name", "member_id", "member"), cluster_rows)
    if cfg.write_matrix:
        graph.write_matrix_tsv(out / MATRIX, result.graph)
    acc = result.accounting
    counts = {
        "unique_mentions": acc.total,
        "no_significant_synonyms": acc.no_significant_synonyms,
        "no_cluster_output": acc.no_cluster_output,
        "disambiguated": acc.disambiguated,
        "clusters": len(result.clusters),
    }
    inputs = [id_path, freq_path, pairs_path, Path(cfg.corpus)]
    if cfg.stoplist:
        inputs.append(Path(cfg.stoplist))
    write_manifest(cfg, "cluster", inputs, counts)
    logger.info(
        "cluster: %(disambiguated)d mentions in %(clusters)d entities, "
        "%(no_significant_synonyms)d without synonyms, %(no_cluster_output)d noise",
        counts,
    )
    return counts


def _read_clusters(path, reverse) -> list[clustering.Cluster]:
    grouped: dict[int, tuple[int, list[int]]] = {}
    with open_text(path) as fh:
        rows = iter_tsv_rows(fh)
        next(rows)
        for _, fields in rows:
            if fields == [""]:
                continue
            idx, name_id, _, member_id = int(fields[0]), int(fields[1]), fields[2], int(fields[3])
            grouped.setdefault(idx, (name_id, []))[1].append(member_id)
    return [
        clustering.Cluster(
            members=tuple(sorted(members)), name_id=name_id, name=reverse[name_id]
        )
        for _, (name_id, members) in sorted(grouped.items())
    ]


def build_link_sources(cfg: PipelineConfig) -> linking.LinkSources:
    sources = linking.LinkSources(
        precedence=tuple(linking.LinkSource(name) for name in cfg.precedence)
    )
    registry_paths = (
        (linking.LinkSource.PKG_INDEX_PY, cfg.registry_py),
        (linking.LinkSource.PKG_INDEX_R, cfg.registry_r),
        (linking.LinkSource.PKG_INDEX_BIOC, cfg.registry_bioc),
    )
    for source, path in registry_paths:
        if path:
            details = {}
            if cfg.registry_details:
                details_path = Path(cfg.registry_details) / f"{source.value}.json"
                if details_path.exists():
                    details = json.loads(details_path.read_text(encoding="utf-8"))
            sources.registries[source] = linking.RegistrySnapshot(
                source=source,
                names=set(read_lines(_require(path, f"{source.value} name list"))),
                details=details,
            )
    if cfg.kb_snapshots:
        fetcher = None
        if not cfg.offline and cfg.kb_api_url:
            fetcher = linking.knowledge_base_fetcher(cfg.kb_api_url, token=cfg.kb_token())
        sources.apis[linking.LinkSource.KNOWLEDGE_BASE] = linking.ApiSnapshot(
            source=linking.LinkSource.KNOWLEDGE_BASE,
            directory=Path(cfg.kb_snapshots),
            fetcher=fetcher,
            limiter=linking.RateLimiter(1.0) if fetcher else None,
        )
    if cfg.codehost_snapshots:
        fetcher = None
        if not cfg.offline:
            fetcher = linking.code_host_fetcher(token=cfg.codehost_token())
        sources.apis[linking.LinkSource.CODE_HOST] = linking.ApiSnapshot(
            source=linking.LinkSource.CODE_HOST,
            directory=Path(cfg.codehost_snapshots),
            fetcher=fetcher,
            limiter=linking.RateLimiter(2.0) if fetcher else None,
        )
    return sources


def stage_link(cfg: PipelineConfig) -> dict:
    out = Path(cfg.out_dir)
    id_path = _require(out / MENTION2ID, "mention2id.tsv (run ingest first)")
    clusters_path = _require(out / CLUSTERS, "clusters.tsv (run cluster first)")
    id_table, reverse = ingest.read_id_table(id_path)
    clusters = _read_clusters(clusters_path, reverse)
    sources = build_link_sources(cfg)
    soft_errors: list[str] = []
    collected: dict[linking.LinkSource, list[dict]] = {}
    links = linking.link_mentions(
        reverse.values(),
        id_table,
        sources,
        soft_errors=soft_errors,
        collect_raw=collected,
    )
    result = clustering.DisambiguationResult(
        clusters=clusters,
        mention_to_cluster={
            member: idx for idx, c in enumerate(clusters) for member in c.members
        },
        accounting=clustering.Accounting(0, 0, 0),
        id_table=id_table,
        reverse=reverse,
        frequencies=ingest.FrequencyTable(),
        graph=graph.SimilarityGraph(
            mentions=[reverse[i] for i in range(len(reverse))], entries={}
        ),
    )
    propagated = linking.propagate_links(result, links)
    linking.write_metadata_tsv(out / METADATA, propagated)
    linking.write_normalized_csvs(out / "normalized", propagated)
    linking.write_raw_csvs(out / "raw", collected)
    report = linking.link_report(propagated)
    linking.write_link_report_tsv(out / LINK_REPORT, report)
    counts = {
        "linked_mentions": len(propagated),
        "directly_linked_names": len(links),
        "by_source": {source: count for source, count, _ in report},
        "soft_errors": len(soft_errors),
    }
    inputs = [id_path, clusters_path] + [
        Path(p)
        for p in (cfg.registry_py, cfg.registry_r, cfg.registry_bioc)
        if p
    ]
    write_manifest(cfg, "link", inputs, counts)
    logger.info("link: %d mentions linked", len(propagated))
    return counts


def _read_predicted_pairs(path) -> list[tuple[str, str]]:
    pairs = []
    with open_text(path) as fh:
        rows = iter_tsv_rows(fh)
        _, header = next(rows)
        if header[:2] not in (["mention", "synonym"], ["software_mention", "synonym"]):
            raise SoftMentionsError(f"bad predicted pairs header: {header}")
        for _, fields in rows:
            if fields == [""]:
                continue
            pairs.append((fields[0], fields[1]))
    return pairs


def stage_evaluate(cfg: PipelineConfig) -> dict:
    metrics: dict = {}
    inputs: list[Path] = []
    if cfg.eval_synonyms:
        labeled = evaluation.read_synonym_labels(_require(cfg.eval_synonyms, "synonym labels"))
        inputs.append(Path(cfg.eval_synonyms))
        predicted: list[tuple[str, str]]
        if cfg.eval_predicted_pairs:
            predicted = _read_predicted_pairs(
                _require(cfg.eval_predicted_pairs, "predicted pairs")
            )
            inputs.append(Path(cfg.eval_predicted_pairs))
        else:
            predicted = [(row.mention, row.synonym) for row in labeled]
            logger.warning("no predicted pairs configured; evaluating the labeled set itself")
        prf = evaluation.synonym_prf(predicted, labeled)
        metrics["synonyms"] = {
            "precision": prf.precision,
            "recall": prf.recall,
            "f1": prf.f1,
            "tp": prf.tp,
            "fp": prf.fp,
            "fn": prf.fn,
        }
    if cfg.eval_curation_multi:
        rows = evaluation.read_curation_rows(_require(cfg.eval_curation_multi, "curation (multi)"))
        inputs.append(Path(cfg.eval_curation_multi))
        k = min(1000, len(rows))
        metrics["precision_at_1k"] = evaluation.precision_at_k(rows, k)
    if cfg.eval_curation_binary:
        rows = evaluation.read_curation_rows(
            _require(cfg.eval_curation_binary, "curation (binary)")
        )
        inputs.append(Path(cfg.eval_curation_binary))
        k = min(10000, len(rows))
        metrics["precision_at_10k"] = evaluation.precision_at_k(rows, k)
    if cfg.eval_linking:
        rows = evaluation.read_link_eval(_require(cfg.eval_linking, "link evaluation"))
        inputs.append(Path(cfg.eval_linking))
        summary = evaluation.link_eval_summary(rows)
        metrics["linking"] = {
            "overall": {k: {"count": c, "percent": p} for k, (c, p) in summary.overall.items()},
            "excluding_code_host": {
                k: {"count": c, "percent": p}
                for k, (c, p) in summary.excluding_code_host.items()
            },
        }
    for key, path in (("two_categories", cfg.eval_ratings_two), ("five_categories", cfg.eval_ratings_five)):
        if not path:
            continue
        grid = evaluation.read_ratings_csv(_require(path, f"ratings ({key})"))
        inputs.append(Path(path))
        iaa: dict = {"krippendorff_alpha": evaluation.krippendorff_alpha(grid)}
        if all(all(v is not None for v in row) for row in grid):
            categories = sorted({v for row in grid for v in row})
            matrix = evaluation.ratings_to_matrix(grid, categories)
            iaa["fleiss_kappa"] = evaluation.fleiss_kappa(matrix)
        metrics.setdefault("agreement", {})[key] = iaa
    if not metrics:
        raise SoftMentionsError("missing input: no evaluation files configured (eval.*)")
    out = Path(cfg.out_dir)
    write_text(out / METRICS_JSON, json.dumps(metrics, sort_keys=True, indent=2) + "\n")
    lines = []
    def flatten(prefix: str, value) -> None:
        if isinstance(value, dict):
            for key in sorted(value):
                flatten(f"{prefix}.{key}" if prefix else key, value[key])
        else:
            lines.append(f"{prefix} = {value}")
    flatten("", metrics)
    write_text(out / METRICS_TXT, "\n".join(lines) + "\n")
    write_manifest(cfg, "evaluate", inputs, {"metrics": len(lines)})
    logger.info("evaluate: wrote %d metric values", len(lines))
    return metrics


def run_all(cfg: PipelineConfig) -> dict:
    counts = {"ingest": stage_ingest(cfg)}
    counts["synonyms"] = stage_synonyms(cfg)
    counts["cluster"] = stage_cluster(cfg)
    if cfg.registry_py or cfg.registry_r or cfg.registry_bioc or cfg.kb_snapshots or cfg.codehost_snapshots:
        counts["link"] = stage_link(cfg)
    if any(
        (cfg.eval_synonyms, cfg.eval_curation_multi, cfg.eval_curation_binary,
         cfg.eval_linking, cfg.eval_ratings_two, cfg.eval_ratings_five)
    ):
        counts["evaluate"] = stage_evaluate(cfg)
    return counts


COMMANDS = {
    "ingest": stage_ingest,
    "synonyms": stage_synonyms,
    "cluster": stage_cluster,
    "link": stage_link,
    "evaluate": stage_evaluate,
    "run-all": run_all,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softmentions",
        description="Disambiguate software mentions and link them to registries.",
    )
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=f"run the {name} stage")
        cmd.add_argument("--config", help="key = value configuration file")
        cmd.add_argument("--out", help="output directory (overrides paths.out_dir)")
        cmd.add_argument("--offline", dest="offline", action="store_true", default=None,
                         help="snapshot-only lookups (default)")
        cmd.add_argument("--online", dest="offline", action="store_false",
                         help="allow live API lookups")
        cmd.add_argument("--workers", type=int, help="parallel worker count")
        cmd.add_argument("--strict", dest="strict", action="store_true", default=None,
                         help="fail on malformed rows (default)")
        cmd.add_argument("--lenient", dest="strict", action="store_false",
                         help="skip malformed rows with a warning")
        cmd.add_argument("--set", dest="settings", action="append", default=[],
                         metavar="KEY=VALUE", help="override any configuration key")
    return parser


def configure(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {}
    for item in args.settings:
        if "=" not in item:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    if overrides:
        cfg = apply_settings(cfg, overrides)
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    if args.offline is not None:
        cfg = replace(cfg, offline=args.offline)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    if args.strict is not None:
        cfg = replace(cfg, strict=args.strict)
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = configure(args)
        COMMANDS[args.command](cfg)
    except ValidationError as err:
        logger.error("configuration error: %s", err)
        return 1
    except ExternalServiceError as err:
        logger.error("external service error: %s", err)
        return 3
    except (SoftMentionsError, OSError) as err:
        logger.error("%s", err)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
