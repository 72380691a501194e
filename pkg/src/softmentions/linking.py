"""Exact-match linking of mentions to registry and database records.

Lookups run offline-first against recorded snapshots: newline-delimited
name lists for the three package indices, and one JSON document per name
for the two API-backed sources. Live HTTP fetching is opt-in and writes
through to the same snapshot layout, so a live run leaves a reproducible
offline snapshot behind.

Raw per-source records are normalized to a common schema. The default
crosswalk below maps each source's raw field names onto the normalized
fields; fields mapped to None are deliberately dropped, unknown fields are
dropped with a warning.
"""
from __future__ import annotations

import json
import logging
import time
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .clustering import DisambiguationResult
from .errors import ExternalServiceError
from .fileio import write_tsv

logger = logging.getLogger(__name__)


class LinkSource(str, Enum):
    PKG_INDEX_PY = "PkgIndexPy"
    PKG_INDEX_R = "PkgIndexR"
    PKG_INDEX_BIOC = "PkgIndexBioc"
    KNOWLEDGE_BASE = "KnowledgeBaseAPI"
    CODE_HOST = "CodeHostAPI"


# Non-code-host links proved far more reliable in manual review, so the
# curated indices win when several sources match one name.
DEFAULT_PRECEDENCE = (
    LinkSource.PKG_INDEX_BIOC,
    LinkSource.PKG_INDEX_R,
    LinkSource.PKG_INDEX_PY,
    LinkSource.KNOWLEDGE_BASE,
    LinkSource.CODE_HOST,
)

INDEX_URL_TEMPLATES = {
    LinkSource.PKG_INDEX_PY: "https://pypi.org/project/{name}",
    LinkSource.PKG_INDEX_R: "https://cran.r-project.org/package={name}",
    LinkSource.PKG_INDEX_BIOC: "https://www.bioconductor.org/packages/{name}",
}

INDEX_RAW_FIELDS = {
    LinkSource.PKG_INDEX_PY: ("pypi package", "pypi_url"),
    LinkSource.PKG_INDEX_R: ("CRAN Package", "CRAN Link"),
    LinkSource.PKG_INDEX_BIOC: ("Bioconductor Package", "Bioconductor Link"),
}


@dataclass
class LinkedMetadata:
    """One mention's normalized registry record."""

    id: int = -1
    software_mention: str = ""
    mapped_to: list[str] = field(default_factory=list)
    source: str = ""
    platform: list[str] = field(default_factory=list)
    package_url: str = ""
    description: list[str] = field(default_factory=list)
    homepage_url: list[str] = field(default_factory=list)
    other_urls: list[str] = field(default_factory=list)
    license: list[str] = field(default_factory=list)
    github_repo: list[str] = field(default_factory=list)
    github_repo_licenses: list[str] = field(default_factory=list)
    exact_match: bool = True
    rrid: str | None = None
    reference: list[str] = field(default_factory=list)
    scicrunch_synonyms: list[str] = field(default_factory=list)


_LIST_FIELDS = {
    "mapped_to",
    "platform",
    "description",
    "homepage_url",
    "other_urls",
    "license",
    "github_repo",
    "github_repo_licenses",
    "reference",
    "scicrunch_synonyms",
}
_SCALAR_FIELDS = {"package_url", "rrid", "software_mention"}


@dataclass
class SchemaMapping:
    """Per-source crosswalk: raw field name -> normalized field names.

    A raw field may feed several normalized fields (the code-host URL
    populates package_url, homepage_url and github_repo). None marks a
    known raw field that is dropped on purpose.
    """

    per_source: dict[LinkSource, dict[str, tuple[str, ...] | None]]

    def for_source(self, source: LinkSource) -> dict[str, tuple[str, ...] | None]:
        if source not in self.per_source:
            raise KeyError(f"schema mapping does not cover source {source.value}")
        return self.per_source[source]


DEFAULT_SCHEMA_MAPPING = SchemaMapping(
    per_source={
        LinkSource.PKG_INDEX_PY: {
            "pypi package": ("mapped_to",),
            "pypi_url": ("package_url",),
            "description": ("description",),
            "homepage_url": ("homepage_url",),
            "github_repo": ("github_repo",),
            "license": ("license",),
        },
        LinkSource.PKG_INDEX_R: {
            "CRAN Package": ("mapped_to",),
            "CRAN Link": ("package_url",),
            "Title": ("description",),
            "homepage_url": ("homepage_url",),
            "github_repo": ("github_repo",),
            "reference": ("reference",),
            "license": ("license",),
        },
        LinkSource.PKG_INDEX_BIOC: {
            "Bioconductor Package": ("mapped_to",),
            "Bioconductor Link": ("package_url",),
            "Title": ("description",),
            "Maintainer": None,
            "homepage_url": ("homepage_url",),
            "github_repo": ("github_repo",),
            "reference": ("reference",),
            "license": ("license",),
        },
        LinkSource.KNOWLEDGE_BASE: {
            "software_name": ("software_mention",),
            "Resource Name": ("mapped_to",),
            "Resource Name Link": ("homepage_url",),
            "Resource ID": ("rrid",),
            "Resource ID Link": ("package_url",),
            "Description": ("description",),
            "Alternate URLs": ("other_urls",),
            "Old URLs": ("other_urls",),
            "Reference Link": ("reference",),
            "Proper Citation": ("reference",),
            "scicrunch_synonyms": ("scicrunch_synonyms",),
            "synonyms": ("scicrunch_synonyms",),
            "github_repo": ("github_repo",),
            "license": ("license",),
            "Keywords": None,
            "Parent Organization": None,
            "Parent Organization Link": None,
            "Related Condition": None,
            "Funding Agency": None,
            "Relation": None,
            "Reference": None,
            "Website Status": None,
            "Alternate IDs": None,
        },
        LinkSource.CODE_HOST: {
            "software_mention": ("software_mention",),
            "best_github_match": ("mapped_to",),
            "description": ("description",),
            "github_url": ("package_url", "homepage_url", "github_repo"),
            "license": ("github_repo_licenses",),
            "exact_match": ("exact_match",),
        },
    }
)


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("true", "1", "yes")


def _append_values(bucket: list[str], value) -> None:
    items = value if isinstance(value, (list, tuple)) else [value]
    for item in items:
        text = str(item).strip()
        if text and text not in bucket:
            bucket.append(text)


def normalize_metadata(
    raw: Mapping[str, object],
    source: LinkSource,
    mapping: SchemaMapping = DEFAULT_SCHEMA_MAPPING,
    mention_id: int = -1,
    software_mention: str = "",
    dropped: list[str] | None = None,
) -> LinkedMetadata:
    """Rename and merge a raw source record into the normalized schema.

    Raw fields without a mapping rule are dropped with a warning. Empty raw
    values never populate normalized fields.
    """
    rules = mapping.for_source(source)
    meta = LinkedMetadata(
        id=mention_id,
        software_mention=software_mention,
        source=source.value,
        platform=[source.value],
    )
    for raw_field in sorted(raw):
        value = raw[raw_field]
        if value is None or (isinstance(value, str) and not value.strip()):
            continue
        if raw_field not in rules:
            logger.warning("%s: unmapped raw field %r dropped", source.value, raw_field)
            if dropped is not None:
                dropped.append(raw_field)
            continue
        targets = rules[raw_field]
        if targets is None:
            continue
        for target in targets:
            if target == "exact_match":
                meta.exact_match = _as_bool(value)
            elif target in _LIST_FIELDS:
                _append_values(getattr(meta, target), value)
            elif target in _SCALAR_FIELDS:
                current = getattr(meta, target)
                if not current:
                    setattr(meta, target, str(value).strip())
            else:
                raise KeyError(f"unknown normalized field {target!r}")
    return meta


class RateLimiter:
    def __init__(self, min_interval: float):
        self.min_interval = min_interval
        self._last = 0.0

    def wait(self) -> None:
        now = time.monotonic()
        delta = now - self._last
        if delta < self.min_interval:
            time.sleep(self.min_interval - delta)
        self._last = time.monotonic()


@dataclass
class RegistrySnapshot:
    """A package index: entry names, a URL template and optional page details."""

    source: LinkSource
    names: set[str]
    details: dict[str, dict] = field(default_factory=dict)

    def lookup(self, name: str) -> dict | None:
        if name not in self.names:
            return None
        name_field, url_field = INDEX_RAW_FIELDS[self.source]
        url = INDEX_URL_TEMPLATES[self.source].format(
            name=urllib.parse.quote(name, safe="")
        )
        raw = {name_field: name, url_field: url}
        raw.update(self.details.get(name, {}))
        return raw


@dataclass
class ApiSnapshot:
    """Per-name JSON documents, optionally backed by a live fetcher.

    Live responses are written back into the snapshot directory, so a live
    run leaves behind the snapshot an offline rerun will read.
    """

    source: LinkSource
    directory: Path
    fetcher: Callable[[str], dict | None] | None = None
    limiter: RateLimiter | None = None

    def _path(self, name: str) -> Path:
        return Path(self.directory) / (urllib.parse.quote(name, safe="") + ".json")

    def lookup(self, name: str) -> dict | None:
        path = self._path(name)
        if path.exists():
            try:
                raw = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as err:
                raise ExternalServiceError(self.source.value, f"bad snapshot {path.name}: {err}")
        elif self.fetcher is not None:
            if self.limiter is not None:
                self.limiter.wait()
            raw = self.fetcher(name)
            if raw is not None:
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_text(
                    json.dumps(raw, ensure_ascii=False, sort_keys=True, indent=1),
                    encoding="utf-8",
                )
        else:
            return None
        if raw is None:
            return None
        if not isinstance(raw, dict):
            raise ExternalServiceError(self.source.value, f"malformed record for {name!r}")
        if self.source is LinkSource.CODE_HOST:
            match = str(raw.get("best_github_match", ""))
            # Code-host matches are exact up to case.
            if match.lower() != name.lower():
                return None
        return raw


@dataclass
class LinkSources:
    """The configured lookup backends, keyed by source."""

    registries: dict[LinkSource, RegistrySnapshot] = field(default_factory=dict)
    apis: dict[LinkSource, ApiSnapshot] = field(default_factory=dict)
    precedence: tuple[LinkSource, ...] = DEFAULT_PRECEDENCE

    def configured(self) -> list[LinkSource]:
        return [s for s in self.precedence if s in self.registries or s in self.apis]


def exact_match_lookup(
    name: str,
    sources: LinkSources,
    soft_errors: list[str] | None = None,
) -> list[tuple[LinkSource, dict]]:
    """Exact-name candidates from every configured source, in precedence order.

    A failing source records a soft error and the remaining sources still
    run.
    """
    candidates: list[tuple[LinkSource, dict]] = []
    for source in sources.configured():
        backend = sources.registries.get(source) or sources.apis.get(source)
        try:
            raw = backend.lookup(name)
        except ExternalServiceError as err:
            logger.warning("lookup failed: %s", err)
            if soft_errors is not None:
                soft_errors.append(str(err))
            continue
        if raw is not None:
            candidates.append((source, raw))
    return candidates


def link_mentions(
    names: Iterable[str],
    name_ids: Mapping[str, int],
    sources: LinkSources,
    mapping: SchemaMapping = DEFAULT_SCHEMA_MAPPING,
    soft_errors: list[str] | None = None,
    collect_raw: dict[LinkSource, list[dict]] | None = None,
) -> dict[int, LinkedMetadata]:
    """Exact-match every name; keep the highest-precedence usable record.

    mapped_to aggregates the names reported by every matching source, so
    lower-precedence hits stay visible in the final record.
    """
    linked: dict[int, LinkedMetadata] = {}
    for name in sorted(set(names)):
        candidates = exact_match_lookup(name, sources, soft_errors=soft_errors)
        if collect_raw is not None:
            for source, raw in candidates:
                collect_raw.setdefault(source, []).append(dict(raw))
        normalized = [
            normalize_metadata(
                raw,
                source,
                mapping,
                mention_id=name_ids[name],
                software_mention=name,
            )
            for source, raw in candidates
        ]
        chosen = next((meta for meta in normalized if meta.package_url), None)
        if chosen is None:
            continue
        chosen.software_mention = name
        for other in normalized:
            if other is not chosen:
                _append_values(chosen.mapped_to, other.mapped_to)
        linked[name_ids[name]] = chosen
    return linked


def propagate_links(
    result: DisambiguationResult,
    links: Mapping[int, LinkedMetadata],
) -> dict[int, LinkedMetadata]:
    """Give every cluster member its cluster name's link, with fallbacks.

    A member of a cluster whose name has a link inherits that link. When
    the name has none, or the mention was never clustered, the mention's
    own exact-match link applies. Mentions with neither stay unlinked.
    """
    propagated: dict[int, LinkedMetadata] = {}
    inherited: dict[int, LinkedMetadata] = {}
    for cluster in result.clusters:
        name_link = links.get(cluster.name_id)
        if name_link is None:
            continue
        for member in cluster.members:
            inherited[member] = replace(
                name_link,
                id=member,
                software_mention=result.reverse[member],
                mapped_to=list(name_link.mapped_to),
                platform=list(name_link.platform),
                description=list(name_link.description),
                homepage_url=list(name_link.homepage_url),
                other_urls=list(name_link.other_urls),
                license=list(name_link.license),
                github_repo=list(name_link.github_repo),
                github_repo_licenses=list(name_link.github_repo_licenses),
                reference=list(name_link.reference),
                scicrunch_synonyms=list(name_link.scicrunch_synonyms),
            )
    for mention_id in range(len(result.reverse)):
        if mention_id in inherited:
            propagated[mention_id] = inherited[mention_id]
        elif mention_id in links:
            propagated[mention_id] = links[mention_id]
    return propagated


def source_shares(counts: Mapping[str, int]) -> list[tuple[str, float]]:
    """Percent of linked mentions per source; shares sum to 100."""
    total = sum(counts.values())
    return [
        (source, 100.0 * count / total)
        for source, count in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    ]


def link_report(linked: Mapping[int, LinkedMetadata]) -> list[tuple[str, int, float]]:
    """Per-source (source, count, percent) rows over linked mentions."""
    counts: dict[str, int] = {}
    for meta in linked.values():
        counts[meta.source] = counts.get(meta.source, 0) + 1
    return [(source, counts[source], pct) for source, pct in source_shares(counts)]


MASTER_HEADER = (
    "ID",
    "software_mention",
    "mapped_to",
    "source",
    "platform",
    "package_url",
    "description",
    "homepage_url",
    "other_urls",
    "license",
    "github_repo",
    "github_repo_licenses",
    "exact_match",
    "RRID",
    "reference",
    "scicrunch_synonyms",
)


def _jlist(values: Sequence[str]) -> str:
    return json.dumps(list(values), ensure_ascii=False)


def metadata_row(meta: LinkedMetadata) -> list[str]:
    if not meta.package_url:
        raise ValueError(f"record for mention {meta.id} has no package_url")
    return [
        str(meta.id),
        meta.software_mention,
        _jlist(meta.mapped_to),
        meta.source,
        _jlist(meta.platform),
        meta.package_url,
        _jlist(meta.description),
        _jlist(meta.homepage_url),
        _jlist(meta.other_urls),
        _jlist(meta.license),
        _jlist(meta.github_repo),
        _jlist(meta.github_repo_licenses),
        str(meta.exact_match),
        meta.rrid or "",
        _jlist(meta.reference),
        _jlist(meta.scicrunch_synonyms),
    ]


def write_metadata_tsv(path, linked: Mapping[int, LinkedMetadata]) -> None:
    rows = [metadata_row(linked[mention_id]) for mention_id in sorted(linked)]
    write_tsv(path, MASTER_HEADER, rows)


def write_normalized_csvs(directory, linked: Mapping[int, LinkedMetadata]) -> None:
    import csv

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    by_source: dict[str, list[LinkedMetadata]] = {}
    for mention_id in sorted(linked):
        meta = linked[mention_id]
        by_source.setdefault(meta.source, []).append(meta)
    for source, rows in sorted(by_source.items()):
        out = directory / f"{source}.csv"
        with open(out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(MASTER_HEADER)
            for meta in rows:
                writer.writerow(metadata_row(meta))


def write_raw_csvs(directory, collected: Mapping[LinkSource, Sequence[Mapping]]) -> None:
    """Dump raw per-source candidate records, columns = union of raw fields."""
    import csv

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for source in sorted(collected, key=lambda s: s.value):
        rows = collected[source]
        columns = sorted({key for row in rows for key in row})
        out = directory / f"{source.value}.csv"
        with open(out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_csv_cell(row.get(col)) for col in columns])


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (list, tuple)):
        return json.dumps(list(value), ensure_ascii=False)
    return str(value)


def write_link_report_tsv(path, report: Sequence[tuple[str, int, float]]) -> None:
    rows = [(source, str(count), f"{pct:.2f}") for source, count, pct in report]
    write_tsv(path, ("source", "linked_mentions", "percent"), rows)


def fetch_json(url: str, headers: Mapping[str, str] | None = None, timeout: float = 30.0):
    """GET a JSON document; None on HTTP 404, ExternalServiceError otherwise."""
    request = urllib.request.Request(url, headers=dict(headers or {}))
    try:
        with urllib.request.urlopen(request, timeout=timeout) as response:
            payload = response.read()
    except urllib.error.HTTPError as err:
        if err.code == 404:
            return None
        raise ExternalServiceError(url, f"HTTP {err.code}")
    except urllib.error.URLError as err:
        raise ExternalServiceError(url, str(err.reason))
    try:
        return json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise ExternalServiceError(url, f"malformed response: {err}")


def knowledge_base_fetcher(
    url_template: str, token: str = "", timeout: float = 30.0
) -> Callable[[str], dict | None]:
    """Live knowledge-base lookup; the response JSON is stored verbatim."""

    def fetch(name: str) -> dict | None:
        url = url_template.format(name=urllib.parse.quote(name, safe=""))
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        data = fetch_json(url, headers=headers, timeout=timeout)
        if data is None:
            return None
        if isinstance(data, dict) and isinstance(data.get("data"), dict):
            data = data["data"]
        if not isinstance(data, dict):
            raise ExternalServiceError(LinkSource.KNOWLEDGE_BASE.value, "unexpected payload")
        data.setdefault("software_name", name)
        return data

    return fetch


def code_host_fetcher(token: str = "", timeout: float = 30.0) -> Callable[[str], dict | None]:
    """Live code-host repository search, keeping only exact-name matches."""

    def fetch(name: str) -> dict | None:
        query = urllib.parse.quote(f"{name} in:name", safe="")
        url = f"https://api.github.com/search/repositories?q={query}&per_page=10"
        headers = {"Accept": "application/vnd.github+json"}
        if token:
            headers["Authorization"] = f"Bearer {token}"
        data = fetch_json(url, headers=headers, timeout=timeout)
        if not isinstance(data, dict):
            return None
        for item in data.get("items", []):
            if str(item.get("name", "")).lower() == name.lower():
                license_info = item.get("license") or {}
                return {
                    "software_mention": name,
                    "best_github_match": item.get("name", ""),
                    "description": item.get("description") or "",
                    "github_url": item.get("html_url", ""),
                    "license": license_info.get("name", ""),
                    "exact_match": "True",
                }
        return None

    return fetch
