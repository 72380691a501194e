"""Pipeline configuration: a flat key = value file plus flag overrides.

Dotted keys group settings (thresholds.use, dbscan.eps, ...). API tokens
never appear here; they come from environment variables so that config
snapshots in manifests stay free of secrets.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ValidationError

KB_TOKEN_ENV = "SOFTMENTIONS_KB_TOKEN"
CODE_HOST_TOKEN_ENV = "SOFTMENTIONS_CODEHOST_TOKEN"

DEFAULT_PRECEDENCE_NAMES = (
    "PkgIndexBioc",
    "PkgIndexR",
    "PkgIndexPy",
    "KnowledgeBaseAPI",
    "CodeHostAPI",
)


@dataclass
class PipelineConfig:
    corpus: str = ""
    corpus_kind: str = "comm"
    registry_py: str = ""
    registry_r: str = ""
    registry_bioc: str = ""
    registry_details: str = ""
    kb_dict: str = ""
    stoplist: str = ""
    kb_snapshots: str = ""
    codehost_snapshots: str = ""
    out_dir: str = "out"
    record_threshold: float = 0.9
    use_threshold: float = 0.97
    eps: float = 0.03
    min_pts: int = 2
    offline: bool = True
    precedence: tuple[str, ...] = DEFAULT_PRECEDENCE_NAMES
    kb_api_url: str = ""
    workers: int = 1
    strict: bool = True
    write_matrix: bool = False
    eval_synonyms: str = ""
    eval_predicted_pairs: str = ""
    eval_curation_multi: str = ""
    eval_curation_binary: str = ""
    eval_linking: str = ""
    eval_ratings_two: str = ""
    eval_ratings_five: str = ""

    def validate(self) -> None:
        if not 0.0 < self.record_threshold <= 1.0:
            raise ValidationError("thresholds.record must lie in (0, 1]")
        if not self.record_threshold <= self.use_threshold <= 1.0:
            raise ValidationError("thresholds.use must lie in [thresholds.record, 1]")
        if self.eps <= 0:
            raise ValidationError("dbscan.eps must be positive")
        if self.min_pts < 1:
            raise ValidationError("dbscan.min_pts must be at least 1")
        if self.workers < 1:
            raise ValidationError("parallelism.workers must be at least 1")
        if self.corpus_kind not in ("comm", "non_comm", "publishers"):
            raise ValidationError(f"corpus.kind unknown: {self.corpus_kind!r}")
        unknown = [s for s in self.precedence if s not in DEFAULT_PRECEDENCE_NAMES]
        if unknown:
            raise ValidationError(f"linking.precedence has unknown sources: {unknown}")

    def kb_token(self) -> str:
        return os.environ.get(KB_TOKEN_ENV, "")

    def codehost_token(self) -> str:
        return os.environ.get(CODE_HOST_TOKEN_ENV, "")

    def snapshot(self) -> dict[str, str]:
        """Flat string view of the effective settings, for manifests."""
        out = {}
        for key in sorted(_KEY_TO_FIELD):
            value = getattr(self, _KEY_TO_FIELD[key])
            if isinstance(value, tuple):
                value = ",".join(value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            out[key] = str(value)
        return out


_KEY_TO_FIELD = {
    "paths.corpus": "corpus",
    "corpus.kind": "corpus_kind",
    "paths.registry_py": "registry_py",
    "paths.registry_r": "registry_r",
    "paths.registry_bioc": "registry_bioc",
    "paths.registry_details": "registry_details",
    "paths.kb_dict": "kb_dict",
    "paths.stoplist": "stoplist",
    "paths.kb_snapshots": "kb_snapshots",
    "paths.codehost_snapshots": "codehost_snapshots",
    "paths.out_dir": "out_dir",
    "thresholds.record": "record_threshold",
    "thresholds.use": "use_threshold",
    "dbscan.eps": "eps",
    "dbscan.min_pts": "min_pts",
    "linking.offline": "offline",
    "linking.precedence": "precedence",
    "linking.kb_api_url": "kb_api_url",
    "parallelism.workers": "workers",
    "parsing.strict": "strict",
    "output.matrix": "write_matrix",
    "eval.synonyms": "eval_synonyms",
    "eval.predicted_pairs": "eval_predicted_pairs",
    "eval.curation_multi": "eval_curation_multi",
    "eval.curation_binary": "eval_curation_binary",
    "eval.linking": "eval_linking",
    "eval.ratings_two": "eval_ratings_two",
    "eval.ratings_five": "eval_ratings_five",
}

_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(key: str, raw: str):
    name = _KEY_TO_FIELD[key]
    kind = _FIELD_TYPES[name]
    raw = raw.strip()
    if kind == "bool":
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValidationError(f"{key}: expected true/false, got {raw!r}")
    if kind == "int":
        try:
            return int(raw)
        except ValueError:
            raise ValidationError(f"{key}: expected an integer, got {raw!r}") from None
    if kind == "float":
        try:
            return float(raw)
        except ValueError:
            raise ValidationError(f"{key}: expected a number, got {raw!r}") from None
    if kind == "tuple[str, ...]":
        return tuple(part.strip() for part in raw.split(",") if part.strip())
    return raw


def apply_settings(config: PipelineConfig, settings: dict[str, str]) -> PipelineConfig:
    updates = {}
    for key, raw in settings.items():
        if key not in _KEY_TO_FIELD:
            raise ValidationError(f"unknown configuration key: {key!r}")
        updates[_KEY_TO_FIELD[key]] = _coerce(key, raw)
    return replace(config, **updates)


def load_config(path) -> PipelineConfig:
    """Parse a key = value file; '#' starts a comment, blank lines ignored."""
    settings: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        key, _, value = stripped.partition("=")
        settings[key.strip()] = value.strip()
    return apply_settings(PipelineConfig(), settings)
