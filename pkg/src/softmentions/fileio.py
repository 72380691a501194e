"""Small file helpers: transparent gzip, deterministic TSV writing.

Tab-separated files in this project carry no quoting semantics: embedded
quote characters are literal content, fields may not contain tabs or
newlines. Comma-separated evaluation files do follow the usual CSV
conventions and are handled with the csv module where they are read.
"""
from __future__ import annotations

import gzip
import io
import os
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

GZIP_MAGIC = b"\x1f\x8b"


def open_text(path: str | os.PathLike[str]) -> IO[str]:
    """Open a plain or gzipped file as UTF-8 text, sniffing the magic bytes."""
    path = Path(path)
    with open(path, "rb") as probe:
        magic = probe.read(2)
    if magic == GZIP_MAGIC:
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, "r", encoding="utf-8", newline="")


def write_text(path: str | os.PathLike[str], data: str) -> None:
    """Write UTF-8 text; a .gz suffix selects gzip with mtime pinned to 0.

    Pinning mtime keeps gzipped outputs byte-identical across runs, which
    the determinism contract requires.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".gz":
        with open(path, "wb") as raw:
            with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as gz:
                gz.write(data.encode("utf-8"))
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)


def iter_tsv_rows(stream: IO[str]) -> Iterator[tuple[int, list[str]]]:
    """Yield (line_number, fields) pairs. Tabs separate, no quote handling."""
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n").rstrip("\r")
        yield lineno, line.split("\t")


def format_tsv(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    lines = ["\t".join(header)]
    lines.extend("\t".join(row) for row in rows)
    return "\n".join(lines) + "\n"


def write_tsv(path: str | os.PathLike[str], header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    write_text(path, format_tsv(header, rows))


def read_lines(path: str | os.PathLike[str]) -> list[str]:
    """Newline-delimited values; blank lines and '#' comments dropped."""
    out = []
    with open_text(path) as fh:
        for line in fh:
            line = line.rstrip("\n").rstrip("\r")
            if line and not line.startswith("#"):
                out.append(line)
    return out
