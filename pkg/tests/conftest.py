from __future__ import annotations

import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).parent
DATA_DIR = TESTS_DIR / "data"
FIXTURE_DIR = DATA_DIR / "fixture"
VARIANTS_DIR = DATA_DIR / "variants"

sys.path.insert(0, str(TESTS_DIR))

BASE_NAMES = {
    "limma": "limma",
    "blast": "BLAST",
    "scikit_learn": "scikit-learn",
    "imagej": "ImageJ",
    "spss": "SPSS",
    "matlab": "MATLAB",
    "graphpad": "GraphPad",
}


@pytest.fixture(scope="session")
def variant_lists() -> dict[str, list[str]]:
    return {
        path.stem: path.read_text(encoding="utf-8").splitlines()
        for path in sorted(VARIANTS_DIR.glob("*.txt"))
    }


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURE_DIR


@pytest.fixture()
def fixture_copy(tmp_path) -> Path:
    """A writable copy of the bundled corpus fixture."""
    import shutil

    dest = tmp_path / "fixture"
    shutil.copytree(FIXTURE_DIR, dest)
    return dest


def make_record(software: str, pmcid: str = "", doi: str = "", **kwargs):
    from softmentions.ingest import MentionRecord

    defaults = dict(
        software=software,
        text=f"We used {software}.",
        license="comm",
        source="materials and methods",
        number=1,
        pubdate=2021,
        pmcid=pmcid,
        doi=doi,
    )
    defaults.update(kwargs)
    return MentionRecord(**defaults)
