"""Bundled data: testbed catalog, source fixtures, inferences, scenarios, bench homes."""

from __future__ import annotations

import functools
import json
from pathlib import Path

from ..model import DeviceCatalog

DATA_DIR = Path(__file__).resolve().parent
SOURCES_DIR = DATA_DIR / "sources"
SCENARIOS_DIR = DATA_DIR / "scenarios"
INFERENCES_DIR = DATA_DIR / "inferences"
HOMES_DIR = DATA_DIR / "homes"


def data_path(*parts: str) -> Path:
    return DATA_DIR.joinpath(*parts)


@functools.lru_cache(maxsize=1)
def testbed_catalog() -> DeviceCatalog:
    return DeviceCatalog.from_dict(json.loads((DATA_DIR / "catalog.json").read_text()))


def ingest_bundled_sources():
    """Merge every bundled source file; returns the unresolved attribute map and overrides."""
    from ..spec.ingest import DeviceAttributeMap, ingest, load_overrides

    manifest = json.loads((SOURCES_DIR / "manifest.json").read_text())
    merged = DeviceAttributeMap()
    for entry in manifest["files"]:
        ingest(SOURCES_DIR / entry["path"], entry["format"], into=merged)
    return merged, load_overrides(SOURCES_DIR / manifest["designated"])


@functools.lru_cache(maxsize=1)
def dataset_catalog() -> DeviceCatalog:
    """The full device-attribute map built from the bundled sources."""
    merged, overrides = ingest_bundled_sources()
    return merged.resolve(overrides)
