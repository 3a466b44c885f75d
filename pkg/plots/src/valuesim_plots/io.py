"""CSV loading and schema checks for the experiment result files.

The three aggregate files the simulation CLI emits are consumed here by
column contract:

    semantic_trends.csv     epoch, value, mean_distance, subpopulation
    init_final.csv          config, value, initial_mean, final_mean,
                            percent_public_transit
    conformity_heatmap.csv  init_config, cf, percent_public_transit

A ``manifest.json`` sitting next to an input file supplies the master seed
for figure provenance footnotes.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

TRENDS_COLUMNS = ("epoch", "value", "mean_distance", "subpopulation")
INIT_FINAL_COLUMNS = ("config", "value", "initial_mean", "final_mean", "percent_public_transit")
HEATMAP_COLUMNS = ("init_config", "cf", "percent_public_transit")


class SchemaMismatchError(ValueError):
    """Input CSV does not carry the columns the figure kind requires."""

    def __init__(self, path, missing):
        self.missing = tuple(missing)
        super().__init__(f"{path}: missing column(s) {sorted(self.missing)}")


class EmptyInputError(ValueError):
    """Input CSV has a header but no data rows."""


def load_rows(path, required_columns) -> list[dict]:
    """Read a CSV and verify the required columns exist and rows are present."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required_columns if c not in header]
        if missing:
            raise SchemaMismatchError(path, missing)
        rows = list(reader)
    if not rows:
        raise EmptyInputError(f"{path}: no data rows")
    return rows


def parse_float(raw: str) -> float:
    return float(raw)  # 'nan' parses to NaN, which callers filter

def find_master_seed(input_path, manifest_path=None):
    """Master seed from the given manifest, or a manifest.json next to the input."""
    candidate = Path(manifest_path) if manifest_path else Path(input_path).parent / "manifest.json"
    if not candidate.exists():
        return None
    try:
        data = json.loads(candidate.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return None
    return data.get("master_seed")


def provenance_footnote(input_path, manifest_path=None) -> str:
    seed = find_master_seed(input_path, manifest_path)
    return f"master seed: {seed}" if seed is not None else "master seed: unavailable"
