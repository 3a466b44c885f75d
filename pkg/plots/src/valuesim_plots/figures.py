"""The three figure builders.

Each builder takes a CSV path and returns a matplotlib Figure; rendering
never modifies the inputs, so re-running on the same files yields the same
figure.  Every figure carries a small provenance footnote with the master
seed found in the sibling (or explicitly given) manifest.
"""

from __future__ import annotations

import math
from collections import OrderedDict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .io import (
    HEATMAP_COLUMNS,
    INIT_FINAL_COLUMNS,
    TRENDS_COLUMNS,
    load_rows,
    parse_float,
    provenance_footnote,
)

VALUE_ORDER = ("frugalism", "idealism", "individualism", "pragmatism")


def _ordered_unique(items):
    return list(OrderedDict.fromkeys(items))


def _value_sort_key(name):
    return (VALUE_ORDER.index(name), name) if name in VALUE_ORDER else (len(VALUE_ORDER), name)


def _finish(fig, footnote):
    fig.text(0.99, 0.01, footnote, ha="right", va="bottom", fontsize=7, color="0.4")
    return fig


def plot_trends(input_path, title=None, subpopulations=None, manifest_path=None):
    """Semantic-distance trend lines per value over epochs.

    ``subpopulations`` may be "all" (single panel over the whole population)
    or "split" (side-by-side taxi and bus panels).  The default splits
    whenever the file carries usable subpopulation rows.
    """
    rows = load_rows(input_path, TRENDS_COLUMNS)
    values = sorted({r["value"] for r in rows}, key=_value_sort_key)

    def series(subpop, value):
        pts = [
            (int(r["epoch"]), parse_float(r["mean_distance"]))
            for r in rows
            if r["subpopulation"] == subpop and r["value"] == value
        ]
        return [(e, d) for e, d in sorted(pts) if not math.isnan(d)]

    has_split_data = any(
        series(sub, v) for sub in ("taxi", "bus") for v in values
    )
    if subpopulations is None:
        subpopulations = "split" if has_split_data else "all"
    if subpopulations not in ("all", "split"):
        raise ValueError(f"subpopulations must be 'all' or 'split', got {subpopulations!r}")
    if subpopulations == "split" and not has_split_data:
        raise ValueError(f"{input_path}: no taxi/bus subpopulation rows to split on")

    panels = ["all"] if subpopulations == "all" else ["taxi", "bus"]
    fig, axes = plt.subplots(1, len(panels), figsize=(6 * len(panels), 4), squeeze=False)
    for ax, subpop in zip(axes[0], panels):
        for value in values:
            pts = series(subpop, value)
            if pts:
                ax.plot([p[0] for p in pts], [p[1] for p in pts], label=value)
        ax.set_xlabel("epoch")
        ax.set_ylabel("mean semantic distance")
        ax.set_title("whole population" if subpop == "all" else f"{subpop} subpopulation")
        ax.legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _finish(fig, provenance_footnote(input_path, manifest_path))


def plot_init_final(input_path, title=None, manifest_path=None):
    """Grouped initial-vs-final distance bars, one panel per init config."""
    rows = load_rows(input_path, INIT_FINAL_COLUMNS)
    configs = _ordered_unique(r["config"] for r in rows)
    ncols = 2 if len(configs) > 1 else 1
    nrows = math.ceil(len(configs) / ncols)
    fig, axes = plt.subplots(nrows, ncols, figsize=(5.5 * ncols, 3.6 * nrows), squeeze=False)
    flat = axes.ravel()
    for ax in flat[len(configs):]:
        ax.set_visible(False)
    for ax, config in zip(flat, configs):
        sub = [r for r in rows if r["config"] == config]
        values = sorted({r["value"] for r in sub}, key=_value_sort_key)
        initial = [parse_float(next(r["initial_mean"] for r in sub if r["value"] == v)) for v in values]
        final = [parse_float(next(r["final_mean"] for r in sub if r["value"] == v)) for v in values]
        x = range(len(values))
        width = 0.38
        ax.bar([i - width / 2 for i in x], initial, width, label="initial", color="tab:blue")
        ax.bar([i + width / 2 for i in x], final, width, label="final", color="tab:orange")
        ax.set_xticks(list(x))
        ax.set_xticklabels(values, fontsize=8)
        pct = parse_float(sub[0]["percent_public_transit"])
        ax.set_title(f"{config} - Public transit: {pct:.1f}%", fontsize=10)
        ax.set_ylabel("mean semantic distance")
        ax.legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _finish(fig, provenance_footnote(input_path, manifest_path))


def plot_heatmap(input_path, title=None, manifest_path=None):
    """Init-config by conformity-level heatmap of public-transit percentage."""
    rows = load_rows(input_path, HEATMAP_COLUMNS)
    configs = _ordered_unique(r["init_config"] for r in rows)
    cfs = sorted({parse_float(r["cf"]) for r in rows})
    cells = {}
    for r in rows:
        key = (r["init_config"], parse_float(r["cf"]))
        cells[key] = parse_float(r["percent_public_transit"])
    grid = []
    for config in configs:
        line = []
        for cf in cfs:
            if (config, cf) not in cells:
                raise ValueError(f"{input_path}: missing cell for init config {config!r} at cf={cf:g}")
            line.append(cells[(config, cf)])
        grid.append(line)
    if len(cells) != len(configs) * len(cfs):
        raise ValueError(f"{input_path}: grid is not rectangular")

    fig, ax = plt.subplots(figsize=(1.4 * len(cfs) + 2.5, 0.8 * len(configs) + 1.8))
    im = ax.imshow(grid, vmin=0.0, vmax=100.0, cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(cfs)))
    ax.set_xticklabels([f"{cf:g}" for cf in cfs])
    ax.set_yticks(range(len(configs)))
    ax.set_yticklabels(configs)
    ax.set_xlabel("conformity factor")
    ax.set_ylabel("initialization")
    for i, config in enumerate(configs):
        for j in range(len(cfs)):
            shade = "white" if grid[i][j] < 50 else "black"
            ax.text(j, i, f"{grid[i][j]:.1f}", ha="center", va="center", fontsize=8, color=shade)
    fig.colorbar(im, ax=ax, label="% public transit")
    ax.set_title(title or "public transit share by initialization and conformity")
    fig.tight_layout()
    return _finish(fig, provenance_footnote(input_path, manifest_path))
