"""Experiment families over the simulation engine, with file outputs.

Three experiment kinds:

* ``baseline``   - one configuration, the published population defaults.
* ``init``       - initialization sensitivity: one run per value, with that
                   value's initial distances drawn from a reduced range.
* ``conformity`` - the cf grid crossed with the init configurations.

Every run writes ``trips.csv``, ``epochs.csv`` and ``summary.csv`` into its
own directory; aggregate CSVs are then recomputed purely from those per-run
files, so they can be rebuilt offline.  ``manifest.json`` records every
resolved parameter and seed.  All numeric output is locale-independent
(%.12g, '.' decimal separator), and nothing in any output depends on wall
time, so a rerun with the same manifest reproduces every byte.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import shutil
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__ as _PACKAGE_VERSION
from .engine import GraphConfig, SimulationConfig, run_simulation
from .errors import ConfigError
from .identity import AdaptationParams
from .network import write_edge_list
from .transit import (
    CategoricalOccupancy,
    GaussianOccupancy,
    ModeParameters,
    PerceptionParams,
    TransitMode,
    VALUES,
)

EXPERIMENT_KINDS = ("baseline", "init", "conformity")
DEFAULT_CF_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
DEFAULT_REDUCED_RANGE = (0.0, 2.0)

TRIPS_HEADER = ["trip", "epoch", "bus_fraction"]
EPOCHS_HEADER = ["epoch", "value", "mean_distance", "subpopulation"]
SUMMARY_HEADER = [
    "config",
    "replication",
    "seed",
    "cf",
    "epochs_run",
    "halted",
    "stabilized_count",
    "stabilized_fraction",
    "public_transit_share",
    "public_transit_share_all",
]
TRENDS_HEADER = ["epoch", "value", "mean_distance", "subpopulation"]
INIT_FINAL_HEADER = ["config", "value", "initial_mean", "final_mean", "percent_public_transit"]
HEATMAP_HEADER = ["init_config", "cf", "percent_public_transit"]


@dataclass(frozen=True)
class ExperimentSpec:
    """A fully resolved experiment: kind, replication count, base config."""

    kind: str = "baseline"
    replications: int = 1
    base: SimulationConfig = SimulationConfig()
    output_dir: str | None = None
    cf_grid: tuple[float, ...] = DEFAULT_CF_GRID
    reduced_values: tuple[str, ...] = VALUES
    reduced_range: tuple[float, float] = DEFAULT_REDUCED_RANGE
    dump_graph: bool = False

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"experiment: expected one of {EXPERIMENT_KINDS}, got {self.kind!r}")
        if self.replications < 1:
            raise ConfigError("replications: must be at least 1")
        for cf in self.cf_grid:
            if not 0.0 <= cf <= 1.0:
                raise ConfigError(f"cf_grid: value {cf} outside [0, 1]")
        for v in self.reduced_values:
            if v not in VALUES:
                raise ConfigError(f"reduced_values: unknown value {v!r}")
        lo, hi = self.reduced_range
        if lo > hi:
            raise ConfigError(f"reduced_range: [{lo}, {hi}] has lo > hi")


def _fmt(x) -> str:
    """Locale-independent numeric formatting for CSV cells."""
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return format(x, ".12g")
    return str(x)


# ---------------------------------------------------------------------------
# configuration file parsing (fail-closed)
# ---------------------------------------------------------------------------


def _require_mapping(node, where: str) -> dict:
    if node is None:
        return {}
    if not isinstance(node, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(node).__name__}")
    return node


def _reject_unknown(node: dict, allowed, where: str) -> None:
    unknown = set(node) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}; allowed: {sorted(allowed)}")


def _number(node, where: str) -> float:
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {node!r}")
    return float(node)


def _pair(node, where: str) -> tuple[float, float]:
    if not isinstance(node, (list, tuple)) or len(node) != 2:
        raise ConfigError(f"{where}: expected a [lo, hi] pair, got {node!r}")
    return (_number(node[0], where), _number(node[1], where))


def _parse_occupancy(node, where: str):
    node = _require_mapping(node, where)
    _reject_unknown(node, {"gaussian", "categorical"}, where)
    if len(node) != 1:
        raise ConfigError(f"{where}: expected exactly one of 'gaussian' or 'categorical'")
    if "gaussian" in node:
        g = _require_mapping(node["gaussian"], f"{where}.gaussian")
        _reject_unknown(g, {"mean", "var"}, f"{where}.gaussian")
        return GaussianOccupancy(
            mean=_number(g.get("mean"), f"{where}.gaussian.mean"),
            var=_number(g.get("var"), f"{where}.gaussian.var"),
        )
    c = _require_mapping(node["categorical"], f"{where}.categorical")
    _reject_unknown(c, {"values", "probs"}, f"{where}.categorical")
    values = c.get("values")
    probs = c.get("probs")
    if not isinstance(values, list) or not isinstance(probs, list):
        raise ConfigError(f"{where}.categorical: 'values' and 'probs' must be lists")
    return CategoricalOccupancy(values=tuple(values), probs=tuple(probs))


def _parse_mode(node, defaults: ModeParameters, where: str) -> ModeParameters:
    node = _require_mapping(node, where)
    allowed = {
        "cost",
        "time_mean",
        "time_var",
        "time_var_is_std",
        "seating_capacity",
        "max_occupancy",
        "occupancy",
        "emission_g_per_km",
    }
    _reject_unknown(node, allowed, where)
    kw = {}
    for key in ("cost", "time_mean", "time_var", "emission_g_per_km"):
        if key in node:
            kw[key] = _number(node[key], f"{where}.{key}")
    for key in ("seating_capacity", "max_occupancy"):
        if key in node:
            kw[key] = int(_number(node[key], f"{where}.{key}"))
    if "time_var_is_std" in node:
        if not isinstance(node["time_var_is_std"], bool):
            raise ConfigError(f"{where}.time_var_is_std: expected a boolean")
        kw["time_var_is_std"] = node["time_var_is_std"]
    if "occupancy" in node:
        kw["occupancy"] = _parse_occupancy(node["occupancy"], f"{where}.occupancy")
    return replace(defaults, **kw)


def _parse_sim(node, where: str = "sim") -> SimulationConfig:
    node = _require_mapping(node, where)
    allowed = {
        "n_agents",
        "gamma",
        "initial_distance_ranges",
        "trips_per_epoch",
        "max_epochs",
        "adaptation",
        "perception",
        "modes",
        "graph",
        "cf",
        "choice_temperature",
        "master_seed",
        "trip_distance_km",
        "anticipation",
    }
    _reject_unknown(node, allowed, where)
    base = SimulationConfig()
    kw = {}
    for key in ("cf", "choice_temperature", "trip_distance_km", "gamma"):
        if key in node:
            kw[key] = _number(node[key], f"{where}.{key}")
    for key in ("n_agents", "trips_per_epoch", "max_epochs", "master_seed"):
        if key in node:
            kw[key] = int(_number(node[key], f"{where}.{key}"))
    if "anticipation" in node:
        kw["anticipation"] = str(node["anticipation"])
    if "initial_distance_ranges" in node:
        sub = _require_mapping(node["initial_distance_ranges"], f"{where}.initial_distance_ranges")
        _reject_unknown(sub, VALUES, f"{where}.initial_distance_ranges")
        ranges = list(base.initial_distance_ranges)
        for v, rng in sub.items():
            ranges[VALUES.index(v)] = _pair(rng, f"{where}.initial_distance_ranges.{v}")
        kw["initial_distance_ranges"] = tuple(ranges)
    if "adaptation" in node:
        sub = _require_mapping(node["adaptation"], f"{where}.adaptation")
        fields = {"threshold", "step", "d_min", "d_max", "stabilization_window"}
        _reject_unknown(sub, fields, f"{where}.adaptation")
        akw = {k: _number(v, f"{where}.adaptation.{k}") for k, v in sub.items()}
        if "stabilization_window" in akw:
            akw["stabilization_window"] = int(akw["stabilization_window"])
        kw["adaptation"] = replace(base.adaptation, **akw)
    if "perception" in node:
        sub = _require_mapping(node["perception"], f"{where}.perception")
        fields = {f.name for f in dataclasses.fields(PerceptionParams)}
        _reject_unknown(sub, fields, f"{where}.perception")
        pkw = {k: _number(v, f"{where}.perception.{k}") for k, v in sub.items()}
        kw["perception"] = replace(base.perception, **pkw)
    if "graph" in node:
        if node["graph"] is None:
            kw["graph"] = None
        else:
            sub = _require_mapping(node["graph"], f"{where}.graph")
            _reject_unknown(sub, {"p", "seed"}, f"{where}.graph")
            gkw = {}
            if "p" in sub:
                gkw["p"] = _number(sub["p"], f"{where}.graph.p")
            if "seed" in sub and sub["seed"] is not None:
                gkw["seed"] = int(_number(sub["seed"], f"{where}.graph.seed"))
            kw["graph"] = GraphConfig(**gkw)
    if "modes" in node:
        sub = _require_mapping(node["modes"], f"{where}.modes")
        _reject_unknown(sub, {"bus", "taxi"}, f"{where}.modes")
        bus, taxi = base.modes
        if "bus" in sub:
            bus = _parse_mode(sub["bus"], bus, f"{where}.modes.bus")
        if "taxi" in sub:
            taxi = _parse_mode(sub["taxi"], taxi, f"{where}.modes.taxi")
        kw["modes"] = (bus, taxi)
    try:
        return replace(base, **kw)
    except ValueError as exc:  # engine-level invariant violations carry field context
        raise ConfigError(str(exc)) from exc


def parse_config(path) -> ExperimentSpec:
    """Load an experiment spec from YAML; unknown keys are rejected.

    An empty file yields the full default spec (baseline experiment, the
    published population parameters).
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        ctx = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ConfigError(f"{path}: parse error{ctx}: {exc}") from exc
    doc = _require_mapping(doc, str(path))
    allowed = {
        "experiment",
        "replications",
        "out",
        "cf_grid",
        "reduced_values",
        "reduced_range",
        "dump_graph",
        "sim",
    }
    _reject_unknown(doc, allowed, str(path))
    kw = {}
    if "experiment" in doc:
        kw["kind"] = str(doc["experiment"])
    if "replications" in doc:
        kw["replications"] = int(_number(doc["replications"], "replications"))
    if "out" in doc:
        kw["output_dir"] = str(doc["out"])
    if "cf_grid" in doc:
        if not isinstance(doc["cf_grid"], list) or not doc["cf_grid"]:
            raise ConfigError("cf_grid: expected a non-empty list")
        kw["cf_grid"] = tuple(_number(x, "cf_grid") for x in doc["cf_grid"])
    if "reduced_values" in doc:
        if not isinstance(doc["reduced_values"], list):
            raise ConfigError("reduced_values: expected a list")
        kw["reduced_values"] = tuple(str(v) for v in doc["reduced_values"])
    if "reduced_range" in doc:
        kw["reduced_range"] = _pair(doc["reduced_range"], "reduced_range")
    if "dump_graph" in doc:
        if not isinstance(doc["dump_graph"], bool):
            raise ConfigError("dump_graph: expected a boolean")
        kw["dump_graph"] = doc["dump_graph"]
    kw["base"] = _parse_sim(doc.get("sim"))
    return ExperimentSpec(**kw)


# ---------------------------------------------------------------------------
# run planning
# ---------------------------------------------------------------------------


def _reduced_config(base: SimulationConfig, value: str, reduced_range) -> SimulationConfig:
    ranges = list(base.initial_distance_ranges)
    ranges[VALUES.index(value)] = tuple(reduced_range)
    return replace(base, initial_distance_ranges=tuple(ranges))


def plan_runs(spec: ExperimentSpec) -> list[tuple[str, int, SimulationConfig]]:
    """Expand the spec into (config_name, replication, SimulationConfig) runs.

    Replication seeds are ``base.master_seed + replication``.
    """
    named: list[tuple[str, SimulationConfig]] = []
    if spec.kind == "baseline":
        named.append(("baseline", spec.base))
    elif spec.kind == "init":
        for v in spec.reduced_values:
            named.append((f"init_{v}", _reduced_config(spec.base, v, spec.reduced_range)))
    else:
        for v in spec.reduced_values:
            cfg_v = _reduced_config(spec.base, v, spec.reduced_range)
            for cf in spec.cf_grid:
                named.append((f"conformity_{v}_cf{cf:.2f}", replace(cfg_v, cf=cf)))
    runs = []
    for name, cfg in named:
        for rep in range(spec.replications):
            runs.append((name, rep, replace(cfg, master_seed=spec.base.master_seed + rep)))
    return runs


# ---------------------------------------------------------------------------
# per-run output files
# ---------------------------------------------------------------------------


class _OutputTracker:
    """Records created paths so a failed experiment leaves nothing behind."""

    def __init__(self):
        self.paths: list[Path] = []
        self.dirs: list[Path] = []

    def file(self, path: Path) -> Path:
        self.paths.append(path)
        return path

    def dir(self, path: Path) -> Path:
        missing = []
        probe = path
        while not probe.exists():
            missing.append(probe)
            probe = probe.parent
        for p in reversed(missing):
            p.mkdir()
            self.dirs.append(p)
        return path

    def cleanup(self):
        for p in self.paths:
            try:
                p.unlink(missing_ok=True)
            except OSError:
                pass
        for d in reversed(self.dirs):
            try:
                d.rmdir()
            except OSError:
                pass


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _write_run(run_dir: Path, name: str, rep: int, cfg: SimulationConfig, result, tracker) -> None:
    m = result.metrics
    trips_rows = []
    R = cfg.trips_per_epoch
    for t, frac in enumerate(m.bus_fraction_per_trip):
        trips_rows.append([t, t // R + 1, float(frac)])
    _write_csv(tracker.file(run_dir / "trips.csv"), TRIPS_HEADER, trips_rows)

    epoch_rows = []
    for v, vname in enumerate(VALUES):
        epoch_rows.append([0, vname, float(m.initial_mean_distance[v]), "all"])
        epoch_rows.append([0, vname, float("nan"), "bus"])
        epoch_rows.append([0, vname, float("nan"), "taxi"])
    for rec in m.epochs:
        for v, vname in enumerate(VALUES):
            epoch_rows.append([rec.epoch, vname, float(rec.mean_distance[v]), "all"])
            epoch_rows.append([rec.epoch, vname, float(rec.mean_distance_bus[v]), "bus"])
            epoch_rows.append([rec.epoch, vname, float(rec.mean_distance_taxi[v]), "taxi"])
    _write_csv(tracker.file(run_dir / "epochs.csv"), EPOCHS_HEADER, epoch_rows)

    _write_csv(
        tracker.file(run_dir / "summary.csv"),
        SUMMARY_HEADER,
        [
            [
                name,
                rep,
                cfg.master_seed,
                float(cfg.cf),
                m.epochs_run,
                m.halted,
                m.stabilized_count,
                float(m.stabilized_fraction),
                float(m.public_transit_share),
                float(m.public_transit_share_all),
            ]
        ],
    )


# ---------------------------------------------------------------------------
# aggregates (recomputed from the per-run CSVs)
# ---------------------------------------------------------------------------


def _read_csv(path: Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _nanmean(values: list[float]) -> float:
    vals = [v for v in values if not math.isnan(v)]
    return sum(vals) / len(vals) if vals else float("nan")


def _aggregate_trends(run_dirs: list[Path]) -> list[list]:
    acc: dict[tuple[int, str, str], list[float]] = {}
    for d in run_dirs:
        for row in _read_csv(d / "epochs.csv"):
            key = (int(row["epoch"]), row["value"], row["subpopulation"])
            acc.setdefault(key, []).append(float(row["mean_distance"]))
    rows = []
    for (epoch, value, subpop) in sorted(acc, key=lambda k: (k[0], VALUES.index(k[1]), k[2])):
        rows.append([epoch, value, _nanmean(acc[(epoch, value, subpop)]), subpop])
    return rows


def _summaries_by_config(run_dirs: list[Path]) -> dict[str, list[dict]]:
    grouped: dict[str, list[dict]] = {}
    for d in run_dirs:
        for row in _read_csv(d / "summary.csv"):
            grouped.setdefault(row["config"], []).append(row)
    return grouped


def _init_extremes(run_dir: Path) -> tuple[dict[str, float], dict[str, float]]:
    """Initial (epoch 0) and final (last epoch) whole-population means per value."""
    rows = [r for r in _read_csv(run_dir / "epochs.csv") if r["subpopulation"] == "all"]
    last_epoch = max(int(r["epoch"]) for r in rows)
    initial = {r["value"]: float(r["mean_distance"]) for r in rows if int(r["epoch"]) == 0}
    final = {r["value"]: float(r["mean_distance"]) for r in rows if int(r["epoch"]) == last_epoch}
    return initial, final


def _aggregate_init_final(run_dirs_by_name: dict[str, list[Path]]) -> list[list]:
    rows = []
    for name in sorted(run_dirs_by_name):
        initials: dict[str, list[float]] = {v: [] for v in VALUES}
        finals: dict[str, list[float]] = {v: [] for v in VALUES}
        shares = []
        for d in run_dirs_by_name[name]:
            ini, fin = _init_extremes(d)
            for v in VALUES:
                initials[v].append(ini[v])
                finals[v].append(fin[v])
            for s in _read_csv(d / "summary.csv"):
                shares.append(float(s["public_transit_share"]))
        pct = 100.0 * _nanmean(shares)
        for v in VALUES:
            rows.append([name, v, _nanmean(initials[v]), _nanmean(finals[v]), pct])
    return rows


def _aggregate_heatmap(run_dirs_by_name: dict[str, list[Path]]) -> list[list]:
    rows = []
    for name in sorted(run_dirs_by_name):
        shares, cfs = [], []
        for d in run_dirs_by_name[name]:
            for s in _read_csv(d / "summary.csv"):
                shares.append(float(s["public_transit_share"]))
                cfs.append(float(s["cf"]))
        # name is conformity_<value>_cf<cf>
        init_config = name.split("_cf")[0].removeprefix("conformity_")
        rows.append([init_config, cfs[0], 100.0 * _nanmean(shares)])
    rows.sort(key=lambda r: (VALUES.index(r[0]), r[1]))
    return rows


def _replication_stats(grouped: dict[str, list[dict]]) -> list[list]:
    rows = []
    metrics = ("public_transit_share", "stabilized_fraction", "epochs_run")
    for name in sorted(grouped):
        for metric in metrics:
            vals = [float(r[metric]) for r in grouped[name]]
            mean = float(np.mean(vals))
            std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
            rows.append([name, metric, mean, std, len(vals)])
    return rows


# ---------------------------------------------------------------------------
# top level
# ---------------------------------------------------------------------------


def _config_to_jsonable(cfg: SimulationConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["modes"] = {"bus": d["modes"][0], "taxi": d["modes"][1]}
    return d


def run_experiment(
    spec: ExperimentSpec,
    out_dir,
    backend: str | None = None,
    progress=None,
) -> dict:
    """Execute every run in the spec and write all outputs under ``out_dir``.

    Returns the manifest dictionary.  On any failure every file and directory
    created by this invocation is removed.
    """
    out = Path(out_dir)
    tracker = _OutputTracker()
    try:
        tracker.dir(out)
        runs = plan_runs(spec)
        manifest_runs = []
        run_dirs: list[Path] = []
        run_dirs_by_name: dict[str, list[Path]] = {}
        for name, rep, cfg in runs:
            run_name = f"{name}_rep{rep:02d}"
            if progress:
                progress(run_name)
            run_dir = tracker.dir(out / "runs" / run_name)
            result = run_simulation(cfg, backend=backend)
            _write_run(run_dir, name, rep, cfg, result, tracker)
            if spec.dump_graph and result.graph is not None:
                write_edge_list(result.graph, tracker.file(run_dir / "graph_edges.txt"))
            run_dirs.append(run_dir)
            run_dirs_by_name.setdefault(name, []).append(run_dir)
            manifest_runs.append(
                {
                    "name": run_name,
                    "config_name": name,
                    "replication": rep,
                    "master_seed": cfg.master_seed,
                    "config": _config_to_jsonable(cfg),
                }
            )

        aggregates = []
        if spec.kind == "baseline":
            _write_csv(tracker.file(out / "semantic_trends.csv"), TRENDS_HEADER, _aggregate_trends(run_dirs))
            aggregates.append("semantic_trends.csv")
        elif spec.kind == "init":
            _write_csv(
                tracker.file(out / "init_final.csv"),
                INIT_FINAL_HEADER,
                _aggregate_init_final(run_dirs_by_name),
            )
            aggregates.append("init_final.csv")
        else:
            _write_csv(
                tracker.file(out / "conformity_heatmap.csv"),
                HEATMAP_HEADER,
                _aggregate_heatmap(run_dirs_by_name),
            )
            aggregates.append("conformity_heatmap.csv")
        if spec.replications > 1:
            grouped = _summaries_by_config(run_dirs)
            _write_csv(
                tracker.file(out / "replication_stats.csv"),
                ["config", "metric", "mean", "stddev", "n"],
                _replication_stats(grouped),
            )
            aggregates.append("replication_stats.csv")

        manifest = {
            "package_version": _PACKAGE_VERSION,
            "experiment": spec.kind,
            "replications": spec.replications,
            "master_seed": spec.base.master_seed,
            "cf_grid": list(spec.cf_grid) if spec.kind == "conformity" else None,
            "reduced_values": list(spec.reduced_values) if spec.kind != "baseline" else None,
            "reduced_range": list(spec.reduced_range) if spec.kind != "baseline" else None,
            "aggregates": aggregates,
            "runs": manifest_runs,
        }
        manifest_path = tracker.file(out / "manifest.json")
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return manifest
    except BaseException:
        tracker.cleanup()
        raise
