import csv
import filecmp
import json
import os
from pathlib import Path

import numpy as np
import pytest

from valuesim import ConfigError
from valuesim.cli import main as cli_main
from valuesim.experiments import (
    DEFAULT_CF_GRID,
    ExperimentSpec,
    parse_config,
    plan_runs,
    run_experiment,
)
from valuesim.transit import VALUES

TINY_SIM = "sim: {n_agents: 20, max_epochs: 6}\n"


def write_cfg(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# --- parsing -------------------------------------------------------------------


def test_empty_file_gives_paper_defaults(tmp_path):
    spec = parse_config(write_cfg(tmp_path, ""))
    assert spec.kind == "baseline"
    assert spec.replications == 1
    cfg = spec.base
    assert cfg.n_agents == 500
    assert cfg.gamma == 0.8
    assert cfg.trips_per_epoch == 10
    assert cfg.cf == 0.0
    assert cfg.initial_distance_ranges == ((0.0, 4.0),) * 4
    assert cfg.modes[0].cost == 20.0 and cfg.modes[1].cost == 300.0
    assert spec.cf_grid == DEFAULT_CF_GRID


def test_unknown_top_level_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(write_cfg(tmp_path, "experimnt: baseline\n"))


def test_unknown_nested_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="sim.adaptation"):
        parse_config(write_cfg(tmp_path, "sim:\n  adaptation: {stepp: 0.2}\n"))


def test_negative_agents_rejected(tmp_path):
    with pytest.raises(ConfigError, match="n_agents"):
        parse_config(write_cfg(tmp_path, "sim: {n_agents: -5}\n"))


def test_parse_error_carries_line_context(tmp_path):
    bad = "sim:\n  n_agents: 10\n bad_indent: {\n"
    with pytest.raises(ConfigError, match=r"line \d+"):
        parse_config(write_cfg(tmp_path, bad))


def test_mode_and_perception_overrides(tmp_path):
    text = """
sim:
  perception: {carbon_reference: 250.0, loss_aversion: 2.0}
  modes:
    bus: {cost: 25.0, occupancy: {gaussian: {mean: 35, var: 16}}}
    taxi: {occupancy: {categorical: {values: [1, 2], probs: [0.5, 0.5]}}}
  graph: {p: 0.05, seed: 7}
"""
    spec = parse_config(write_cfg(tmp_path, text))
    assert spec.base.perception.carbon_reference == 250.0
    assert spec.base.perception.loss_aversion == 2.0
    assert spec.base.modes[0].cost == 25.0
    assert spec.base.modes[0].occupancy.mean == 35
    assert spec.base.modes[1].occupancy.values == (1, 2)
    assert spec.base.graph.p == 0.05 and spec.base.graph.seed == 7


def test_graph_null_disables_network(tmp_path):
    spec = parse_config(write_cfg(tmp_path, "sim: {graph: null}\n"))
    assert spec.base.graph is None


def test_initial_ranges_by_value_name(tmp_path):
    text = "sim:\n  initial_distance_ranges: {idealism: [0, 2]}\n"
    spec = parse_config(write_cfg(tmp_path, text))
    assert spec.base.initial_distance_ranges[VALUES.index("idealism")] == (0.0, 2.0)
    assert spec.base.initial_distance_ranges[0] == (0.0, 4.0)


def test_cf_grid_cartesian_product(tmp_path):
    text = "experiment: conformity\ncf_grid: [0, 0.25, 0.5, 0.75, 1.0]\n" + TINY_SIM
    spec = parse_config(write_cfg(tmp_path, text))
    assert len(plan_runs(spec)) == 4 * 5  # four init configs times five cf levels
    spec3 = ExperimentSpec(
        kind=spec.kind,
        replications=3,
        base=spec.base,
        cf_grid=spec.cf_grid,
    )
    assert len(plan_runs(spec3)) == 60


def test_replication_seeds_derived_from_master(tmp_path):
    spec = parse_config(write_cfg(tmp_path, "replications: 3\nsim: {master_seed: 100}\n"))
    runs = plan_runs(spec)
    assert [cfg.master_seed for _, _, cfg in runs] == [100, 101, 102]


# --- outputs -------------------------------------------------------------------


@pytest.fixture(scope="module")
def baseline_out(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("baseline")
    cfg = write_cfg(tmp, "replications: 2\n" + TINY_SIM)
    spec = parse_config(cfg)
    out = tmp / "out"
    manifest = run_experiment(spec, out)
    return spec, out, manifest


def test_output_layout(baseline_out):
    _, out, manifest = baseline_out
    assert (out / "manifest.json").exists()
    assert (out / "semantic_trends.csv").exists()
    assert (out / "replication_stats.csv").exists()
    for rep in ("rep00", "rep01"):
        d = out / "runs" / f"baseline_{rep}"
        assert (d / "trips.csv").exists()
        assert (d / "epochs.csv").exists()
        assert (d / "summary.csv").exists()


def test_csv_headers_and_locale(baseline_out):
    _, out, _ = baseline_out
    trends = (out / "semantic_trends.csv").read_text().splitlines()
    assert trends[0] == "epoch,value,mean_distance,subpopulation"
    run_dir = out / "runs" / "baseline_rep00"
    assert (run_dir / "trips.csv").read_text().splitlines()[0] == "trip,epoch,bus_fraction"
    assert (run_dir / "epochs.csv").read_text().splitlines()[0] == (
        "epoch,value,mean_distance,subpopulation"
    )
    body = "\n".join(trends[1:])
    assert "," in body and ";" not in body
    # no locale comma decimals: every numeric field parses as float
    for row in read_rows(out / "semantic_trends.csv"):
        float(row["mean_distance"])


def test_manifest_records_all_parameters(baseline_out):
    spec, out, manifest = baseline_out
    data = json.loads((out / "manifest.json").read_text())
    assert data == json.loads(json.dumps(manifest))  # tuples normalize to lists
    assert data["experiment"] == "baseline"
    assert len(data["runs"]) == 2
    run = data["runs"][0]
    cfg = run["config"]
    for field in (
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
    ):
        assert field in cfg
    assert data["runs"][0]["master_seed"] + 1 == data["runs"][1]["master_seed"]


def test_trends_are_pure_function_of_run_csvs(baseline_out):
    from valuesim.experiments import TRENDS_HEADER, _aggregate_trends, _fmt

    _, out, _ = baseline_out
    run_dirs = sorted((out / "runs").iterdir())
    rows = _aggregate_trends(run_dirs)
    rebuilt = ["﻿" if False else ",".join(TRENDS_HEADER)] + [
        ",".join(_fmt(x) for x in row) for row in rows
    ]
    assert (out / "semantic_trends.csv").read_text().splitlines() == rebuilt


def test_epoch_zero_snapshot_present(baseline_out):
    _, out, _ = baseline_out
    rows = read_rows(out / "runs" / "baseline_rep00" / "epochs.csv")
    zero = [r for r in rows if r["epoch"] == "0" and r["subpopulation"] == "all"]
    assert len(zero) == 4  # one initial mean per value


def test_byte_identical_reruns(tmp_path):
    spec = parse_config(write_cfg(tmp_path, TINY_SIM))
    run_experiment(spec, tmp_path / "a")
    run_experiment(spec, tmp_path / "b")
    comp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")

    def assert_same(c):
        assert not c.diff_files and not c.left_only and not c.right_only
        for sub in c.subdirs.values():
            assert_same(sub)

    assert_same(comp)


def test_init_experiment_outputs(tmp_path):
    spec = parse_config(write_cfg(tmp_path, "experiment: init\n" + TINY_SIM))
    out = tmp_path / "out"
    run_experiment(spec, out)
    rows = read_rows(out / "init_final.csv")
    assert len(rows) == 16  # four configs times four values
    configs = {r["config"] for r in rows}
    assert configs == {f"init_{v}" for v in VALUES}
    reduced = [r for r in rows if r["config"] == "init_idealism" and r["value"] == "idealism"]
    assert float(reduced[0]["initial_mean"]) < 1.5  # reduced range


def test_conformity_experiment_outputs(tmp_path):
    text = "experiment: conformity\ncf_grid: [0.0, 1.0]\nreduced_values: [frugalism]\n" + TINY_SIM
    spec = parse_config(write_cfg(tmp_path, text))
    out = tmp_path / "out"
    run_experiment(spec, out)
    rows = read_rows(out / "conformity_heatmap.csv")
    assert [(r["init_config"], r["cf"]) for r in rows] == [("frugalism", "0"), ("frugalism", "1")]
    for r in rows:
        assert 0.0 <= float(r["percent_public_transit"]) <= 100.0


def test_partial_outputs_removed_on_failure(tmp_path, monkeypatch):
    spec = parse_config(write_cfg(tmp_path, "replications: 2\n" + TINY_SIM))
    import valuesim.experiments as exp

    calls = {"n": 0}
    real = exp.run_simulation

    def flaky(cfg, backend=None):
        calls["n"] += 1
        if calls["n"] == 2:
            raise RuntimeError("disk on fire")
        return real(cfg, backend=backend)

    monkeypatch.setattr(exp, "run_simulation", flaky)
    out = tmp_path / "out"
    with pytest.raises(RuntimeError):
        run_experiment(spec, out)
    leftovers = [p for p in out.rglob("*")] if out.exists() else []
    assert leftovers == []


def test_graph_dump_flag(tmp_path):
    spec = parse_config(write_cfg(tmp_path, "dump_graph: true\n" + TINY_SIM))
    out = tmp_path / "out"
    run_experiment(spec, out)
    assert (out / "runs" / "baseline_rep00" / "graph_edges.txt").exists()


# --- CLI -----------------------------------------------------------------------


def test_cli_success_and_seed_override(tmp_path, capsys):
    cfg = write_cfg(tmp_path, TINY_SIM)
    rc = cli_main([str(cfg), "--out", str(tmp_path / "o"), "--seed", "5", "--quiet"])
    assert rc == 0
    data = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert data["runs"][0]["master_seed"] == 5


def test_cli_validation_error_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "sim: {n_agents: -1}\n")
    assert cli_main([str(cfg), "--out", str(tmp_path / "o"), "--quiet"]) == 1
    assert "error" in capsys.readouterr().err


def test_cli_missing_config_exit_code(tmp_path):
    assert cli_main([str(tmp_path / "nope.yaml"), "--quiet"]) == 1


def test_cli_runtime_failure_exit_code(tmp_path, monkeypatch, capsys):
    cfg = write_cfg(tmp_path, TINY_SIM)
    import valuesim.cli as cli

    monkeypatch.setattr(cli, "run_experiment", lambda *a, **k: 1 / 0)
    assert cli_main([str(cfg), "--out", str(tmp_path / "o"), "--quiet"]) == 2


def test_cli_env_var_out_dir(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, TINY_SIM)
    monkeypatch.setenv("VALUESIM_OUT", str(tmp_path / "envout"))
    monkeypatch.chdir(tmp_path)
    assert cli_main([str(cfg), "--quiet"]) == 0
    assert (tmp_path / "envout" / "manifest.json").exists()


def test_cli_experiment_and_replication_overrides(tmp_path):
    cfg = write_cfg(tmp_path, TINY_SIM)
    rc = cli_main(
        [str(cfg), "--out", str(tmp_path / "o"), "--experiment", "init", "--replications", "2", "--quiet"]
    )
    assert rc == 0
    data = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert data["experiment"] == "init"
    assert len(data["runs"]) == 8
