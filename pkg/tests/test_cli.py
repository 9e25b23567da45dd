import csv

import pytest

from dectsim import cli
from dectsim.cli import COLUMNS, emit_results, fmt_number, main, run_sweep
from dectsim.config import RunConfig, parse_config, parse_config_text
from dectsim.engine import InvariantViolation
from dectsim.rng import derive_seed
from dectsim.scenario import NotConverged

HEADER = ("density_per_km2,mode,bias_db,channels,seed,replication,plr,plr_ci,latency_p99_ms,"
          "latency_ci,energy_eff_mbit_per_j,energy_ci,loss_harq,loss_watchdog,loss_halfduplex,"
          "generated,delivered,sim_hours,wall_seconds")

TINY = """
[scenario]
target_nodes = 120
node_area_km2 = 0.01
density_per_km2 = 500000.0
bias_db = 3.0
[run]
target_messages = 200
reproducible = true
"""


def tiny() -> RunConfig:
    return parse_config_text(TINY)


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(TINY, encoding="utf-8")
    return p


def test_header_is_pinned():
    assert ",".join(COLUMNS) == HEADER


def test_fmt_number():
    assert fmt_number(0.0) == "0.0"
    assert fmt_number(0) == "0"
    assert fmt_number(1e6) == "1000000.0"
    assert fmt_number(1 / 3) == "0.333333333"
    assert fmt_number(float("nan")) == "nan"


def test_same_seed_gives_byte_identical_csv(tmp_path, cfg_file):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--config", str(cfg_file), "--out", str(a), "--seed", "7"]) == 0
    assert main(["--config", str(cfg_file), "--out", str(b), "--seed", "7"]) == 0
    ta = (a / "results.csv").read_bytes()
    assert ta == (b / "results.csv").read_bytes()
    assert ta.decode().splitlines()[0] == HEADER


def test_sweep_rows_and_seeds(tmp_path):
    res = run_sweep(tiny(), "density", [3e5, 5e5, 8e5], replications=2)
    assert len(res.rows) == 6 and not res.errors
    seeds = [r.seed for r in res.records]
    assert len(set(seeds)) == 6
    again = run_sweep(tiny(), "density", [3e5, 5e5, 8e5], replications=2)
    assert seeds == [r.seed for r in again.records]
    emit_results(res, tmp_path, tiny())
    with (tmp_path / "results.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    assert sorted({float(r["density_per_km2"]) for r in rows}) == [3e5, 5e5, 8e5]
    for r in rows:
        assert int(r["generated"]) == int(r["delivered"]) + int(r["loss_harq"]) \
            + int(r["loss_watchdog"]) + int(r["loss_halfduplex"])


def test_failed_point_does_not_abort_siblings(monkeypatch, tmp_path):
    real = cli.run_simulation

    bad_seed = derive_seed(tiny().run.master_seed, 2, 0)

    def flaky(cfg):
        if cfg.run.master_seed == bad_seed:
            raise InvariantViolation("injected")
        return real(cfg)

    monkeypatch.setattr(cli, "run_simulation", flaky)
    res = run_sweep(tiny(), "density", [3e5, 5e5, 8e5], replications=2)
    assert len(res.rows) == 5 and len(res.errors) == 1
    assert res.errors[0].error_kind == "invariant"
    emit_results(res, tmp_path, tiny())
    assert len((tmp_path / "results.csv").read_text().splitlines()) == 6
    assert len((tmp_path / "errors.csv").read_text().splitlines()) == 2


def test_run_meta_round_trip(tmp_path, cfg_file):
    assert main(["--config", str(cfg_file), "--out", str(tmp_path), "--export-topology"]) == 0
    assert parse_config(tmp_path / "run_meta.ini") == parse_config(cfg_file)
    meta = (tmp_path / "run_meta.ini").read_text()
    assert "ticks_per_second = 576000" in meta and "code_version" in meta
    assert (tmp_path / "topology_p0_r0.csv").exists()
    assert (tmp_path / "devices_p0_r0.csv").exists()


def test_zero_loss_prints_zero(tmp_path):
    cfg = tiny().with_values(scenario={"mode": "single-hop", "target_nodes": 40})
    res = run_sweep(cfg)
    rec = res.rows[0]
    emit_results(res, tmp_path, cfg)
    with (tmp_path / "results.csv").open() as fh:
        row = next(csv.DictReader(fh))
    assert rec.result.metrics["plr"] == 0
    assert row["plr"] == "0.0"
    assert row["loss_harq"] == "0"


def test_exit_code_config_error(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nbias_db = -1\n")
    assert main(["--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    bad.write_text("[scenario]\nchannels = 2\n")
    assert main(["--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    bad.write_text("[nope]\nx = 1\n")
    assert main(["--config", str(bad), "--out", str(tmp_path / "o")]) == 1


@pytest.mark.parametrize("exc, code", [(InvariantViolation("x"), 2), (NotConverged("x"), 3)])
def test_exit_codes_for_run_failures(monkeypatch, tmp_path, cfg_file, exc, code):
    def boom(cfg):
        raise exc
    monkeypatch.setattr(cli, "run_simulation", boom)
    assert main(["--config", str(cfg_file), "--out", str(tmp_path)]) == code
    assert (tmp_path / "errors.csv").exists()
