import dataclasses

import pytest
from hypothesis import given, strategies as st

from dectsim.config import (RangeError, RunConfig, UnknownKey, parse_config, parse_config_text,
                            to_ini)
from dectsim.scenario import ConfigError


def test_empty_file_gives_baseline(tmp_path):
    p = tmp_path / "empty.ini"
    p.write_text("")
    cfg = parse_config(p)
    assert cfg == RunConfig()
    assert cfg.scenario.density_per_km2 == 1e6
    assert cfg.scenario.bias_db == 0.0
    assert cfg.scenario.channels == 1
    assert cfg.phy.mcs == "qpsk-3/4"


@pytest.mark.parametrize("text,err", [
    ("[scenario]\nbias_db = -1\n", RangeError),
    ("[scenario]\nchannels = 2\n", RangeError),
    ("[scenario]\ndensity = 5\n", UnknownKey),
    ("[radio]\nx = 1\n", UnknownKey),
    ("[mac]\ncw_min = 64\ncw_max = 32\n", RangeError),
    ("[scenario]\nbias_db = abc\n", RangeError),
    ("[scenario\n", ConfigError),
])
def test_rejections_name_the_key(text, err):
    with pytest.raises(err) as info:
        parse_config_text(text)
    if err is RangeError and "abc" not in text and "cw_min" not in text:
        assert "scenario." in str(info.value) and "expected" in str(info.value)


def test_missing_file():
    with pytest.raises(ConfigError):
        parse_config("/nonexistent/x.ini")


def test_round_trip_defaults_and_meta():
    cfg = RunConfig().with_values(scenario={"bias_db": 20.0, "mode": "single-hop"},
                                  run={"reproducible": True, "master_seed": 99})
    text = to_ini(cfg, {"code_version": "x", "ticks": 576000})
    assert parse_config_text(text) == cfg


@given(st.floats(0, 40, allow_nan=False), st.sampled_from([1, 3]),
       st.floats(1e3, 3e7), st.integers(0, 2 ** 40), st.sampled_from(["rach", "scheduled"]))
def test_round_trip_property(bias, ch, dens, seed, access):
    cfg = RunConfig().with_values(scenario={"bias_db": bias, "channels": ch, "density_per_km2": dens},
                                  run={"master_seed": seed}, mac={"access": access})
    assert parse_config_text(to_ini(cfg)) == cfg


def test_every_field_has_a_check():
    for sec in dataclasses.fields(RunConfig):
        for f in dataclasses.fields(sec.default_factory()):
            assert f.metadata.get("check") is not None, f.name


def test_with_values_validates():
    with pytest.raises(UnknownKey):
        RunConfig().with_values(scenario={"nope": 1})
    with pytest.raises(RangeError):
        RunConfig().with_values(mac={"rach_subslots": "0,99"})
    assert RunConfig().with_values(mac={"rach_subslots": "0,2,4"}).mac.rach_subslots == "0,2,4"
