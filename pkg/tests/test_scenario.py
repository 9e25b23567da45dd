import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from dectsim.config import RunConfig
from dectsim.scenario import (DELIVERED, LOST_HARQ, LOST_WATCHDOG, ConfigError, EnergyLedger,
                              EnergyModel, InsufficientSamples, MetricsAccumulator, NoData,
                              NotConverged, batch_means, batch_statistic, build_deployment,
                              cell_area, detect_steady_state, energy_efficiency, generate_traffic,
                              hex_sites, in_hexagon, latency_percentile, nearest_rank, plr,
                              reuse3_colour)


@pytest.mark.parametrize("k", [1, 7, 19])
def test_hex_sites_spacing(k):
    s = hex_sites(k, 500.0)
    assert len(s) == k and np.allclose(s[0], 0.0)
    if k > 1:
        d = np.linalg.norm(s[:, None] - s[None], axis=-1)
        np.fill_diagonal(d, np.inf)
        assert np.allclose(d.min(axis=1), 500.0)


def test_bad_site_count():
    with pytest.raises(ConfigError):
        hex_sites(3, 500.0)


def test_hexagon_area_by_monte_carlo():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-300, 300, (200_000, 2))
    frac = in_hexagon(pts[:, 0], pts[:, 1], 500.0).mean()
    assert frac * 600 ** 2 == pytest.approx(cell_area(500.0), rel=0.01)


def test_reuse3_neighbours_differ():
    s = hex_sites(19, 500.0)
    c = reuse3_colour(s, 500.0)
    d = np.linalg.norm(s[:, None] - s[None], axis=-1)
    adj = np.isclose(d, 500.0)
    assert not np.any(adj & (c[:, None] == c[None]))


def _cfg(**sc):
    return RunConfig().with_values(scenario=sc)


def test_deployment_counts_and_thinning():
    dep = build_deployment(_cfg(density_per_km2=1e6, node_area_km2=0.05, target_nodes=5000),
                           np.random.default_rng(0))
    assert dep.nominal_nodes == 50_000 and dep.n_nodes == 5000
    assert dep.thinning == pytest.approx(10.0)
    assert dep.n_sinks == 21
    r = np.linalg.norm(dep.node_xy, axis=1)
    assert r.max() <= math.sqrt(0.05e6 / math.pi)


def test_deployment_hex_region_and_channels():
    dep = build_deployment(_cfg(density_per_km2=2000, channels=3), np.random.default_rng(1))
    assert dep.region == "hex"
    assert dep.nominal_nodes == round(2000 * 7 * cell_area(500) / 1e6)
    assert set(dep.sink_carrier.tolist()) == {0, 1, 2}
    assert abs(dep.node_indoor.mean() - 0.8) < 0.05


def test_traffic_rate_scales_with_thinning():
    dep = build_deployment(_cfg(density_per_km2=1e6, node_area_km2=0.05, target_nodes=1000),
                           np.random.default_rng(2))
    arr = generate_traffic(dep, 3600.0, np.random.default_rng(3))
    expected = dep.nominal_nodes * 3600.0 / 7200.0
    assert abs(len(arr) - expected) < 5 * math.sqrt(expected)
    assert np.all(np.diff(arr.times) >= 0) and arr.nodes.min() >= dep.n_sinks


def _acc():
    led = EnergyLedger(3, EnergyModel())
    acc = MetricsAccumulator(led, 1.0, np.array([True, False, False]))
    return acc, led


def test_plr_latency_and_conservation():
    acc, led = _acc()
    for i in range(100):
        mid = acc.new_message(1, i * 1000, 256)
        if i % 10 == 0:
            acc.lost(mid, LOST_HARQ if i % 20 else LOST_WATCHDOG, i * 1000 + 5)
        else:
            acc.delivered(mid, i * 1000 + 576 * (i % 7 + 1), 1)
    assert plr(acc) == pytest.approx(0.1)
    c = acc.counts()
    assert c["generated"] == c["delivered"] + c["loss_harq"] + c["loss_watchdog"] \
        + c["loss_halfduplex"] + c["pending"]
    assert latency_percentile(acc, 0.99) == pytest.approx(7e-3)
    with pytest.raises(RuntimeError):
        acc.delivered(0, 1, 1)


def test_zero_loss_plr_and_empty_window():
    acc, _ = _acc()
    acc.delivered(acc.new_message(1, 0, 8), 10, 1)
    assert plr(acc) == 0.0
    with pytest.raises(NoData):
        plr(acc, (100, 200))


def test_nearest_rank_definition():
    v = np.arange(1, 101)
    assert nearest_rank(v, 0.99) == 99
    assert nearest_rank(v, 0.5) == 50
    assert nearest_rank([5.0], 0.99) == 5.0
    with pytest.raises(ValueError):
        nearest_rank(v, 1.0)


@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=200), st.floats(0.01, 0.99))
def test_nearest_rank_is_a_sample_with_enough_mass_below(vals, p):
    q = nearest_rank(vals, p)
    assert q in vals
    assert np.mean(np.asarray(vals) <= q) >= p - 1e-9


def test_energy_efficiency_counts_baseline():
    acc, led = _acc()
    mid = acc.new_message(1, 0, 1_000_000)
    led.tx(1, 10, 7.0, 576_000)
    acc.delivered(mid, 100, 1)
    e_tx = EnergyModel().tx_energy(7.0, 1.0)
    # two non-sink devices sleep for 1 s, minus the second device's busy time
    base = 2 * 1e-5 - 1e-5
    eff = energy_efficiency(acc, (0, 576_000))
    assert eff == pytest.approx(1.0 / (e_tx + base))


def test_batch_means_of_paired_samples_equal_iid_formula():
    x = np.random.default_rng(5).normal(3.0, 2.0, 400)
    bm = batch_statistic(np.repeat(x, 2), n_batches=400)
    hw = stats.t.ppf(0.975, 399) * x.std(ddof=1) / math.sqrt(400)
    assert bm.half_width == pytest.approx(hw, rel=1e-12)


def test_batch_means_half_width_matches_iid_closed_form():
    x = np.random.default_rng(7).normal(0.0, 1.0, 1_000_000)
    bm = batch_means(x, n_batches=20_000)
    closed = stats.t.ppf(0.975, len(x) - 1) * x.std(ddof=1) / math.sqrt(len(x))
    assert abs(bm.half_width / closed - 1.0) < 0.02
    assert abs(bm.lag1) < 0.05


def test_batch_means_errors():
    with pytest.raises(InsufficientSamples):
        batch_means(np.ones(10), 10)
    with pytest.raises(ValueError):
        batch_means(np.ones(10), 1)


def test_steady_state_detection():
    x = np.concatenate([np.linspace(10, 1, 10), np.ones(30)])
    t = np.arange(len(x)) * 2.0
    s = detect_steady_state(x, t, windows=5, eps=0.05)
    assert 8.0 <= s <= 40.0
    assert detect_steady_state(np.ones(10), windows=5) == 4.0
    with pytest.raises(NotConverged):
        detect_steady_state(np.arange(1, 30, dtype=float) ** 3, windows=2, eps=1e-6)
    with pytest.raises(ValueError):
        detect_steady_state([1.0, 2.0], windows=5)
