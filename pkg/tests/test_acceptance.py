"""Acceptance criteria at desk scale.

Each test records a verdict line (printed in the terminal summary) before it
asserts. Criteria that this model does not meet are marked ``xfail`` with
``strict=True``: the assertion is unchanged and a surprise pass fails the suite.
"""

import numpy as np
import pytest

import test_engine
import test_mac
import test_numerology
import test_propagation
import test_scenario
import test_topology
from dectsim.cli import emit_results, run_sweep
from dectsim.config import RunConfig
from dectsim.simulator import run_simulation

DENSITIES = (0.5e6, 2e6, 8e6, 16e6)
# extra points past the stated sweep, used only to locate 1% PLR crossings
EXTENDED = DENSITIES + (24e6, 32e6)
CONFIGS = {
    "single-hop": dict(mode="single-hop"),
    "bias 0": dict(bias_db=0.0),
    "bias 3": dict(bias_db=3.0),
    "bias 20": dict(bias_db=20.0),
    "bias 3, 3 ch": dict(bias_db=3.0, channels=3),
}
SWEEP_NODES = 6000
SWEEP_MESSAGES = 8000


def sweep_config(**scenario) -> RunConfig:
    return RunConfig().with_values(
        scenario=dict(target_nodes=SWEEP_NODES, **scenario),
        run=dict(target_messages=SWEEP_MESSAGES, reproducible=True))


def conserved(m: dict) -> bool:
    return m["generated"] == m["delivered"] + m["loss_harq"] + m["loss_watchdog"] \
        + m["loss_halfduplex"]


@pytest.fixture(scope="session")
def sweep():
    """metric -> config name -> array over EXTENDED densities."""
    out = {"plr": {}, "p99": {}, "eff": {}, "conserved": []}
    for name, sc in CONFIGS.items():
        res = run_sweep(sweep_config(**sc), "density", EXTENDED, common_seeds=True)
        assert not res.errors, [(r.point, r.error) for r in res.errors]
        rows = sorted(res.rows, key=lambda r: r.point)
        ms = [r.result.metrics for r in rows]
        out["plr"][name] = np.array([m["plr"] for m in ms])
        out["p99"][name] = np.array([m["latency_p99_ms"] for m in ms])
        out["eff"][name] = np.array([m["energy_eff_mbit_per_j"] for m in ms])
        out["conserved"] += [conserved(m) for m in ms]
    return out


def disc_run(density: float):
    cfg = RunConfig().with_values(
        scenario=dict(density_per_km2=density, node_area_km2=0.05, target_nodes=5000,
                      bias_db=3.0, channels=1, mode="multi-hop"),
        run=dict(sim_duration_s=7200.0, reproducible=True))
    return run_simulation(cfg)


@pytest.fixture(scope="session")
def disc_low():
    return disc_run(0.5e6)


@pytest.fixture(scope="session")
def disc_itu():
    return disc_run(1.0e6)


def crossing(dens, plr, level=0.01):
    """Density where PLR first reaches ``level``, linear between sweep points."""
    for i in range(len(plr)):
        if plr[i] >= level:
            if i == 0:
                return float(dens[0])
            d0, d1, p0, p1 = dens[i - 1], dens[i], plr[i - 1], plr[i]
            return float(d0 + (level - p0) * (d1 - d0) / (p1 - p0))
    return None


def fmt_m(d):
    return "none" if d is None else f"{d / 1e6:.1f}M"


def n_stated():
    return len(DENSITIES)


def test_criterion_1_low_load_latency(disc_low, criteria):
    m = disc_low.metrics
    p99 = m["latency_p99_ms"]
    ok = 2.0 <= p99 <= 15.0 and conserved(m)
    criteria[1] = (ok, f"p99 {p99:.2f} ms in [2, 15] (PLR {m['plr']:.4f}, "
                       f"{disc_low.details['n_nodes']} nodes)")
    assert conserved(m)
    assert 2.0 <= p99 <= 15.0


def test_criterion_2_itu_point(disc_itu, criteria):
    m = disc_itu.metrics
    plr, p99 = m["plr"], m["latency_p99_ms"]
    ok = plr < 0.01 and p99 < 10_000.0 and conserved(m)
    criteria[2] = (ok, f"PLR {plr:.4f} < 0.01, p99 {p99:.2f} ms < 10 s")
    assert conserved(m)
    assert plr < 0.01
    assert p99 < 10_000.0


RED_3 = "bias 20 sustains about 1.2x the single-hop density at 1% PLR, short of 1.5x"


@pytest.mark.xfail(strict=True, reason=RED_3)
def test_criterion_3_plr_shape(sweep, criteria):
    k = n_stated()
    mono = {n: bool(np.all(np.diff(p[:k]) >= 0)) for n, p in sweep["plr"].items()}
    c_single = crossing(EXTENDED, sweep["plr"]["single-hop"])
    c_mesh = crossing(EXTENDED, sweep["plr"]["bias 20"])
    ratio = None if c_single is None or c_mesh is None else c_mesh / c_single
    ok = all(mono.values()) and ratio is not None and ratio >= 1.5
    bad = [n for n, v in mono.items() if not v]
    criteria[3] = (ok, f"monotone in all configs: {not bad} {bad or ''}; 1% crossing "
                       f"single-hop {fmt_m(c_single)}, bias 20 {fmt_m(c_mesh)}, ratio "
                       f"{'n/a' if ratio is None else f'{ratio:.2f}'} (need >= 1.5)")
    assert not bad
    assert ratio is not None and ratio >= 1.5


def test_criterion_4_bias_ordering(sweep, criteria):
    plr = sweep["plr"]
    below = [i for i in range(len(EXTENDED)) if all(p[i] < 0.05 for p in plr.values())]
    if not below:
        criteria[4] = (False, "no sweep density keeps every config below 5% PLR")
    assert below
    i = max(below)
    p20, p3, p0 = plr["bias 20"][i], plr["bias 3"][i], plr["bias 0"][i]
    ok = p20 <= p3 <= p0
    criteria[4] = (ok, f"at {fmt_m(EXTENDED[i])}: PLR bias 20 {p20:.4f} <= bias 3 {p3:.4f} "
                       f"<= bias 0 {p0:.4f}")
    assert p20 <= p3 <= p0


def test_criterion_5_latency_ordering(sweep, criteria):
    p99 = sweep["p99"]
    low = range(3)  # 0.5, 2 and 8 M/km2
    b20_ge_b3 = all(p99["bias 20"][i] >= p99["bias 3"][i] for i in low)
    lowest = min(p99, key=lambda n: p99[n][0])
    ok = b20_ge_b3 and lowest == "single-hop"
    criteria[5] = (ok, "p99 bias 20 >= bias 3 at 0.5/2/8M: "
                       + " ".join(f"{p99['bias 20'][i]:.2f}>={p99['bias 3'][i]:.2f}" for i in low)
                       + f"; lowest at 0.5M: {lowest} ({p99[lowest][0]:.2f} ms)")
    assert b20_ge_b3
    assert lowest == "single-hop"


RED_6 = "the bias 3 over bias 20 efficiency gap widens with density instead of shrinking"


@pytest.mark.xfail(strict=True, reason=RED_6)
def test_criterion_6_energy_ordering(sweep, criteria):
    eff = sweep["eff"]
    k = n_stated()
    mesh = [n for n in CONFIGS if n != "single-hop"]
    single_lowest = all(eff["single-hop"][i] < eff[n][i] for n in mesh for i in range(k))
    gap = eff["bias 3"][:k] - eff["bias 20"][:k]
    ok = single_lowest and gap[0] >= 0 and gap[-1] < gap[0]
    criteria[6] = (ok, f"single-hop below every mesh config at all points: {single_lowest}; "
                       f"eff(bias 3) - eff(bias 20) at 0.5M {gap[0]:.2e}, at 16M {gap[-1]:.2e}")
    assert single_lowest
    assert gap[0] >= 0
    assert gap[-1] < gap[0]


RED_7 = "3 channels lose 2 messages where 1 channel loses none at 8 M/km2"


@pytest.mark.xfail(strict=True, reason=RED_7)
def test_criterion_7_channel_count(sweep, criteria):
    one, three = sweep["plr"]["bias 3"], sweep["plr"]["bias 3, 3 ch"]
    k = n_stated()
    le = bool(np.all(three[:k] <= one[:k]))
    c1, c3 = crossing(EXTENDED, one), crossing(EXTENDED, three)
    ratio = None if c1 is None or c3 is None else c3 / c1
    ok = le and ratio is not None and ratio < 1.3
    criteria[7] = (ok, f"3-ch PLR <= 1-ch at every point: {le}; 1% crossing 1 ch {fmt_m(c1)}, "
                       f"3 ch {fmt_m(c3)}, gain ratio "
                       f"{'n/a' if ratio is None else f'{ratio:.2f}'} (need < 1.3)")
    assert le
    assert ratio is not None and ratio < 1.3


def test_criterion_8_oracles_and_properties(sweep, tmp_path, criteria):
    checks = {}

    def check(name, fn, *args):
        try:
            fn(*args)
            checks[name] = True
        except AssertionError:
            checks[name] = False

    check("numerology", test_numerology.test_bandwidth_anchor_points)
    check("bandwidth identity", test_numerology.test_bandwidth_identity)
    for row in test_propagation.PINNED:
        check(f"pathloss {row[0].name} {row[2]:g} m", test_propagation.test_pathloss_pinned_points,
              *row)
    check("PER curve", test_propagation.test_per_curve_shape)
    check("LBT windows", test_mac.test_backoff_window_sequence_exact)
    check("HARQ cap 1e5", test_mac.test_harq_cap_randomized)
    check("churn 1e3", test_topology.test_random_churn_keeps_forest_consistent)
    check("bias monotone", test_topology.test_candidate_set_monotone_in_bias)
    check("registry overlap", test_engine.test_registry_overlap_matches_brute_force)
    check("batch means", test_scenario.test_batch_means_half_width_matches_iid_closed_form)
    checks["conservation on every sweep run"] = all(sweep["conserved"])

    cfg = RunConfig().with_values(scenario=dict(target_nodes=150, node_area_km2=0.01,
                                                density_per_km2=5e5, bias_db=3.0),
                                  run=dict(target_messages=300, reproducible=True))
    a, b = tmp_path / "a", tmp_path / "b"
    emit_results(run_sweep(cfg), a, cfg)
    emit_results(run_sweep(cfg), b, cfg)
    checks["bit-identical results.csv"] = \
        (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()

    failed = [n for n, v in checks.items() if not v]
    criteria[8] = (not failed, f"{len(checks) - len(failed)}/{len(checks)} checks pass"
                               + (f"; failed: {failed}" if failed else ""))
    assert not failed
