import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dectsim.engine import (EmissionKind, EmissionRegistry, EventKind, InvariantViolation,
                            LossReason, Scheduler, SchedulingError, effective_sinr,
                            resolve_reception, snapshot_audit)
from dectsim.mac import HarqProcess


def test_events_fire_in_time_then_insertion_order():
    s = Scheduler()
    out = []
    for t, tag in [(5, "a"), (1, "b"), (5, "c"), (3, "d")]:
        s.schedule(t, EventKind.CONTROL, out.append, tag)
    s.run_until(10)
    assert out == ["b", "d", "a", "c"]
    assert s.now == 10


def test_past_event_rejected_and_cancel():
    s = Scheduler()
    s.run_until(100)
    with pytest.raises(SchedulingError):
        s.schedule(50, EventKind.CONTROL, print)
    hit = []
    ev = s.schedule(150, EventKind.CONTROL, hit.append, 1)
    Scheduler.cancel(ev)
    s.run_until(200)
    assert hit == []


def test_stop_predicate():
    s = Scheduler()
    out = []
    for t in range(10):
        s.schedule(t, EventKind.CONTROL, out.append, t)
    info = s.run_until(100, stop=lambda: len(out) >= 3)
    assert info["halted"] == 1 and out == [0, 1, 2]


@given(st.lists(st.tuples(st.integers(0, 50), st.integers(1, 30), st.integers(0, 2)),
                min_size=1, max_size=40), st.integers(0, 80), st.integers(1, 40))
def test_registry_overlap_matches_brute_force(raw, t0, width):
    reg = EmissionRegistry()
    rows = sorted(raw)
    for i, (s, d, c) in enumerate(rows):
        reg.add(i, c, s, s + d, EmissionKind.DATA)
    t1 = t0 + width
    want = [i for i, (s, d, c) in enumerate(rows) if s < t1 and s + d > t0]
    assert reg.overlapping(None, t0, t1) == want
    assert reg.overlapping(1, t0, t1) == [i for i in want if rows[i][2] == 1]
    s_, e_, tx, car = reg.window(t0, t1)
    assert tx.tolist() == want


def test_registry_rejects_out_of_order():
    reg = EmissionRegistry()
    reg.add(0, 0, 10, 20, EmissionKind.DATA)
    with pytest.raises(SchedulingError):
        reg.add(1, 0, 5, 20, EmissionKind.DATA)
    with pytest.raises(ValueError):
        reg.add(1, 0, 30, 30, EmissionKind.DATA)


def test_effective_sinr_piecewise():
    # interferer equal to signal over half the packet
    lin = effective_sinr(1.0, [(1.0, 0, 50)], (0, 100), 1e-9)
    assert lin == pytest.approx(0.5 * 1.0 / (1.0 + 1e-9) + 0.5 * 1e9, rel=1e-9)
    assert effective_sinr(2.0, [], (0, 10), 1.0) == 2.0


def test_resolve_reception_reasons():
    per = lambda s: 1.0 / (1.0 + math.exp(2.0 * (s - 5.62)))  # noqa: E731
    assert resolve_reception(1.0, [], (0, 10), 1.0, per, 0.5, half_duplex=True).reason \
        is LossReason.HALF_DUPLEX
    assert resolve_reception(1.0, [], (0, 10), 1.0, per, 0.5, pruned=True).reason \
        is LossReason.PRUNED
    good = resolve_reception(1000.0, [], (0, 10), 1.0, per, 0.5)
    assert good.decoded and good.sinr_db == pytest.approx(30.0)
    bad = resolve_reception(1.0, [(10.0, 0, 10)], (0, 10), 1.0, per, 0.5)
    assert not bad.decoded and bad.reason is LossReason.INTERFERENCE


def test_audit_flags_harq_cap():
    h = HarqProcess()
    h.transmissions_done = 5
    rep = snapshot_audit(0, harq_processes=[h, None])
    assert not rep.ok
    with pytest.raises(InvariantViolation):
        rep.raise_if_failed()
    assert snapshot_audit(0, harq_processes=[HarqProcess()]).ok
