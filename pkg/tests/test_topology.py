import numpy as np
import pytest
from hypothesis import given, strategies as st

from dectsim.topology import (AssociationFailed, Beacon, Mode, NoCandidate, ReselectTrigger,
                              Topology, Unassociated, choose_reselection, filter_candidates,
                              select_parent)


def _beacon(sender, hop, long_id=None):
    return Beacon(sender, sender if long_id is None else long_id, sender, 7, hop, 0, 0)


def _depth_oracle(topo, d):
    """Hop count by walking parent links; None when not rooted at a sink."""
    n = 0
    while not topo.devices[d].is_sink:
        p = topo.devices[d].parent
        if p is None:
            return None
        d, n = p, n + 1
    return n


def test_select_parent_ordering():
    cands = [(_beacon(1, 2), -60.0), (_beacon(2, 1), -90.0), (_beacon(3, 1), -80.0),
             (_beacon(4, 1, long_id=0), -80.0)]
    b, r = select_parent(cands)
    assert b.sender == 4  # fewest hops, then RSSI tie broken by long ID
    with pytest.raises(NoCandidate):
        select_parent([])


@given(st.lists(st.floats(-120, -40), min_size=1, max_size=30), st.floats(0, 30), st.floats(0, 30))
def test_candidate_set_monotone_in_bias(rssis, b1, b2):
    lo, hi = sorted((b1, b2))
    heard = [(_beacon(i, 1), r) for i, r in enumerate(rssis)]
    small = {b.sender for b, _ in filter_candidates(heard, -97.9, hi)}
    large = {b.sender for b, _ in filter_candidates(heard, -97.9, lo)}
    assert small <= large


def test_negative_bias_rejected():
    with pytest.raises(ValueError):
        filter_candidates([], -97.9, -1.0)


def test_zero_bias_means_sensitivity():
    heard = [(_beacon(1, 1), -97.9), (_beacon(2, 1), -98.0)]
    assert [b.sender for b, _ in filter_candidates(heard, -97.9, 0.0)] == [1]


def test_reselection_hysteresis():
    cand = [(_beacon(5, 1), -70.0)]
    trig = ReselectTrigger.BETTER_CANDIDATE
    assert choose_reselection(1, -75.0, cand, trig, 6.0) is None
    assert choose_reselection(1, -76.0, cand, trig, 6.0) is not None
    assert choose_reselection(2, -60.0, cand, trig, 6.0) is not None
    assert choose_reselection(1, -60.0, cand, ReselectTrigger.PARENT_LOSS, 6.0) is not None


def _topo(n_sinks=3, n_nodes=60, seed=0):
    return Topology(n_sinks, n_nodes, np.random.default_rng(seed))


def test_association_builds_hops_and_ids():
    t = _topo()
    t.associate(3, 0)
    t.promote_to_ft(3, [0.0])
    t.associate(4, 3)
    assert t.devices[4].hop_count == 2 and t.hop[4] == 2
    assert t.devices[4].network_id == t.devices[0].network_id
    assert t.route_next_hop(4) == 3
    with pytest.raises(AssociationFailed):
        t.associate(3, 4)  # cycle, and 4 is not FT
    assert t.check_invariants() == []


def test_promotion_requires_association_and_picks_quietest():
    t = _topo()
    with pytest.raises(Unassociated):
        t.promote_to_ft(5, [0.0, 1.0])
    t.associate(5, 1)
    assert t.promote_to_ft(5, [-80.0, -95.0, -90.0]) == 1
    assert Mode.FT in t.devices[5].mode


def test_max_depth_blocks_promotion():
    t = Topology(1, 5, np.random.default_rng(0), max_depth=1)
    t.associate(1, 0)
    assert t.promote_to_ft(1, [0.0]) is None


def test_silence_orphans_children():
    t = _topo()
    t.associate(3, 0)
    t.promote_to_ft(3, [0.0])
    t.associate(4, 3)
    t.associate(5, 3)
    kids = t.silence(3)
    assert kids == [4, 5]
    assert t.devices[4].parent is None and t.devices[4].hop_count is None
    assert t.check_invariants() == []


def test_random_churn_keeps_forest_consistent():
    rng = np.random.default_rng(42)
    t = _topo(3, 80, seed=1)
    n = t.n
    rejected = 0
    for step in range(1000):
        op = rng.random()
        d = int(rng.integers(3, n))
        try:
            if op < 0.55:
                fts = np.flatnonzero(t.is_ft & (t.hop >= 0))
                t.associate(d, int(rng.choice(fts)), step)
            elif op < 0.75:
                t.disassociate(d)
            elif op < 0.97:
                if t.devices[d].parent is not None:
                    t.promote_to_ft(d, rng.normal(-90, 5, 3).tolist(), rng)
            elif not t.devices[d].silenced:
                t.silence(d)
        except AssociationFailed:
            rejected += 1
        assert t.check_invariants() == []
        for k in range(n):
            want = _depth_oracle(t, k)
            assert t.devices[k].hop_count == want
            assert t.hop[k] == (-1 if want is None else want)
    assert rejected > 0
    assert len(set(t.long_ids.tolist())) == n


def test_reselect_on_parent_loss():
    t = _topo()
    t.associate(3, 0)
    got = t.reselect(3, [(_beacon(1, 0), -70.0), (_beacon(2, 0), -60.0)],
                     ReselectTrigger.PARENT_LOSS)
    assert got == 2 and t.devices[3].hop_count == 1
