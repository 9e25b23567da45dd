import math

import pytest
from hypothesis import given, strategies as st

from dectsim.numerology import (BETA_VALUES, FRAME_TICKS, MU_VALUES, QPSK_3_4, SLOT_TICKS,
                                SYMBOL_TICKS, TICKS_PER_SECOND, InvalidScaling, TimeBase,
                                UnknownMcs, channel_bandwidth, get_mcs, slots_for_payload,
                                subcarrier_spacing, transport_block_bits)


def test_tick_constants_are_exact():
    assert FRAME_TICKS == TICKS_PER_SECOND // 100
    assert SLOT_TICKS * 24 == FRAME_TICKS
    assert SYMBOL_TICKS * 10 == SLOT_TICKS
    assert TimeBase(2).subslot_ticks == 120
    assert TimeBase(2).subslots_per_frame == 48


def test_bandwidth_anchor_points():
    assert channel_bandwidth(1, 1) == 1_728_000
    assert channel_bandwidth(8, 16) == 221_184_000


@given(st.sampled_from(MU_VALUES), st.sampled_from(BETA_VALUES))
def test_bandwidth_identity(mu, beta):
    assert channel_bandwidth(mu, beta) == subcarrier_spacing(mu) * 64 * beta


@pytest.mark.parametrize("mu,beta", [(3, 1), (1, 3), (0, 1), (16, 1)])
def test_invalid_scaling(mu, beta):
    with pytest.raises(InvalidScaling):
        channel_bandwidth(mu, beta)


def test_frame_and_slot_durations():
    tb = TimeBase()
    assert tb.frame_duration == pytest.approx(0.010)
    assert tb.slot_duration == pytest.approx(0.010 / 24)
    assert tb.symbol_duration == pytest.approx(0.010 / 240)


def test_airtime():
    tb = TimeBase()
    assert tb.airtime(1) == SLOT_TICKS
    assert tb.airtime(0, 1) == SLOT_TICKS // 2
    with pytest.raises(ValueError):
        tb.airtime(0)


@given(st.integers(0, 10 ** 9))
def test_boundaries(t):
    tb = TimeBase()
    b = tb.next_subslot_boundary(t)
    assert b >= t and b % 120 == 0 and b - t < 120
    s = tb.next_slot_boundary(t)
    assert s >= t and s % SLOT_TICKS == 0 and s - t < SLOT_TICKS


def test_tbs_linear_in_slots():
    assert transport_block_bits(QPSK_3_4, 1) == 456
    assert transport_block_bits("qpsk-3/4", 3) == 3 * 456
    with pytest.raises(UnknownMcs):
        get_mcs("256qam-7/8")


def test_payload_fits_one_slot():
    assert slots_for_payload(QPSK_3_4, 32 * 8) == 1
    assert slots_for_payload(QPSK_3_4, 457) == 2


def test_shannon_threshold():
    assert QPSK_3_4.shannon_threshold_db() == pytest.approx(10 * math.log10(2 ** 1.5 - 1))
