"""DECT-2020 NR time/frequency constants.

All simulator times are integer ticks of 1/576 000 s, chosen so that a symbol
(24 ticks), a slot (240), a subslot and a frame (5760) are exact integers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

TICKS_PER_SECOND = 576_000
SYMBOL_TICKS = 24
SYMBOLS_PER_SLOT = 10
SLOT_TICKS = SYMBOL_TICKS * SYMBOLS_PER_SLOT
SLOTS_PER_FRAME = 24
FRAME_TICKS = SLOT_TICKS * SLOTS_PER_FRAME

BASE_SCS_HZ = 27_000
BASE_FFT_SIZE = 64
MIN_BANDWIDTH_HZ = BASE_SCS_HZ * BASE_FFT_SIZE

MU_VALUES = (1, 2, 4, 8)
BETA_VALUES = (1, 2, 4, 8, 12, 16)

PCC_SUBCARRIERS = 98


class InvalidScaling(ValueError):
    pass


class UnknownMcs(KeyError):
    pass


def subcarrier_spacing(mu: int) -> int:
    """Subcarrier spacing in Hz for scaling factor ``mu``."""
    if mu not in MU_VALUES:
        raise InvalidScaling(f"mu={mu!r} not in {MU_VALUES}")
    return BASE_SCS_HZ * mu


def channel_bandwidth(mu: int, beta: int) -> int:
    """Nominal channel bandwidth in Hz: ``SCS(mu) * 64 * beta``."""
    if beta not in BETA_VALUES:
        raise InvalidScaling(f"beta={beta!r} not in {BETA_VALUES}")
    return subcarrier_spacing(mu) * BASE_FFT_SIZE * beta


def seconds_to_ticks(seconds: float) -> int:
    return int(round(seconds * TICKS_PER_SECOND))


def ticks_to_seconds(ticks: int) -> float:
    return ticks / TICKS_PER_SECOND


@dataclass(frozen=True)
class TimeBase:
    subslots_per_slot: int = 2

    def __post_init__(self):
        if self.subslots_per_slot < 1 or SLOT_TICKS % self.subslots_per_slot:
            raise ValueError(
                f"subslots_per_slot={self.subslots_per_slot} does not divide a slot")

    frame_ticks: int = field(default=FRAME_TICKS, init=False)
    slot_ticks: int = field(default=SLOT_TICKS, init=False)
    symbol_ticks: int = field(default=SYMBOL_TICKS, init=False)
    slots_per_frame: int = field(default=SLOTS_PER_FRAME, init=False)
    symbols_per_slot: int = field(default=SYMBOLS_PER_SLOT, init=False)

    @property
    def subslot_ticks(self) -> int:
        return SLOT_TICKS // self.subslots_per_slot

    @property
    def subslots_per_frame(self) -> int:
        return SLOTS_PER_FRAME * self.subslots_per_slot

    @property
    def frame_duration(self) -> float:
        return ticks_to_seconds(FRAME_TICKS)

    @property
    def slot_duration(self) -> float:
        return ticks_to_seconds(SLOT_TICKS)

    @property
    def symbol_duration(self) -> float:
        return ticks_to_seconds(SYMBOL_TICKS)

    def airtime(self, n_slots: int, n_subslots: int = 0) -> int:
        """Duration in ticks of ``n_slots`` slots plus ``n_subslots`` subslots."""
        if n_slots < 0 or n_subslots < 0:
            raise ValueError("negative slot count")
        if n_slots == 0 and n_subslots == 0:
            raise ValueError("zero-length airtime")
        return n_slots * SLOT_TICKS + n_subslots * self.subslot_ticks

    def next_subslot_boundary(self, t: int) -> int:
        """First subslot boundary at or after tick ``t``."""
        s = self.subslot_ticks
        return -(-t // s) * s

    def next_slot_boundary(self, t: int) -> int:
        return -(-t // SLOT_TICKS) * SLOT_TICKS


class PccType(enum.Enum):
    TYPE1 = 1
    TYPE2 = 2


def pcc_info_bits(pcc_type: PccType) -> int:
    return 40 if pcc_type is PccType.TYPE1 else 80


@dataclass(frozen=True)
class PacketFormat:
    pcc_type: PccType = PccType.TYPE2
    has_stf: bool = True
    pcc_subcarriers: int = PCC_SUBCARRIERS

    @property
    def pcc_info_bits(self) -> int:
        return pcc_info_bits(self.pcc_type)


@dataclass(frozen=True)
class Mcs:
    name: str
    bits_per_symbol: int
    code_rate: float
    tb_bits_per_slot: int

    @property
    def spectral_efficiency(self) -> float:
        """Information bits per modulated symbol."""
        return self.bits_per_symbol * self.code_rate

    def shannon_threshold_db(self) -> float:
        """SNR at which the Shannon capacity equals the MCS spectral efficiency."""
        return 10.0 * math.log10(2.0 ** self.spectral_efficiency - 1.0)


QPSK_3_4 = Mcs("qpsk-3/4", 2, 0.75, 456)
MCS_TABLE: dict[str, Mcs] = {QPSK_3_4.name: QPSK_3_4}


def get_mcs(name: str, table: dict[str, Mcs] | None = None) -> Mcs:
    table = MCS_TABLE if table is None else table
    try:
        return table[name]
    except KeyError:
        raise UnknownMcs(name) from None


def transport_block_bits(mcs: Mcs | str, n_slots: int,
                         table: dict[str, Mcs] | None = None) -> int:
    """Transport block size in bits for ``n_slots`` slots (linear in slot count)."""
    table = MCS_TABLE if table is None else table
    name = mcs if isinstance(mcs, str) else mcs.name
    entry = get_mcs(name, table)
    if n_slots < 1:
        raise ValueError("n_slots must be >= 1")
    return entry.tb_bits_per_slot * n_slots


def slots_for_payload(mcs: Mcs, payload_bits: int) -> int:
    """Smallest number of slots whose transport block carries ``payload_bits``."""
    return max(1, -(-payload_bits // mcs.tb_bits_per_slot))
