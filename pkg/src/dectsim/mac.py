"""Channel access: listen-before-talk with backoff, HARQ, random and scheduled access."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .numerology import SYMBOL_TICKS, TimeBase


class NoCapacity(RuntimeError):
    pass


class ChannelState(enum.Enum):
    IDLE = "idle"
    BUSY = "busy"


def lbt_sense(rssi1_dbm: float, threshold_dbm: float = -82.0,
              duration_ticks: int = 2 * SYMBOL_TICKS) -> ChannelState:
    """Busy iff RSSI-1 over the sensing window exceeds the threshold."""
    if duration_ticks < 2 * SYMBOL_TICKS:
        raise ValueError("sensing window shorter than two symbols")
    return ChannelState.BUSY if rssi1_dbm > threshold_dbm else ChannelState.IDLE


@dataclass
class LbtState:
    """Binary exponential backoff counter (windows in subslots)."""

    cw_min: int = 8
    cw_max: int = 256
    stage: int = 0
    pending_backoff: int = 0

    def __post_init__(self):
        if not 1 <= self.cw_min <= self.cw_max:
            raise ValueError("need 1 <= cw_min <= cw_max")

    @property
    def contention_window(self) -> int:
        return min(self.cw_min << self.stage, self.cw_max)

    def on_busy(self, rng: np.random.Generator) -> int:
        """Draw a backoff in ``[0, CW)`` and double the window for next time."""
        k = int(rng.integers(0, self.contention_window))
        self.pending_backoff = k
        if self.contention_window < self.cw_max:
            self.stage += 1
        return k

    def reset(self) -> None:
        self.stage = 0
        self.pending_backoff = 0


def backoff_windows(cw_min: int = 8, cw_max: int = 256, n: int = 7) -> list[int]:
    """Contention windows seen over ``n`` consecutive busy senses."""
    s = LbtState(cw_min, cw_max)
    out = []
    for _ in range(n):
        out.append(s.contention_window)
        if s.contention_window < cw_max:
            s.stage += 1
    return out


# --------------------------------------------------------------------------
# HARQ


class HarqState(enum.Enum):
    WAITING_ACCESS = "waiting-access"
    IN_FLIGHT = "in-flight"
    AWAITING_FEEDBACK = "awaiting-feedback"
    DONE = "done"
    FAILED = "failed"


class Feedback(enum.Enum):
    ACK = "ack"
    NACK = "nack"
    TIMEOUT = "timeout"


TERMINAL = (HarqState.DONE, HarqState.FAILED)


@dataclass(eq=False)
class HarqProcess:
    tb: object = None
    max_retransmissions: int = 3
    transmissions_done: int = 0
    state: HarqState = HarqState.WAITING_ACCESS
    last_failure: object = None

    @property
    def max_transmissions(self) -> int:
        return self.max_retransmissions + 1

    def start_transmission(self) -> None:
        if self.state is not HarqState.WAITING_ACCESS:
            raise RuntimeError(f"cannot transmit from {self.state.value}")
        if self.transmissions_done >= self.max_transmissions:
            raise RuntimeError("transmission cap reached")
        self.transmissions_done += 1
        self.state = HarqState.IN_FLIGHT

    def transmission_complete(self) -> None:
        if self.state is not HarqState.IN_FLIGHT:
            raise RuntimeError(f"no transmission in flight ({self.state.value})")
        self.state = HarqState.AWAITING_FEEDBACK


def harq_step(harq: HarqProcess, event: Feedback) -> HarqState:
    """Advance ``harq`` on feedback; retransmits until the cap is used up."""
    if harq.state in TERMINAL:
        raise RuntimeError("HARQ process already terminated")
    if event is Feedback.ACK:
        harq.state = HarqState.DONE
    elif harq.transmissions_done < harq.max_transmissions:
        harq.state = HarqState.WAITING_ACCESS
    else:
        harq.state = HarqState.FAILED
    return harq.state


def harq_feedback(decode_ok: bool, pcc_detected: bool = False) -> Feedback | None:
    """Receiver-side feedback: ACK on decode, NACK if only the header was
    detected, nothing otherwise (the transmitter then times out)."""
    if decode_ok:
        return Feedback.ACK
    if pcc_detected:
        return Feedback.NACK
    return None


# --------------------------------------------------------------------------
# random access


@dataclass(frozen=True)
class RachConfig:
    """Subslots (within a frame) in which random access is permitted."""

    permitted: tuple[bool, ...]
    responsible_ft: int = -1

    def __post_init__(self):
        if not any(self.permitted):
            raise ValueError("RACH configuration permits no subslot")

    @classmethod
    def everywhere(cls, timebase: TimeBase, responsible_ft: int = -1) -> "RachConfig":
        return cls((True,) * timebase.subslots_per_frame, responsible_ft)

    def next_permitted(self, t: int, timebase: TimeBase) -> int:
        """First permitted subslot boundary at or after tick ``t``."""
        ss = timebase.subslot_ticks
        n = len(self.permitted)
        k = -(-t // ss)
        for j in range(n):
            if self.permitted[(k + j) % n]:
                return (k + j) * ss
        raise AssertionError("unreachable")


# --------------------------------------------------------------------------
# scheduled access


class Validity(enum.Enum):
    SINGLE = "single"
    BOUNDED = "bounded"
    PERMANENT = "permanent"


@dataclass(frozen=True)
class ScheduledAllocation:
    owner: int
    carrier: int
    start_subslot: int
    duration: int
    repetition: int
    validity: Validity = Validity.PERMANENT
    count: int | None = None

    def offsets(self, period: int) -> list[int]:
        """Subslot indices (mod ``period``) occupied by this allocation."""
        out = []
        for base in range(self.start_subslot, period, self.repetition):
            out.extend((base + k) % period for k in range(self.duration))
        return out


class ClusterGrid:
    """Subslot grid of one FT, repeating every ``period`` subslots."""

    def __init__(self, ft: int, carrier: int, period: int, timebase: TimeBase):
        if period < 1:
            raise ValueError("period must be positive")
        self.ft = ft
        self.carrier = carrier
        self.period = period
        self.tb = timebase
        self.allocations: dict[int, ScheduledAllocation] = {}
        self._busy = np.zeros(period, dtype=bool)
        self._remaining: dict[int, int] = {}

    def free_subslots(self) -> int:
        return int(self.period - np.count_nonzero(self._busy))

    def reserve(self, child: int, demand: int, repetition: int | None = None,
                validity: Validity = Validity.PERMANENT, count: int | None = None,
                align: int = 1) -> ScheduledAllocation:
        rep = self.period if repetition is None else repetition
        if demand < 1 or rep < demand or self.period % rep:
            raise ValueError("demand must fit in a repetition that divides the period")
        if validity is Validity.BOUNDED and not count:
            raise ValueError("bounded validity needs a positive count")
        if child in self.allocations:
            self.release(child)
        for s in range(0, rep - demand + 1, align):
            cand = ScheduledAllocation(child, self.carrier, s, demand, rep, validity, count)
            idx = cand.offsets(self.period)
            if not self._busy[idx].any():
                self._busy[idx] = True
                self.allocations[child] = cand
                if validity is Validity.SINGLE:
                    self._remaining[child] = 1
                elif validity is Validity.BOUNDED:
                    self._remaining[child] = int(count)
                return cand
        raise NoCapacity(f"FT {self.ft}: no room for {demand} subslots every {rep}")

    def release(self, child: int) -> None:
        a = self.allocations.pop(child, None)
        if a is not None:
            self._busy[a.offsets(self.period)] = False
            self._remaining.pop(child, None)

    def consume(self, child: int) -> None:
        """Count one use of a non-permanent allocation, expiring it when spent."""
        if child in self._remaining:
            self._remaining[child] -= 1
            if self._remaining[child] <= 0:
                self.release(child)

    def next_occurrence(self, child: int, t: int) -> int:
        """Start tick of the first occurrence of ``child``'s allocation at or after ``t``."""
        a = self.allocations[child]
        ss = self.tb.subslot_ticks
        k = -(-t // ss)
        base = k - (k % a.repetition) + a.start_subslot
        if base < k:
            base += a.repetition
        return base * ss

    def check_invariants(self) -> list[str]:
        seen = np.zeros(self.period, dtype=np.int64)
        for a in self.allocations.values():
            np.add.at(seen, a.offsets(self.period), 1)
        out = []
        clash = np.flatnonzero(seen > 1)
        if clash.size:
            out.append(f"FT {self.ft}: overlapping allocations at subslots {clash[:8].tolist()}")
        if not np.array_equal(seen > 0, self._busy):
            out.append(f"FT {self.ft}: occupancy map out of sync")
        return out


def schedule_allocation(ft_is_ft: bool, grid: ClusterGrid, child: int, demand: int,
                        repetition: int | None = None,
                        validity: Validity = Validity.PERMANENT,
                        count: int | None = None) -> ScheduledAllocation:
    if not ft_is_ft:
        raise RuntimeError("only an FT device can issue allocations")
    return grid.reserve(child, demand, repetition, validity, count)


# --------------------------------------------------------------------------
# neighbour measurement reports


@dataclass(frozen=True)
class Rssi2Entry:
    network_id: int
    short_id: int
    rssi_dbm: float


def rssi2_report(entries: Iterable[tuple[int, int, float]]) -> dict[tuple[int, int], float]:
    """Map ``(network_id, short_id)`` to the strongest RSSI-2 heard from it."""
    out: dict[tuple[int, int], float] = {}
    for nid, sid, r in entries:
        k = (int(nid), int(sid))
        if k not in out or r > out[k]:
            out[k] = float(r)
    return out


def split_by_network(report: dict[tuple[int, int], float],
                     own_network_id: int) -> tuple[dict, dict]:
    """Partition a report into own-network and other-network neighbours."""
    own = {k: v for k, v in report.items() if k[0] == own_network_id}
    other = {k: v for k, v in report.items() if k[0] != own_network_id}
    return own, other


@dataclass
class DeviceCounters:
    tx_attempts: int = 0
    backoffs: int = 0
    busy_senses: int = 0
    harq_failures: int = 0
    relayed: int = 0
    dropped_watchdog: int = 0
    extra: dict = field(default_factory=dict)
