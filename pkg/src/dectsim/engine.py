"""Discrete-event kernel, emission bookkeeping and reception resolution."""

from __future__ import annotations

import enum
import heapq
import math
from array import array
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .rng import RngStreams  # noqa: F401  (re-exported for callers)


class SchedulingError(RuntimeError):
    """An event was scheduled before the current simulation time."""


class InvariantViolation(RuntimeError):
    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class EventKind(enum.IntEnum):
    BEACON = 0
    SCAN = 1
    TRAFFIC_ARRIVAL = 2
    LBT = 3
    BACKOFF = 4
    TX_START = 5
    TX_END = 6
    FEEDBACK_START = 7
    FEEDBACK_END = 8
    FEEDBACK_TIMEOUT = 9
    ASSOC_RESPONSE = 10
    WATCHDOG = 11
    AUDIT = 12
    CONTROL = 13


class Event:
    __slots__ = ("time", "seq", "kind", "fn", "args", "cancelled")

    def __init__(self, time, seq, kind, fn, args):
        self.time = time
        self.seq = seq
        self.kind = kind
        self.fn = fn
        self.args = args
        self.cancelled = False

    def __repr__(self):
        return f"Event(t={self.time}, seq={self.seq}, kind={EventKind(self.kind).name})"


class Scheduler:
    """Min-heap event queue ordered by ``(time, insertion sequence)``."""

    def __init__(self):
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0
        self.now = 0
        self.processed = 0

    def schedule(self, time: int, kind: EventKind, fn: Callable, *args) -> Event:
        if time < self.now:
            raise SchedulingError(
                f"event {EventKind(kind).name} at t={time} scheduled from t={self.now}")
        ev = Event(time, self._seq, kind, fn, args)
        heapq.heappush(self._heap, (time, self._seq, ev))
        self._seq += 1
        return ev

    @staticmethod
    def cancel(ev: Event) -> None:
        ev.cancelled = True

    def __len__(self):
        return len(self._heap)

    def peek_time(self) -> int | None:
        return self._heap[0][0] if self._heap else None

    def run_until(self, t_end: int, stop: Callable[[], bool] | None = None) -> dict[str, int]:
        """Execute events with ``time <= t_end``; the clock ends at ``t_end``.

        ``stop`` is polled after each event; a true result halts early.
        """
        heap = self._heap
        pop = heapq.heappop
        n = 0
        while heap and heap[0][0] <= t_end:
            _, _, ev = pop(heap)
            if ev.cancelled:
                continue
            self.now = ev.time
            ev.fn(*ev.args)
            n += 1
            if stop is not None and stop():
                self.processed += n
                return {"events": n, "halted": 1}
        self.now = max(self.now, t_end)
        self.processed += n
        return {"events": n, "halted": 0}


# --------------------------------------------------------------------------
# emissions


class EmissionKind(enum.IntEnum):
    DATA = 0
    FEEDBACK = 1
    ASSOC_REQUEST = 2
    ASSOC_RESPONSE = 3
    BEACON = 4


class EmissionRegistry:
    """Append-only log of emissions, registered at their start time.

    Starts are non-decreasing, so overlap queries bisect on start time using
    the longest registered duration as the look-back bound.
    """

    def __init__(self):
        self.start = array("q")
        self.end = array("q")
        self.tx = array("q")
        self.carrier = array("q")
        self.kind = array("b")
        self.max_duration = 0

    def __len__(self):
        return len(self.start)

    def add(self, tx: int, carrier: int, start: int, end: int, kind: EmissionKind) -> int:
        if end <= start:
            raise ValueError("emission must have positive duration")
        if self.start and start < self.start[-1]:
            raise SchedulingError("emissions must be registered in start order")
        self.start.append(start)
        self.end.append(end)
        self.tx.append(tx)
        self.carrier.append(carrier)
        self.kind.append(int(kind))
        if end - start > self.max_duration:
            self.max_duration = end - start
        return len(self.start) - 1

    def overlapping(self, carrier: int | None, t0: int, t1: int, exclude: int = -1) -> list[int]:
        """Ids of emissions on ``carrier`` (any if None) intersecting ``[t0, t1)``."""
        starts = self.start
        i0 = bisect_right(starts, t0 - self.max_duration)
        i1 = bisect_left(starts, t1)
        ends = self.end
        car = self.carrier
        if carrier is None:
            return [i for i in range(i0, i1) if ends[i] > t0 and i != exclude]
        return [i for i in range(i0, i1)
                if ends[i] > t0 and car[i] == carrier and i != exclude]

    def window(self, t0: int, t1: int) -> tuple[np.ndarray, ...]:
        """Arrays ``(start, end, tx, carrier)`` of every emission intersecting ``[t0, t1)``."""
        i0 = bisect_right(self.start, t0 - self.max_duration)
        i1 = bisect_left(self.start, t1)
        cols = [np.frombuffer(a[i0:i1], dtype=np.int64) if i1 > i0 else np.empty(0, np.int64)
                for a in (self.start, self.end, self.tx, self.carrier)]
        keep = cols[1] > t0
        return tuple(c[keep] for c in cols)

    def by_tx(self, tx: int, t0: int, t1: int) -> list[int]:
        starts = self.start
        i0 = bisect_right(starts, t0 - self.max_duration)
        i1 = bisect_left(starts, t1)
        ends = self.end
        txs = self.tx
        return [i for i in range(i0, i1) if ends[i] > t0 and txs[i] == tx]


@dataclass(frozen=True)
class ActiveEmission:
    transmitter: int
    carrier: int
    start: int
    end: int
    rx_power_mw: dict = field(default_factory=dict, compare=False)


# --------------------------------------------------------------------------
# reception


class LossReason(enum.Enum):
    INTERFERENCE = "interference-decode-fail"
    HALF_DUPLEX = "half-duplex"
    PRUNED = "below-noise-prune"


@dataclass(frozen=True)
class Reception:
    decoded: bool
    reason: LossReason | None = None
    sinr_db: float = float("nan")


def effective_sinr(signal_mw: float, interferers: Iterable[tuple[float, int, int]],
                   interval: tuple[int, int], noise_mw: float) -> float:
    """Duration-weighted mean of the linear SINR over constant-interference pieces.

    ``interferers`` holds ``(power_mw, start, end)``; the result is linear.
    """
    t0, t1 = interval
    if t1 <= t0:
        raise ValueError("empty reception interval")
    clipped = []
    cuts = {t0, t1}
    for p, s, e in interferers:
        s, e = max(s, t0), min(e, t1)
        if e > s and p > 0.0:
            clipped.append((p, s, e))
            cuts.add(s)
            cuts.add(e)
    if not clipped:
        return signal_mw / noise_mw
    pts = sorted(cuts)
    acc = 0.0
    for a, b in zip(pts, pts[1:]):
        i = 0.0
        for p, s, e in clipped:
            if s <= a and e >= b:
                i += p
        acc += (b - a) * signal_mw / (noise_mw + i)
    return acc / (t1 - t0)


def resolve_reception(signal_mw: float, interferers: Iterable[tuple[float, int, int]],
                      interval: tuple[int, int], noise_mw: float,
                      per_fn: Callable[[float], float], u: float,
                      half_duplex: bool = False, pruned: bool = False) -> Reception:
    """Decide one reception.

    ``u`` is the U(0,1) draw for the Bernoulli decode decision; a packet is
    decoded iff ``u >= PER(effective SINR)``.
    """
    if half_duplex:
        return Reception(False, LossReason.HALF_DUPLEX)
    if pruned or signal_mw <= 0.0:
        return Reception(False, LossReason.PRUNED)
    lin = effective_sinr(signal_mw, interferers, interval, noise_mw)
    s_db = 10.0 * math.log10(lin)
    if u >= per_fn(s_db):
        return Reception(True, None, s_db)
    return Reception(False, LossReason.INTERFERENCE, s_db)


# --------------------------------------------------------------------------
# audit


@dataclass
class AuditReport:
    time: int
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_failed(self) -> None:
        if self.violations:
            raise InvariantViolation(self.violations)


def snapshot_audit(time: int, topology: Any = None, harq_processes: Iterable = (),
                   grids: Iterable = (), max_transmissions: int = 4) -> AuditReport:
    """Check forest/hop-count, scheduling and HARQ-cap invariants."""
    report = AuditReport(time)
    if topology is not None:
        report.violations.extend(topology.check_invariants())
    for grid in grids:
        report.violations.extend(grid.check_invariants())
    for h in harq_processes:
        if h is not None and h.transmissions_done > max_transmissions:
            report.violations.append(
                f"harq cap exceeded: {h.transmissions_done} > {max_transmissions} ({h!r})")
    return report
