"""Cluster-tree formation: beacons, parent choice, association and reselection.

Device state is kept both as :class:`RadioDeviceState` objects and as small
numpy mirrors (``hop``, ``is_ft``) so the simulator can filter candidates in
bulk. Hop count ``-1`` marks a device that is not connected to a sink.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class Mode(enum.Flag):
    NONE = 0
    PT = 1
    FT = 2


class TopologyError(RuntimeError):
    pass


class NotFT(TopologyError):
    pass


class NoCandidate(TopologyError):
    pass


class AssociationFailed(TopologyError):
    pass


class Unassociated(TopologyError):
    pass


class NotASource(TopologyError):
    """Sinks neither originate nor relay application traffic."""


class ReselectTrigger(enum.Enum):
    PARENT_LOSS = "parent-loss"
    BETTER_CANDIDATE = "better-candidate"




@dataclass(frozen=True)
class Beacon:
    sender: int
    long_rd_id: int
    short_rd_id: int
    network_id_msb: int
    hop_count: int
    min_quality: float
    carrier: int


@dataclass(frozen=True)
class AssociationRecord:
    child_long: int
    child_short: int
    parent_long: int
    parent_short: int
    time: int


@dataclass(eq=False)
class RadioDeviceState:
    index: int
    long_rd_id: int
    short_rd_id: int
    network_id_msb: int
    network_id_lsb: int
    mode: Mode = Mode.PT
    is_sink: bool = False
    parent: int | None = None
    hop_count: int | None = None
    carrier: int | None = None
    children: set = field(default_factory=set)
    silenced: bool = False
    record: AssociationRecord | None = None

    @property
    def network_id(self) -> int:
        return (self.network_id_msb << 8) | self.network_id_lsb

    @property
    def associated(self) -> bool:
        return self.parent is not None


def filter_candidates(heard: Iterable[tuple[Beacon, float]], sensitivity: float,
                      bias: float) -> list[tuple[Beacon, float]]:
    """Keep beacons received at least ``bias`` dB above ``sensitivity``."""
    if bias < 0:
        raise ValueError("bias must be non-negative")
    thr = sensitivity + bias
    return [(b, r) for b, r in heard if r >= thr]


def parent_key(beacon: Beacon, rssi: float) -> tuple:
    return (beacon.hop_count, -rssi, beacon.long_rd_id)


def select_parent(candidates: Sequence[tuple[Beacon, float]]) -> tuple[Beacon, float]:
    """Fewest hops, then strongest RSSI, then smallest long ID."""
    if not candidates:
        raise NoCandidate("empty candidate set")
    return min(candidates, key=lambda c: parent_key(*c))


def choose_reselection(current_parent_hop: int | None, current_rssi: float | None,
                       candidates: Sequence[tuple[Beacon, float]], trigger: ReselectTrigger,
                       hysteresis_db: float) -> tuple[Beacon, float] | None:
    """Pick a new parent or return ``None`` to stay.

    Under parent loss any candidate is acceptable. Otherwise the best
    candidate must need fewer hops, or the same hops with at least
    ``hysteresis_db`` stronger RSSI than the current link.
    """
    if not candidates:
        return None
    best = select_parent(candidates)
    if trigger is ReselectTrigger.PARENT_LOSS or current_parent_hop is None:
        return best
    b, r = best
    if b.hop_count < current_parent_hop:
        return best
    if b.hop_count == current_parent_hop and current_rssi is not None \
            and r >= current_rssi + hysteresis_db:
        return best
    return None


class Topology:
    """Parent forest rooted at sinks."""

    def __init__(self, n_sinks: int, n_nodes: int, rng: np.random.Generator,
                 sink_carriers: Sequence[int] | None = None, max_depth: int = 0,
                 network_id_msb: int | None = None):
        n = n_sinks + n_nodes
        self.n_sinks = n_sinks
        self.n = n
        self.max_depth = max_depth
        self.rng = rng
        long_ids = rng.choice(2 ** 32, size=n, replace=False)
        short_ids = rng.integers(0, 2 ** 16, size=n)
        msb = int(rng.integers(0, 2 ** 24)) if network_id_msb is None else network_id_msb
        lsb = rng.integers(0, 2 ** 8, size=max(n_sinks, 1))
        self.network_id_msb = msb
        self.devices: list[RadioDeviceState] = []
        self.hop = np.full(n, -1, dtype=np.int64)
        self.is_ft = np.zeros(n, dtype=bool)
        self.carrier_arr = np.full(n, -1, dtype=np.int64)
        self.long_ids = np.asarray(long_ids, dtype=np.int64)
        for i in range(n):
            sink = i < n_sinks
            st = RadioDeviceState(i, int(long_ids[i]), int(short_ids[i]), msb,
                                  int(lsb[i]) if sink else 0,
                                  Mode.FT if sink else Mode.PT, sink)
            if sink:
                st.hop_count = 0
                st.carrier = int(sink_carriers[i]) if sink_carriers is not None else 0
                self.hop[i] = 0
                self.is_ft[i] = True
                self.carrier_arr[i] = st.carrier
            self.devices.append(st)

    def __getitem__(self, i: int) -> RadioDeviceState:
        return self.devices[i]

    # ---------------------------------------------------------------- queries

    def is_ancestor(self, a: int, b: int) -> bool:
        """True if ``a`` lies on the parent path of ``b`` (or ``a == b``)."""
        devs = self.devices
        cur: int | None = b
        steps = 0
        while cur is not None:
            if cur == a:
                return True
            cur = devs[cur].parent
            steps += 1
            if steps > self.n:
                raise TopologyError(f"cycle above device {b}")
        return False

    def descendants(self, d: int) -> list[int]:
        out = []
        stack = list(self.devices[d].children)
        while stack:
            c = stack.pop()
            out.append(c)
            stack.extend(self.devices[c].children)
        return out

    def route_next_hop(self, d: int) -> int:
        st = self.devices[d]
        if st.is_sink:
            raise NotASource(f"device {d} is a sink")
        if st.parent is None:
            raise Unassociated(f"device {d} has no parent")
        return st.parent

    def emit_beacon(self, d: int, sensitivity: float, bias: float) -> Beacon:
        st = self.devices[d]
        if Mode.FT not in st.mode or st.silenced:
            raise NotFT(f"device {d} is not operating in FT mode")
        return Beacon(d, st.long_rd_id, st.short_rd_id, st.network_id_msb,
                      st.hop_count if st.hop_count is not None else -1,
                      sensitivity + bias, st.carrier if st.carrier is not None else 0)

    def associated_fraction(self) -> float:
        nodes = self.hop[self.n_sinks:]
        if len(nodes) == 0:
            return 1.0
        return float(np.count_nonzero(nodes >= 0)) / len(nodes)

    # -------------------------------------------------------------- mutation

    def _set_hops(self, root: int) -> list[int]:
        devs = self.devices
        changed = []
        stack = [root]
        while stack:
            d = stack.pop()
            st = devs[d]
            if not st.is_sink:
                p = st.parent
                ph = devs[p].hop_count if p is not None else None
                new = ph + 1 if ph is not None else None
                if new != st.hop_count:
                    st.hop_count = new
                    self.hop[d] = -1 if new is None else new
                    changed.append(d)
            stack.extend(st.children)
        return changed

    def associate(self, child: int, parent: int, time: int = 0) -> AssociationRecord:
        devs = self.devices
        c = devs[child]
        p = devs[parent]
        if c.is_sink:
            raise AssociationFailed("sinks do not associate")
        if Mode.FT not in p.mode or p.silenced:
            raise AssociationFailed(f"parent {parent} is not an FT device")
        if p.hop_count is None:
            raise AssociationFailed(f"parent {parent} is not connected to a sink")
        if self.is_ancestor(child, parent):
            raise AssociationFailed(f"associating {child} under {parent} would form a cycle")
        if c.parent is not None:
            devs[c.parent].children.discard(child)
        siblings = {devs[s].short_rd_id for s in p.children}
        while c.short_rd_id in siblings or c.short_rd_id == p.short_rd_id:
            c.short_rd_id = int(self.rng.integers(0, 2 ** 16))
        c.parent = parent
        p.children.add(child)
        c.network_id_lsb = p.network_id_lsb
        c.record = AssociationRecord(c.long_rd_id, c.short_rd_id, p.long_rd_id,
                                     p.short_rd_id, time)
        self._set_hops(child)
        return c.record

    def disassociate(self, d: int) -> None:
        st = self.devices[d]
        if st.parent is not None:
            self.devices[st.parent].children.discard(d)
        st.parent = None
        st.record = None
        self._set_hops(d)

    def can_promote(self, d: int) -> bool:
        st = self.devices[d]
        if st.is_sink or st.silenced:
            return False
        if st.hop_count is None:
            return False
        return not (self.max_depth and st.hop_count >= self.max_depth)

    def promote_to_ft(self, d: int, rssi1_by_channel: Sequence[float],
                      tie_rng: np.random.Generator | None = None) -> int | None:
        """Add FT mode on the channel with the lowest measured RSSI-1.

        Returns the chosen carrier, or ``None`` when promotion is not allowed
        (unassociated device or depth cap reached).
        """
        st = self.devices[d]
        if not st.is_sink and st.parent is None:
            raise Unassociated(f"device {d} must be associated before FT promotion")
        if not st.is_sink and not self.can_promote(d):
            return None
        vals = np.asarray(rssi1_by_channel, dtype=float)
        best = np.flatnonzero(vals == vals.min())
        ch = int(best[0]) if tie_rng is None or len(best) == 1 else int(tie_rng.choice(best))
        st.mode = st.mode | Mode.FT
        st.carrier = ch
        self.is_ft[d] = True
        self.carrier_arr[d] = ch
        return ch

    def silence(self, d: int) -> list[int]:
        """Stop a device entirely; returns its former children (now orphaned)."""
        st = self.devices[d]
        st.silenced = True
        st.mode = Mode.NONE
        self.is_ft[d] = False
        kids = sorted(st.children)
        for k in kids:
            self.disassociate(k)
        if st.parent is not None:
            self.disassociate(d)
        return kids

    def reselect(self, d: int, candidates: Sequence[tuple[Beacon, float]],
                 trigger: ReselectTrigger, current_rssi: float | None = None,
                 hysteresis_db: float = 6.0, time: int = 0) -> int | None:
        """Apply a reselection decision immediately; returns the parent afterwards."""
        st = self.devices[d]
        legal = [(b, r) for b, r in candidates
                 if b.sender != d and not self.is_ancestor(d, b.sender)
                 and b.hop_count >= 0]
        cur_hop = None
        if trigger is ReselectTrigger.PARENT_LOSS:
            self.disassociate(d)
        elif st.parent is not None:
            cur_hop = self.devices[st.parent].hop_count
        pick = choose_reselection(cur_hop, current_rssi, legal, trigger, hysteresis_db)
        if pick is not None and pick[0].sender != st.parent:
            self.associate(d, pick[0].sender, time)
        return st.parent

    # ------------------------------------------------------------- invariants

    def check_invariants(self) -> list[str]:
        devs = self.devices
        out: list[str] = []
        state = np.zeros(self.n, dtype=np.int8)  # 0 unseen, 1 on path, 2 done
        for start in range(self.n):
            if state[start]:
                continue
            path = []
            cur = start
            while cur is not None and state[cur] == 0:
                state[cur] = 1
                path.append(cur)
                cur = devs[cur].parent
            if cur is not None and state[cur] == 1:
                cyc = path[path.index(cur):] + [cur]
                out.append("cycle: " + " -> ".join(map(str, cyc)))
            for p in path:
                state[p] = 2
        if out:
            return out
        for st in devs:
            if st.is_sink:
                if Mode.FT not in st.mode and not st.silenced:
                    out.append(f"sink {st.index} not in FT mode")
                if st.hop_count != 0 or st.parent is not None:
                    out.append(f"sink {st.index} has hop {st.hop_count}, parent {st.parent}")
                continue
            if st.parent is None:
                if st.hop_count is not None:
                    out.append(f"unassociated {st.index} has hop {st.hop_count}")
            else:
                p = devs[st.parent]
                if st.index not in p.children:
                    out.append(f"{st.index} missing from children of {st.parent}")
                want = None if p.hop_count is None else p.hop_count + 1
                if st.hop_count != want:
                    out.append(f"hop mismatch at {st.index}: {st.hop_count} != {want}")
            if (-1 if st.hop_count is None else st.hop_count) != self.hop[st.index]:
                out.append(f"hop mirror stale at {st.index}")
        for st in devs:
            for c in st.children:
                if devs[c].parent != st.index:
                    out.append(f"child {c} of {st.index} points at {devs[c].parent}")
        if len(set(self.long_ids.tolist())) != self.n:
            out.append("duplicate long RD IDs")
        return out

    def depth_of(self, d: int) -> int | None:
        """Tree distance to the root, or None if the root is not a sink."""
        devs = self.devices
        n = 0
        cur = d
        while devs[cur].parent is not None:
            cur = devs[cur].parent
            n += 1
        return n if devs[cur].is_sink else None

    def edges(self) -> list[tuple[int, int | None, int | None, int | None]]:
        return [(s.index, s.parent, s.hop_count, s.carrier) for s in self.devices]
