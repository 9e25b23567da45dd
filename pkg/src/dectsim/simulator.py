"""Packet-level simulation of a DECT-2020 NR mesh (or single-hop) network.

A run has two phases. During warm-up, devices scan for beacons, associate
through the random-access path and (in mesh mode) promote themselves to FT.
Once the tree is stable, uplink application traffic is generated, relayed
hop by hop with LBT, HARQ and ACK feedback, and measured.

Link gains between all simulated devices are held in a dense float32
matrix (linear scale) built once from the frozen propagation model.
"""

from __future__ import annotations

import logging
import math
import time as _time
from collections import deque
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import engine as eng
from .config import AUTO, RunConfig
from .engine import EmissionKind, EventKind, LossReason, Scheduler
from .mac import (ClusterGrid, DeviceCounters, Feedback, HarqProcess, HarqState, LbtState,
                  NoCapacity, RachConfig, Validity, harq_step)
from .numerology import (SLOT_TICKS, SYMBOL_TICKS, TICKS_PER_SECOND, TimeBase, channel_bandwidth,
                         get_mcs, seconds_to_ticks, slots_for_payload)
from .propagation import (LinkModel, PerModel, dbm_to_mw, noise_floor_dbm, sensitivity_dbm,
                          umi_los)
from .rng import RngStreams
from .scenario import (DELIVERED, LOST_HALFDUPLEX, LOST_HARQ, LOST_WATCHDOG, PENDING,
                       BatchMeans, Deployment, EnergyLedger, EnergyModel, InsufficientSamples,
                       MetricsAccumulator, NoData, NotConverged, batch_statistic, build_deployment,
                       cell_area, detect_steady_state, generate_traffic, hex_sites, _drop_hex,
                       nearest_rank, _t_half_width)
from .topology import AssociationFailed, Mode, Topology, choose_reselection, ReselectTrigger

log = logging.getLogger(__name__)

DATA, ASSOC = 0, 1


class TopologyFailure(RuntimeError):
    """Warm-up ended without enough devices attached to a sink."""


class Message:
    __slots__ = ("mid", "origin", "holders", "done", "seen", "counted", "lost_as", "lost_hop")

    def __init__(self, mid, origin, counted):
        self.mid = mid
        self.origin = origin
        self.holders = 1
        self.done = False
        self.seen = {origin}
        self.counted = counted
        # reason and hop of the latest dropped copy, used once no copy remains
        self.lost_as: int | None = None
        self.lost_hop = 0


class Tb:
    __slots__ = ("kind", "msg", "enqueued", "target", "hop")

    def __init__(self, kind, msg, enqueued, target=-1, hop=0):
        self.kind = kind
        self.msg = msg
        self.enqueued = enqueued
        self.target = target
        self.hop = hop


class Dev:
    __slots__ = ("queue", "harq", "lbt", "radio_free", "away", "parked", "assoc_state",
                 "assoc_target", "assoc_deadline", "counters", "tx_dbm",
                 "tx_mw", "watch_ev", "lost_parent_at", "fb_start", "fb_end")

    def __init__(self, cw_min, cw_max, tx_dbm):
        self.queue = deque()
        self.harq = None
        self.lbt = LbtState(cw_min, cw_max)
        self.radio_free = 0
        self.away = deque()
        self.parked = False
        self.assoc_state = None
        self.assoc_target = -1
        self.assoc_deadline = 0
        self.counters = DeviceCounters()
        self.tx_dbm = tx_dbm
        self.tx_mw = dbm_to_mw(tx_dbm)
        self.watch_ev = None
        self.lost_parent_at = None
        self.fb_start = 0
        self.fb_end = 0


@dataclass
class RunResult:
    config: RunConfig
    metrics: dict[str, float]
    details: dict[str, Any] = field(default_factory=dict)
    device_stats: dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    topology: list[tuple] = field(default_factory=list, repr=False)


def link_budget_radius(max_loss_db: float, fc: float, h: float = 1.5) -> float:
    """Largest distance at which a ground-level LOS street link stays within ``max_loss_db``."""
    lo, hi = 1.0, 1.0e5
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        pl = float(umi_los(mid, math.hypot(mid, 0.0), fc, h, h, 0.0))
        if pl <= max_loss_db:
            lo = mid
        else:
            hi = mid
    return lo


def calibrate_single_hop_power(cfg: RunConfig, streams: RngStreams, sinks_xy: np.ndarray,
                               sensitivity: float) -> tuple[float, float]:
    """Node power closing the ``calibration_quantile`` best-sink coupling loss.

    Reference points are dropped over the whole site layout (independently of
    any node sub-area) so that cell-edge users drive the result. Power is
    raised in 1 dB steps from the node power class. Returns ``(power, loss)``.
    """
    sc, ph = cfg.scenario, cfg.phy
    rng = streams.fresh("calibration")
    sites = hex_sites(sc.area_scale, sc.isd_m)
    pts = _drop_hex(rng, sites, sc.isd_m, ph.calibration_samples)
    indoor = rng.random(len(pts)) < sc.indoor_fraction
    ns = len(sinks_xy)
    x = np.concatenate([sinks_xy[:, 0], pts[:, 0]])
    y = np.concatenate([sinks_xy[:, 1], pts[:, 1]])
    h = np.concatenate([np.full(ns, sc.sink_height_m), np.full(len(pts), sc.node_height_m)])
    ind = np.concatenate([np.zeros(ns, bool), indoor])
    lm = LinkModel(x, y, h, ind, np.arange(len(x)) < ns, ph.carrier_ghz,
                   streams.key("calibration-links"))
    a = np.repeat(np.arange(ns, len(x)), ns)
    b = np.tile(np.arange(ns), len(pts))
    best = lm.coupling_loss(a, b).reshape(len(pts), ns).min(axis=1)
    loss = float(np.quantile(best, ph.calibration_quantile))
    need = sensitivity + loss
    p = ph.node_power_dbm + max(0.0, math.ceil(need - ph.node_power_dbm - 1e-9))
    return p, loss


class Simulation:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        sc, ph, mac, tp = cfg.scenario, cfg.phy, cfg.mac, cfg.topology
        self.tb = TimeBase(ph.subslots_per_slot)
        self.streams = RngStreams(cfg.run.master_seed)
        self.dep: Deployment = build_deployment(cfg, self.streams.stream("placement"))
        dep = self.dep
        self.n = dep.n_devices
        self.n_sinks = dep.n_sinks
        if self.n > cfg.run.max_dense_devices:
            raise ValueError(f"{self.n} devices exceed run.max_dense_devices="
                             f"{cfg.run.max_dense_devices}; raise thinning or target_nodes")
        self.single_hop = sc.mode == "single-hop"

        self.mcs = get_mcs(ph.mcs)
        self.per_model = PerModel.for_mcs(self.mcs, ph.per_margin_db, ph.per_slope_per_db)
        self.tb_bits = self.mcs.tb_bits_per_slot * slots_for_payload(self.mcs, sc.payload_bytes * 8)
        self.noise_dbm = noise_floor_dbm(channel_bandwidth(ph.mu, ph.beta), ph.noise_figure_db)
        self.noise_mw = dbm_to_mw(self.noise_dbm)
        self.sensitivity = (sensitivity_dbm(self.noise_dbm, self.per_model, ph.sensitivity_per)
                            if ph.sensitivity_dbm == AUTO else float(ph.sensitivity_dbm))
        self.prune_mw = dbm_to_mw(self.noise_dbm - ph.prune_margin_db)
        self.lbt_thr_mw = dbm_to_mw(mac.lbt_threshold_dbm)

        # transmit powers
        self.calibration_loss = float("nan")
        if self.single_hop:
            if ph.single_hop_power_dbm == AUTO:
                node_p, self.calibration_loss = calibrate_single_hop_power(
                    cfg, self.streams, dep.sink_xy, self.sensitivity)
            else:
                node_p = float(ph.single_hop_power_dbm)
            sink_p = max(ph.sink_power_singlehop_dbm, node_p)
        else:
            node_p = ph.node_power_dbm
            sink_p = ph.sink_power_multihop_dbm
        self.node_power_dbm = node_p
        self.sink_power_dbm = sink_p
        power = np.where(dep.is_sink, sink_p, node_p)
        self.power_mw = dbm_to_mw(power)

        self.links = LinkModel(dep.x, dep.y, dep.height, dep.indoor, dep.is_sink,
                               ph.carrier_ghz, self.streams.key("propagation"))
        self.gain = self._build_gain_matrix(float(power.max()))

        self.topo = Topology(dep.n_sinks, dep.n_nodes, self.streams.stream("identities"),
                             sink_carriers=dep.sink_carrier, max_depth=tp.max_depth)
        self.kernel = Scheduler()
        self.registry = eng.EmissionRegistry()
        self.energy = EnergyLedger(self.n, EnergyModel(cfg.energy.pa_efficiency,
                                                       cfg.energy.tx_circuit_w,
                                                       cfg.energy.rx_listen_w,
                                                       cfg.energy.sleep_w))
        self.metrics = MetricsAccumulator(self.energy, dep.thinning, dep.is_sink)
        self.rng_mac = self.streams.stream("mac")
        self.rng_per = self.streams.stream("per")
        self.rng_topo = self.streams.stream("topology")
        self.devs = [Dev(mac.cw_min, mac.cw_max, float(power[i])) for i in range(self.n)]

        self.lbt_ticks = mac.lbt_symbols * SYMBOL_TICKS
        self.data_ticks = SLOT_TICKS * slots_for_payload(self.mcs, sc.payload_bytes * 8)
        self.watchdog = seconds_to_ticks(mac.watchdog_s)
        self.period = seconds_to_ticks(tp.beacon_period_s)
        self.timeout_ticks = mac.feedback_timeout_slots * SLOT_TICKS
        if mac.rach_subslots == "all":
            self.rach = RachConfig.everywhere(self.tb)
        else:
            allowed = {int(s) for s in mac.rach_subslots.split(",") if s.strip()}
            self.rach = RachConfig(tuple(i in allowed for i in range(self.tb.subslots_per_frame)))
        self.grids: dict[int, ClusterGrid] = {}
        self.sched_period = mac.sched_period_frames * self.tb.subslots_per_frame

        self.candidates = self._candidate_lists()
        self.reachable = self._reachable()
        self.fallback_nodes = 0
        if self.cfg.topology.bias_fallback and self.cfg.scenario.bias_db > 0:
            self.fallback_nodes = self._apply_bias_fallback()
        self.visible_from = np.zeros(self.n, dtype=np.int64)
        self.warmup_done = False
        self.topo_changes = 0
        self.messages: list[Message] = []
        self.counted_pending = 0
        self.aborted: Exception | None = None

    # ------------------------------------------------------------------ setup

    def _build_gain_matrix(self, max_power_dbm: float) -> np.ndarray:
        n = self.n
        g = np.zeros((n, n), dtype=np.float32)
        max_loss = max_power_dbm - (self.noise_dbm - self.cfg.phy.prune_margin_db)
        chunk = max(1, 1_500_000 // max(n, 1))
        for r0 in range(0, n, chunk):
            r1 = min(n, r0 + chunk)
            rows = np.arange(r0, r1)
            cols = np.arange(r0, n)
            a = np.repeat(rows, len(cols))
            b = np.tile(cols, len(rows))
            loss = self.links.coupling_loss(a, b, skip_above=max_loss + 20.0)
            blk = np.power(10.0, -loss / 10.0).astype(np.float32).reshape(len(rows), len(cols))
            g[r0:r1, r0:] = blk
            g[r0:, r0:r1] = blk.T
        np.fill_diagonal(g, 0.0)
        sinks = self.n_sinks
        g[:sinks, :sinks] = 0.0
        return g

    def _candidate_lists(self) -> list[np.ndarray]:
        """Devices whose beacons each node could hear above the bias threshold."""
        thr_mw = dbm_to_mw(self.sensitivity + self.cfg.scenario.bias_db)
        ns = self.n_sinks
        out: list[np.ndarray] = [np.empty(0, dtype=np.int64)] * ns
        cols = ns if self.single_hop else self.n
        p = self.power_mw[:cols]
        for d in range(ns, self.n):
            rx = p * self.gain[:cols, d]
            out.append(np.flatnonzero(rx >= thr_mw))
        return out

    def _apply_bias_fallback(self) -> int:
        """Give nodes cut off from every sink their sensitivity-level candidates."""
        lost = np.flatnonzero(~self.reachable[self.n_sinks:]) + self.n_sinks
        if lost.size == 0:
            return 0
        sens_mw = dbm_to_mw(self.sensitivity)
        cols = self.n_sinks if self.single_hop else self.n
        p = self.power_mw[:cols]
        for d in lost:
            self.candidates[d] = np.flatnonzero(p * self.gain[:cols, d] >= sens_mw)
        self.reachable = self._reachable()
        return int(self.reachable[lost].sum())

    def _reachable(self) -> np.ndarray:
        """Nodes that some chain of candidate parents connects to a sink.

        Depth-capped devices cannot relay, so the search stops at ``max_depth``.
        """
        ok = np.zeros(self.n, dtype=bool)
        ok[:self.n_sinks] = True
        can_relay = ok.copy()
        cap = self.cfg.topology.max_depth
        todo = list(range(self.n_sinks, self.n))
        depth = 0
        while todo:
            depth += 1
            hit = [d for d in todo if can_relay[self.candidates[d]].any()]
            if not hit:
                break
            ok[hit] = True
            if self.cfg.topology.promote_to_ft and (cap == 0 or depth < cap):
                can_relay[hit] = True
            todo = [d for d in todo if not ok[d]]
        return ok

    def reachable_fraction(self) -> float:
        nodes = self.reachable[self.n_sinks:]
        return float(nodes.mean()) if nodes.size else 1.0

    def _associated_share(self) -> float:
        """Associated nodes as a share of those that could associate at all."""
        reach = self.reachable[self.n_sinks:]
        if not reach.any():
            return 1.0
        got = self.topo.hop[self.n_sinks:] >= 0
        return float(np.count_nonzero(got & reach)) / float(np.count_nonzero(reach))

    def rssi_dbm(self, tx: int, rx: int) -> float:
        g = float(self.gain[tx, rx])
        return -math.inf if g <= 0.0 else 10.0 * math.log10(self.power_mw[tx] * g)

    # --------------------------------------------------------------- helpers

    def _rx_mw(self, tx: int, rx: int) -> float:
        return float(self.power_mw[tx]) * float(self.gain[tx, rx])

    def _carrier(self, d: int) -> int:
        c = self.topo.devices[d].carrier
        return 0 if c is None else c

    def _mark_away(self, d: int, t0: int, t1: int, carrier: int) -> None:
        """Record that ``d`` listens on ``carrier`` instead of its own during ``[t0, t1)``."""
        if carrier != self._carrier(d) and t1 > t0:
            aw = self.devs[d].away
            aw.append((t0, t1, carrier))
            horizon = t0 - 4 * SLOT_TICKS - self.watchdog
            while aw and aw[0][1] < horizon:
                aw.popleft()

    def _busy_receiving(self, rx: int, s: int, e: int, carrier: int) -> bool:
        """True if ``rx`` was not listening on ``carrier`` throughout ``[s, e)``."""
        if self.registry.by_tx(rx, s, e):
            return True
        covered = False
        for a0, a1, c in self.devs[rx].away:
            if a0 < e and a1 > s:
                if c != carrier:
                    return True
                covered = covered or (a0 <= s and a1 >= e)
        return carrier != self._carrier(rx) and not covered

    def _channel_energy(self, d: int, carrier: int, t0: int, t1: int) -> float:
        """Mean received interference power (mW, excl. noise) at ``d`` over ``[t0, t1)``."""
        s, e, tx, car = self.registry.window(t0, t1)
        m = (car == carrier) & (tx != d)
        if not m.any():
            return 0.0
        tx = tx[m]
        p = self.power_mw[tx] * self.gain[tx, d]
        ov = np.minimum(e[m], t1) - np.maximum(s[m], t0)
        keep = p >= self.prune_mw
        return float(np.dot(p[keep], ov[keep])) / (t1 - t0)

    def _resolve(self, rx: int, eid: int) -> eng.Reception:
        reg = self.registry
        s, e, tx, car = reg.start[eid], reg.end[eid], reg.tx[eid], reg.carrier[eid]
        st = self.topo.devices[rx]
        if st.silenced:
            return eng.Reception(False, LossReason.PRUNED)
        if self._busy_receiving(rx, s, e, car):
            return eng.Reception(False, LossReason.HALF_DUPLEX)
        sig = self._rx_mw(tx, rx)
        if sig < self.prune_mw:
            return eng.Reception(False, LossReason.PRUNED)
        intf = []
        for i in reg.overlapping(car, s, e, exclude=eid):
            t = reg.tx[i]
            if t == rx:
                continue
            p = self._rx_mw(t, rx)
            if p >= self.prune_mw:
                intf.append((p, reg.start[i], reg.end[i]))
        u = float(self.rng_per.random())
        return eng.resolve_reception(sig, intf, (s, e), self.noise_mw, self.per_model, u)

    # ------------------------------------------------------------- data path

    def _enqueue(self, d: int, tb: Tb) -> None:
        dev = self.devs[d]
        dev.queue.append(tb)
        if dev.harq is None:
            self._next_tb(d)

    def _next_tb(self, d: int) -> None:
        dev = self.devs[d]
        now = self.kernel.now
        while dev.queue:
            tb = dev.queue[0]
            if tb.kind == DATA and now - tb.enqueued > self.watchdog:
                dev.queue.popleft()
                self._drop_tb(d, tb, LOST_WATCHDOG)
                continue
            dev.queue.popleft()
            dev.harq = HarqProcess(tb, self.cfg.mac.max_retransmissions)
            self._request_access(d)
            return
        dev.harq = None

    def _target(self, d: int, tb: Tb) -> int:
        if tb.kind == ASSOC:
            return tb.target
        return -1 if self.topo.devices[d].parent is None else self.topo.devices[d].parent

    def _request_access(self, d: int) -> None:
        dev = self.devs[d]
        harq = dev.harq
        now = self.kernel.now
        target = self._target(d, harq.tb)
        if target < 0 or self.topo.devices[d].silenced:
            # a switched-off device holds its queue until the watchdog expires it
            self._park(d)
            return
        dev.parked = False
        start = max(now, dev.radio_free)
        if dev.fb_end > start and start + self.lbt_ticks + self.data_ticks > dev.fb_start:
            start = dev.fb_end
        if self.cfg.mac.access == "scheduled" and harq.tb.kind == DATA:
            grid = self.grids.get(target)
            if grid is not None and d in grid.allocations:
                t = grid.next_occurrence(d, start)
                self.kernel.schedule(t, EventKind.TX_START, self._on_scheduled_tx, d, harq)
                return
        b = self.rach.next_permitted(start + self.lbt_ticks, self.tb)
        self.kernel.schedule(b, EventKind.LBT, self._on_lbt, d, harq)

    def _park(self, d: int) -> None:
        dev = self.devs[d]
        dev.parked = True
        tb = dev.harq.tb
        if tb.kind == DATA:
            t = max(self.kernel.now, tb.enqueued + self.watchdog + 1)
            dev.watch_ev = self.kernel.schedule(t, EventKind.WATCHDOG, self._on_watchdog,
                                                d, dev.harq)

    def _on_watchdog(self, d: int, harq: HarqProcess) -> None:
        dev = self.devs[d]
        if dev.harq is not harq or not dev.parked:
            return
        dev.parked = False
        dev.harq = None
        self._drop_tb(d, harq.tb, LOST_WATCHDOG)
        self._next_tb(d)
        if dev.harq is None and dev.queue:
            self._next_tb(d)

    def _unpark(self, d: int) -> None:
        dev = self.devs[d]
        if dev.parked and dev.harq is not None:
            dev.parked = False
            if dev.watch_ev is not None:
                Scheduler.cancel(dev.watch_ev)
                dev.watch_ev = None
            self._request_access(d)

    def _expired(self, d: int, harq: HarqProcess) -> bool:
        tb = harq.tb
        if tb.kind == DATA and self.kernel.now - tb.enqueued > self.watchdog:
            dev = self.devs[d]
            dev.harq = None
            dev.counters.dropped_watchdog += 1
            self._drop_tb(d, tb, LOST_WATCHDOG)
            self._next_tb(d)
            return True
        return False

    def _on_lbt(self, d: int, harq: HarqProcess) -> None:
        dev = self.devs[d]
        if dev.harq is not harq or harq.state is not HarqState.WAITING_ACCESS:
            return
        if self._expired(d, harq):
            return
        now = self.kernel.now
        if dev.radio_free > now - self.lbt_ticks or self._owes_feedback(dev, now):
            self._request_access(d)
            return
        target = self._target(d, harq.tb)
        if target < 0 or self.topo.devices[d].silenced:
            self._park(d)
            return
        car = self._carrier(target)
        t0 = now - self.lbt_ticks
        self.energy.rx(d, t0, self.lbt_ticks)
        self._mark_away(d, t0, now, car)
        level = self.noise_mw + self._channel_energy(d, car, t0, now)
        if level <= self.lbt_thr_mw:
            self._transmit(d, harq, target, car)
            return
        dev.counters.busy_senses += 1
        self._backoff(d, harq)

    def _backoff(self, d: int, harq: HarqProcess) -> None:
        dev = self.devs[d]
        k = dev.lbt.on_busy(self.rng_mac)
        if k == 0:
            self._request_access(d)
            return
        dev.counters.backoffs += 1
        b = self.tb.next_subslot_boundary(self.kernel.now)
        self.kernel.schedule(b + k * self.tb.subslot_ticks, EventKind.BACKOFF,
                             self._on_backoff, d, harq, b, k)

    def _retransmit(self, d: int, harq: HarqProcess) -> None:
        """Random backoff before a HARQ retransmission on random access.

        The window doubles with each failed transmission so that hidden
        senders that collided once do not stay in lockstep.
        """
        dev = self.devs[d]
        scheduled = self.cfg.mac.access == "scheduled" and harq.tb.kind == DATA
        if scheduled or self.topo.devices[d].silenced:
            self._request_access(d)
            return
        dev.lbt.stage = harq.transmissions_done - 1
        self._backoff(d, harq)

    def _idle_subslots(self, d: int, carrier: int, t0: int, n: int) -> int:
        """Subslots in ``[t0, t0 + n)`` that ``d`` would have sensed idle."""
        if n <= 0:
            return 0
        ss = self.tb.subslot_ticks
        s, e, tx, car = self.registry.window(t0, t0 + n * ss)
        a = t0 + ss * np.arange(n, dtype=np.int64)
        own = tx == d
        busy = np.zeros(n, dtype=bool)
        if own.any():
            busy |= ((s[own, None] < a + ss) & (e[own, None] > a)).any(axis=0)
        m = (car == carrier) & ~own
        if m.any():
            txm = tx[m]
            p = self.power_mw[txm] * self.gain[txm, d]
            keep = p >= self.prune_mw
            if keep.any():
                ov = np.minimum(e[m][keep, None], a + ss) - np.maximum(s[m][keep, None], a)
                energy = p[keep] @ np.clip(ov, 0, None)
                busy |= self.noise_mw + energy / ss > self.lbt_thr_mw
        return int(n - busy.sum())

    def _on_backoff(self, d: int, harq: HarqProcess, t_from: int, remaining: int) -> None:
        dev = self.devs[d]
        if dev.harq is not harq or harq.state is not HarqState.WAITING_ACCESS:
            return
        if self._expired(d, harq):
            return
        now = self.kernel.now
        target = self._target(d, harq.tb)
        if target < 0 or self.topo.devices[d].silenced:
            self._park(d)
            return
        n = (now - t_from) // self.tb.subslot_ticks
        idle = self._idle_subslots(d, self._carrier(target), t_from, n)
        remaining -= idle
        if remaining <= 0:
            dev.lbt.pending_backoff = 0
            self._request_access(d)
        else:
            dev.lbt.pending_backoff = remaining
            self.kernel.schedule(now + remaining * self.tb.subslot_ticks, EventKind.BACKOFF,
                                 self._on_backoff, d, harq, now, remaining)

    def _on_scheduled_tx(self, d: int, harq: HarqProcess) -> None:
        dev = self.devs[d]
        if dev.harq is not harq or harq.state is not HarqState.WAITING_ACCESS:
            return
        if self._expired(d, harq):
            return
        target = self._target(d, harq.tb)
        if target < 0 or self.topo.devices[d].silenced:
            self._park(d)
            return
        grid = self.grids.get(target)
        if (dev.radio_free > self.kernel.now or self._owes_feedback(dev, self.kernel.now)
                or grid is None or d not in grid.allocations):
            self._request_access(d)
            return
        grid.consume(d)
        self._transmit(d, harq, target, grid.carrier)

    def _owes_feedback(self, dev: Dev, t: int) -> bool:
        """Would a data slot starting at ``t`` overlap a reserved feedback slot?"""
        return t < dev.fb_end and t + self.data_ticks > dev.fb_start

    def _transmit(self, d: int, harq: HarqProcess, target: int, car: int) -> None:
        dev = self.devs[d]
        now = self.kernel.now
        harq.start_transmission()
        dev.lbt.reset()
        end = now + self.data_ticks
        kind = EmissionKind.DATA if harq.tb.kind == DATA else EmissionKind.ASSOC_REQUEST
        eid = self.registry.add(d, car, now, end, kind)
        dev.radio_free = end
        dev.counters.tx_attempts += 1
        self.energy.tx(d, now, dev.tx_dbm, self.data_ticks)
        self.kernel.schedule(end, EventKind.TX_END, self._on_data_end, d, harq, target, eid)

    def _on_data_end(self, d: int, harq: HarqProcess, target: int, eid: int) -> None:
        now = self.kernel.now
        harq.transmission_complete()
        rec = self._resolve(target, eid)
        f = self.tb.next_slot_boundary(now)
        fb_end = f + SLOT_TICKS
        deadline = fb_end + self.timeout_ticks
        car = self.registry.carrier[eid]
        self._mark_away(d, now, deadline, car)
        if rec.reason is not LossReason.HALF_DUPLEX and rec.reason is not LossReason.PRUNED:
            self.energy.rx(target, self.registry.start[eid], self.data_ticks)
        if rec.decoded:
            rdev = self.devs[target]
            if fb_end > rdev.fb_end and rdev.radio_free <= f:
                rdev.fb_start, rdev.fb_end = f, fb_end
            self._on_received(target, d, harq.tb, f)
            self.kernel.schedule(f, EventKind.FEEDBACK_START, self._on_ack_start,
                                 target, d, car, harq, deadline, now)
        else:
            harq.last_failure = rec.reason
            self.kernel.schedule(deadline, EventKind.FEEDBACK_TIMEOUT, self._on_timeout,
                                 d, harq, now)

    def _on_received(self, rx: int, tx: int, tb: Tb, ack_slot: int) -> None:
        if tb.kind == ASSOC:
            self._assoc_request_received(rx, tx, ack_slot)
            return
        msg = tb.msg
        if msg.done or rx in msg.seen:
            return
        msg.seen.add(rx)
        now = self.kernel.now
        if self.topo.devices[rx].is_sink:
            # delivery counts once the sink's feedback slot has been sent
            msg.done = True
            self._resolve_message(msg, DELIVERED, tb.hop + 1, ack_slot + SLOT_TICKS)
            return
        msg.holders += 1
        self.devs[rx].counters.relayed += 1
        self._enqueue(rx, Tb(DATA, msg, now, hop=tb.hop + 1))

    def _on_ack_start(self, rx: int, d: int, car: int, harq: HarqProcess, deadline: int,
                      data_end: int) -> None:
        now = self.kernel.now
        fdev = self.devs[rx]
        if fdev.radio_free > now or self.topo.devices[rx].silenced:
            self.kernel.schedule(deadline, EventKind.FEEDBACK_TIMEOUT, self._on_timeout,
                                 d, harq, data_end)
            return
        end = now + SLOT_TICKS
        eid = self.registry.add(rx, car, now, end, EmissionKind.FEEDBACK)
        fdev.radio_free = end
        self.energy.tx(rx, now, fdev.tx_dbm, SLOT_TICKS)
        self.kernel.schedule(end, EventKind.FEEDBACK_END, self._on_ack_end, d, eid, harq,
                             deadline, data_end)

    def _on_ack_end(self, d: int, eid: int, harq: HarqProcess, deadline: int,
                    data_end: int) -> None:
        rec = self._resolve(d, eid)
        if rec.decoded:
            self.energy.rx(d, data_end, self.kernel.now - data_end)
            harq_step(harq, Feedback.ACK)
            self._tb_finished(d, harq, True)
        else:
            harq.last_failure = rec.reason
            self.kernel.schedule(deadline, EventKind.FEEDBACK_TIMEOUT, self._on_timeout,
                                 d, harq, data_end)

    def _on_timeout(self, d: int, harq: HarqProcess, data_end: int) -> None:
        dev = self.devs[d]
        if dev.harq is not harq:
            return
        self.energy.rx(d, data_end, self.kernel.now - data_end)
        state = harq_step(harq, Feedback.TIMEOUT)
        if state is HarqState.WAITING_ACCESS:
            self._retransmit(d, harq)
        else:
            dev.counters.harq_failures += 1
            self._tb_finished(d, harq, False)

    def _tb_finished(self, d: int, harq: HarqProcess, ok: bool) -> None:
        dev = self.devs[d]
        tb = harq.tb
        dev.harq = None
        if tb.kind == DATA:
            if ok:
                self._release(tb.msg, None, tb.hop)
            else:
                reason = (LOST_HALFDUPLEX if harq.last_failure is LossReason.HALF_DUPLEX
                          else LOST_HARQ)
                self._release(tb.msg, reason, tb.hop)
        elif ok:
            dev.assoc_state = "awaiting-response"
        else:
            self._assoc_failed(d)
        self._next_tb(d)

    def _drop_tb(self, d: int, tb: Tb, reason: int) -> None:
        if tb.kind == DATA:
            self._release(tb.msg, reason, tb.hop)
        else:
            self._assoc_failed(d)

    def _release(self, msg: Message, reason: int | None, hop: int) -> None:
        """Drop one copy; the message is lost once no copy is left undelivered.

        A successful hand-over (``reason`` None) can be the last release when
        the downstream copy already failed, so the stored reason is used then.
        """
        msg.holders -= 1
        if reason is not None:
            msg.lost_as, msg.lost_hop = reason, hop
        if msg.holders == 0 and not msg.done:
            if msg.lost_as is None:
                raise eng.InvariantViolation(f"message {msg.mid} has no copy and no loss")
            msg.done = True
            self._resolve_message(msg, msg.lost_as, msg.lost_hop)

    def _resolve_message(self, msg: Message, outcome: int, hops: int,
                         t: int | None = None) -> None:
        if outcome == DELIVERED:
            self.metrics.delivered(msg.mid, self.kernel.now if t is None else t, hops)
        else:
            self.metrics.lost(msg.mid, outcome, self.kernel.now, hops)
        if msg.counted:
            self.counted_pending -= 1

    # ------------------------------------------------------------ association

    def _first_scan(self, d: int) -> None:
        off = int(self.rng_topo.integers(0, self.period))
        self.kernel.schedule(self.kernel.now + off, EventKind.SCAN, self._on_scan, d)

    def _visible_candidates(self, d: int) -> np.ndarray:
        c = self.candidates[d]
        if c.size == 0:
            return c
        topo = self.topo
        now = self.kernel.now
        ok = topo.is_ft[c] & (topo.hop[c] >= 0) & (self.visible_from[c] <= now)
        return c[ok]

    def _best(self, d: int, cands: np.ndarray, exclude_subtree: bool) -> int:
        """Fewest hops, then strongest RSSI, then smallest long ID."""
        topo = self.topo
        if exclude_subtree:
            sub = topo.descendants(d)
            sub.append(d)
            cands = cands[~np.isin(cands, sub)]
        if cands.size == 0:
            return -1
        hops = topo.hop[cands]
        cands = cands[hops == hops.min()]
        rx = self.power_mw[cands] * self.gain[cands, d].astype(float)
        order = np.lexsort((topo.long_ids[cands], -rx))
        return int(cands[order[0]])

    def _on_scan(self, d: int) -> None:
        dev = self.devs[d]
        st = self.topo.devices[d]
        if st.silenced:
            return
        if dev.assoc_state is not None:
            if self.kernel.now < dev.assoc_deadline:
                self._schedule_scan(d)
                return
            dev.assoc_state = None
        cands = self._visible_candidates(d)
        if st.parent is None:
            best = self._best(d, cands, exclude_subtree=bool(st.children))
            if best >= 0:
                self._start_association(d, best)
        elif not self.warmup_done:
            best = self._best(d, cands, exclude_subtree=True)
            if best >= 0 and best != st.parent:
                cur_hop = self.topo.devices[st.parent].hop_count
                new = self.topo.emit_beacon(best, self.sensitivity, self.cfg.scenario.bias_db)
                pick = choose_reselection(cur_hop, self.rssi_dbm(st.parent, d),
                                          [(new, self.rssi_dbm(best, d))],
                                          ReselectTrigger.BETTER_CANDIDATE,
                                          self.cfg.topology.hysteresis_db)
                if pick is not None:
                    self._start_association(d, best)
        self._schedule_scan(d)

    def _schedule_scan(self, d: int) -> None:
        st = self.topo.devices[d]
        if self.warmup_done and st.parent is not None:
            return
        self.kernel.schedule(self.kernel.now + self.period, EventKind.SCAN, self._on_scan, d)

    def _start_association(self, d: int, ft: int) -> None:
        dev = self.devs[d]
        dev.assoc_state = "requesting"
        dev.assoc_target = ft
        dev.assoc_deadline = self.kernel.now + self.period * 4
        tb = Tb(ASSOC, None, self.kernel.now, target=ft)
        if dev.harq is None:
            dev.queue.appendleft(tb)
            self._next_tb(d)
        else:
            dev.queue.appendleft(tb)

    def _assoc_request_received(self, ft: int, child: int, ack_slot: int) -> None:
        t = ack_slot + SLOT_TICKS
        self.kernel.schedule(t, EventKind.ASSOC_RESPONSE, self._on_assoc_response, ft, child)

    def _on_assoc_response(self, ft: int, child: int) -> None:
        now = self.kernel.now
        fdev = self.devs[ft]
        cdev = self.devs[child]
        st = self.topo.devices[ft]
        if (fdev.radio_free > now or Mode.FT not in st.mode or st.silenced
                or cdev.assoc_target != ft or cdev.assoc_state is None):
            return
        car = self._carrier(ft)
        end = now + SLOT_TICKS
        eid = self.registry.add(ft, car, now, end, EmissionKind.ASSOC_RESPONSE)
        fdev.radio_free = end
        self.energy.tx(ft, now, fdev.tx_dbm, SLOT_TICKS)
        self._mark_away(child, now, end, car)
        self.kernel.schedule(end, EventKind.ASSOC_RESPONSE, self._on_assoc_response_end,
                             ft, child, eid)

    def _on_assoc_response_end(self, ft: int, child: int, eid: int) -> None:
        cdev = self.devs[child]
        if cdev.assoc_target != ft or cdev.assoc_state is None:
            return
        rec = self._resolve(child, eid)
        if not rec.decoded:
            self._assoc_failed(child)
            return
        self._complete_association(child, ft)

    def _complete_association(self, child: int, ft: int) -> None:
        topo = self.topo
        cdev = self.devs[child]
        old = topo.devices[child].parent
        try:
            topo.associate(child, ft, self.kernel.now)
        except AssociationFailed:
            self._assoc_failed(child)
            return
        cdev.assoc_state = None
        cdev.assoc_target = -1
        self.topo_changes += 1
        if old is not None and old in self.grids:
            self.grids[old].release(child)
        if self.cfg.mac.access == "scheduled":
            self._allocate(child, ft)
        st = topo.devices[child]
        if (not self.single_hop and self.cfg.topology.promote_to_ft
                and Mode.FT not in st.mode and topo.can_promote(child)):
            topo.promote_to_ft(child, self._channel_rssi(child), tie_rng=self.rng_topo)
            self.visible_from[child] = self.kernel.now + int(self.rng_topo.integers(1, self.period + 1))
        self._unpark(child)

    def _assoc_failed(self, d: int) -> None:
        dev = self.devs[d]
        dev.assoc_state = None
        dev.assoc_target = -1

    def _channel_rssi(self, d: int) -> np.ndarray:
        """Beacon-based RSSI-1 estimate (dBm) per configured channel at ``d``."""
        nch = self.cfg.scenario.channels
        ft = np.flatnonzero(self.topo.is_ft)
        rx = self.power_mw[ft] * self.gain[ft, d].astype(float)
        keep = rx >= self.prune_mw
        per = np.bincount(self.topo.carrier_arr[ft[keep]], weights=rx[keep], minlength=nch)[:nch]
        return 10.0 * np.log10(self.noise_mw + per)

    def _allocate(self, child: int, ft: int) -> None:
        grid = self.grids.get(ft)
        if grid is None:
            grid = ClusterGrid(ft, self._carrier(ft), self.sched_period, self.tb)
            self.grids[ft] = grid
        spp = self.tb.subslots_per_slot
        try:
            grid.reserve(child, 2 * spp, validity=Validity.PERMANENT, align=spp)
        except NoCapacity:
            self.devs[child].counters.extra["no_capacity"] = 1

    # --------------------------------------------------------- fault handling

    def silence(self, d: int) -> None:
        """Switch a device off; its children notice after the beacon-miss limit."""
        topo = self.topo
        st = topo.devices[d]
        st.silenced = True
        st.mode = Mode.NONE
        topo.is_ft[d] = False
        miss = self.cfg.topology.beacon_miss_limit * self.period
        for c in sorted(st.children):
            self.kernel.schedule(self.kernel.now + miss, EventKind.CONTROL,
                                 self._on_parent_loss, c, d)

    def _on_parent_loss(self, d: int, parent: int) -> None:
        st = self.topo.devices[d]
        if st.parent != parent:
            return
        self.topo.disassociate(d)
        self.topo_changes += 1
        if parent in self.grids:
            self.grids[parent].release(d)
        self.devs[d].lost_parent_at = self.kernel.now
        self.kernel.schedule(self.kernel.now, EventKind.SCAN, self._on_scan, d)

    # ---------------------------------------------------------------- phases

    def _audit(self) -> None:
        rep = eng.snapshot_audit(self.kernel.now, self.topo,
                                 (dv.harq for dv in self.devs), self.grids.values(),
                                 self.cfg.mac.max_retransmissions + 1)
        rep.raise_if_failed()
        every = seconds_to_ticks(self.cfg.run.audit_every_s)
        self.kernel.schedule(self.kernel.now + every, EventKind.AUDIT, self._audit)

    def _warmup_check(self, state: dict) -> None:
        now = self.kernel.now
        frac = self._associated_share()
        busy = any(dv.assoc_state is not None for dv in self.devs)
        quiet = self.topo_changes == state["changes"]
        state["changes"] = self.topo_changes
        enough = frac >= self.cfg.run.min_associated_fraction
        if enough and quiet and not busy and now >= 2 * self.period:
            state["done"] = True
            return
        if now >= seconds_to_ticks(self.cfg.run.warmup_max_s):
            if enough:
                state["done"] = True
                state["forced"] = True
                return
            raise TopologyFailure(f"only {frac:.3f} of reachable nodes associated after warm-up")
        self.kernel.schedule(now + self.period, EventKind.CONTROL, self._warmup_check, state)

    def warm_up(self) -> dict:
        reach = self.reachable_fraction()
        if reach < self.cfg.run.min_associated_fraction:
            raise TopologyFailure(f"only {reach:.3f} of nodes can reach a sink")
        for s in range(self.n_sinks):
            self.visible_from[s] = int(self.rng_topo.integers(0, self.period))
        for d in range(self.n_sinks, self.n):
            self._first_scan(d)
        if self.cfg.run.audit_every_s > 0:
            self.kernel.schedule(seconds_to_ticks(self.cfg.run.audit_every_s), EventKind.AUDIT,
                                 self._audit)
        state = {"changes": -1, "done": False, "forced": False}
        self.kernel.schedule(self.period, EventKind.CONTROL, self._warmup_check, state)
        limit = seconds_to_ticks(self.cfg.run.warmup_max_s) + self.period
        self.kernel.run_until(limit, stop=lambda: state["done"])
        if not state["done"]:
            raise TopologyFailure("warm-up did not terminate")
        self.warmup_done = True
        if self.cfg.energy.listen_policy == "continuous-ft":
            ft_nodes = self.topo.is_ft & ~self.dep.is_sink
            self.energy.baseline_w[ft_nodes] = self.cfg.energy.rx_listen_w
        return {"warmup_s": self.kernel.now / TICKS_PER_SECOND, "forced": state["forced"],
                "associated": self.topo.associated_fraction(),
                "reachable": self.reachable_fraction(),
                "fallback_nodes": self.fallback_nodes}

    def traffic_duration(self) -> float:
        run, sc = self.cfg.run, self.cfg.scenario
        if run.target_messages > 0:
            rate = self.dep.n_nodes * self.dep.thinning / sc.traffic_interval_s
            return run.target_messages / rate
        return run.sim_duration_s

    def _on_arrival(self, arr, i: int, t_end: int) -> None:
        now = self.kernel.now
        origin = int(arr.nodes[i])
        counted = now < t_end
        mid = self.metrics.new_message(origin, now, self.cfg.scenario.payload_bytes * 8)
        msg = Message(mid, origin, counted)
        if counted:
            self.counted_pending += 1
        self._enqueue(origin, Tb(DATA, msg, now))
        j = i + 1
        if j < len(arr):
            self.kernel.schedule(max(now, self._ticks[j]), EventKind.TRAFFIC_ARRIVAL,
                                 self._on_arrival, arr, j, t_end)

    def run_traffic(self) -> tuple[int, int]:
        t0 = self.tb.next_slot_boundary(self.kernel.now)
        dur = self.traffic_duration()
        t_end = t0 + seconds_to_ticks(dur)
        tail = 0.1 * dur
        arr = generate_traffic(self.dep, dur + tail, self.streams.stream("traffic"),
                               self.cfg.scenario.traffic_interval_s, t0 / TICKS_PER_SECOND)
        self._ticks = np.rint(arr.times * TICKS_PER_SECOND).astype(np.int64).tolist()
        if len(arr):
            self.kernel.schedule(max(t0, self._ticks[0]), EventKind.TRAFFIC_ARRIVAL,
                                 self._on_arrival, arr, 0, t_end)
        self.kernel.run_until(t_end)
        guard = t_end + seconds_to_ticks(dur + tail) + 50 * self.watchdog
        self.kernel.run_until(guard, stop=lambda: self.counted_pending == 0)
        if self.counted_pending:
            raise RuntimeError(f"{self.counted_pending} messages unresolved at run end")
        return t0, t_end

    # -------------------------------------------------------------- analysis

    def analyse(self, t0: int, t_end: int) -> dict[str, Any]:
        run = self.cfg.run
        tbl = self.metrics.table()
        counted = (tbl.gen >= t0) & (tbl.gen < t_end)
        nw = run.steady_windows
        edges = np.linspace(t0, t_end, nw + 1).astype(np.int64)
        lat_series = np.full(nw, np.nan)
        plr_series = np.full(nw, np.nan)
        for k in range(nw):
            m = counted & (tbl.gen >= edges[k]) & (tbl.gen < edges[k + 1])
            if m.any():
                ok = tbl.outcome[m] == DELIVERED
                plr_series[k] = 1.0 - ok.mean()
                if ok.any():
                    lat_series[k] = float(np.mean((tbl.done[m] - tbl.gen[m])[ok]))
        steady_mode = run.warmup_policy
        t_ss = t0
        if run.warmup_policy in ("detect", "detect-or-fixed"):
            try:
                starts = [detect_steady_state(s, edges[:-1], run.steady_ma_windows, run.steady_eps)
                          for s in (lat_series, plr_series)]
                t_ss = int(max(starts))
                steady_mode = "detected"
            except (NotConverged, ValueError):
                if run.warmup_policy == "detect":
                    raise NotConverged("steady state not reached") from None
                steady_mode = "fixed-fallback"
                t_ss = int(t0 + run.fixed_warmup_fraction * (t_end - t0))
        elif run.warmup_policy == "fixed":
            t_ss = int(t0 + run.fixed_warmup_fraction * (t_end - t0))
        t_ss = int(min(t_ss, t0 + 0.5 * (t_end - t0)))
        window = (t_ss, t_end)
        m = (tbl.gen >= t_ss) & (tbl.gen < t_end)
        oc = tbl.outcome[m]
        if np.any(oc == PENDING):
            raise RuntimeError("unresolved messages in the measurement window")
        generated = int(m.sum())
        delivered = int((oc == DELIVERED).sum())
        losses = {"loss_harq": int((oc == LOST_HARQ).sum()),
                  "loss_watchdog": int((oc == LOST_WATCHDOG).sum()),
                  "loss_halfduplex": int((oc == LOST_HALFDUPLEX).sum())}
        if generated != delivered + sum(losses.values()):
            raise RuntimeError("message conservation violated")
        order = np.argsort(tbl.gen[m], kind="stable")
        lost_ind = (oc[order] != DELIVERED).astype(float)
        plr_val = float(lost_ind.mean()) if generated else float("nan")
        plr_ci = _half_width(lambda: batch_statistic(lost_ind, run.n_batches))
        dl = m & (tbl.outcome == DELIVERED)
        lat = (tbl.done[dl] - tbl.gen[dl]) / TICKS_PER_SECOND
        lat_order = np.argsort(tbl.gen[dl], kind="stable")
        lat = lat[lat_order]
        p99 = nearest_rank(lat, 0.99) if lat.size else float("nan")
        lat_ci = _half_width(lambda: batch_statistic(lat, run.n_batches,
                                                     lambda b: nearest_rank(b, 0.99)))
        eff, eff_ci = self._efficiency(tbl, window, run.n_batches)
        hops = tbl.hops[dl]
        return {"plr": plr_val, "plr_ci": plr_ci,
                "latency_p99_ms": p99 * 1e3, "latency_ci": lat_ci * 1e3,
                "energy_eff_mbit_per_j": eff, "energy_ci": eff_ci,
                **losses, "generated": generated, "delivered": delivered,
                "sim_hours": (t_end - t0) / TICKS_PER_SECOND / 3600.0,
                "_steady_start_s": t_ss / TICKS_PER_SECOND,
                "_steady_mode": steady_mode,
                "_mean_hops": float(hops.mean()) if hops.size else float("nan"),
                "_lat_mean_ms": float(lat.mean() * 1e3) if lat.size else float("nan")}

    def _efficiency(self, tbl, window, n_batches) -> tuple[float, float]:
        t0, t1 = window
        nonsink = ~self.dep.is_sink
        scale = self.dep.thinning
        led = self.energy

        def eff(a, b):
            m = (tbl.gen >= a) & (tbl.gen < b) & (tbl.outcome == DELIVERED)
            bits = float(tbl.bits[m].sum())
            if bits == 0:
                return 0.0
            return bits / 1e6 / led.total((a, b), nonsink, scale)

        total = eff(t0, t1)
        edges = np.linspace(t0, t1, n_batches + 1).astype(np.int64)
        vals = np.array([eff(edges[k], edges[k + 1]) for k in range(n_batches)])
        hw = _t_half_width(vals, 0.95) if len(vals) >= 2 else float("nan")
        return total, hw

    def device_stats(self) -> dict[str, np.ndarray]:
        per = self.energy.log()
        tx = np.bincount(per["device"][per["kind"] == 0], weights=per["joules"][per["kind"] == 0],
                         minlength=self.n)
        rx = np.bincount(per["device"][per["kind"] == 1], weights=per["joules"][per["kind"] == 1],
                         minlength=self.n)
        c = [dv.counters for dv in self.devs]
        return {
            "device": np.arange(self.n),
            "is_sink": self.dep.is_sink.astype(int),
            "hop": self.topo.hop.copy(),
            "carrier": self.topo.carrier_arr.copy(),
            "tx_attempts": np.array([x.tx_attempts for x in c]),
            "busy_senses": np.array([x.busy_senses for x in c]),
            "backoffs": np.array([x.backoffs for x in c]),
            "harq_failures": np.array([x.harq_failures for x in c]),
            "relayed": np.array([x.relayed for x in c]),
            "dropped_watchdog": np.array([x.dropped_watchdog for x in c]),
            "tx_energy_j": tx,
            "rx_energy_j": rx,
        }

    def topology_rows(self) -> list[tuple]:
        rows = []
        dep = self.dep
        x, y, ind = dep.x, dep.y, dep.indoor
        for st in self.topo.devices:
            rows.append((st.index, st.long_rd_id, st.short_rd_id, int(st.is_sink),
                         int(Mode.FT in st.mode), -1 if st.parent is None else st.parent,
                         -1 if st.hop_count is None else st.hop_count,
                         -1 if st.carrier is None else st.carrier,
                         float(x[st.index]), float(y[st.index]), int(ind[st.index])))
        return rows

    def run(self) -> RunResult:
        wall0 = _time.perf_counter()
        wu = self.warm_up()
        t0, t_end = self.run_traffic()
        res = self.analyse(t0, t_end)
        wall = _time.perf_counter() - wall0
        metrics = {k: v for k, v in res.items() if not k.startswith("_")}
        metrics["wall_seconds"] = 0.0 if self.cfg.run.reproducible else wall
        details = {k[1:]: v for k, v in res.items() if k.startswith("_")}
        details.update(wu)
        details.update({
            "n_nodes": self.dep.n_nodes, "n_sinks": self.n_sinks,
            "nominal_nodes": self.dep.nominal_nodes, "thinning": self.dep.thinning,
            "area_km2": self.dep.area_km2,
            "node_power_dbm": self.node_power_dbm, "sink_power_dbm": self.sink_power_dbm,
            "sensitivity_dbm": self.sensitivity, "noise_dbm": self.noise_dbm,
            "calibration_loss_db": self.calibration_loss,
            "events": self.kernel.processed, "emissions": len(self.registry),
            "max_hop": int(self.topo.hop.max()),
            "traffic_start_s": t0 / TICKS_PER_SECOND,
        })
        return RunResult(self.cfg, metrics, details, self.device_stats(), self.topology_rows())


def _half_width(fn) -> float:
    try:
        bm: BatchMeans = fn()
    except (InsufficientSamples, NoData, ValueError):
        return float("nan")
    return bm.half_width


def run_simulation(cfg: RunConfig) -> RunResult:
    return Simulation(cfg).run()
