"""Deployment geometry, traffic, the energy model and output statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .numerology import TICKS_PER_SECOND

SQRT3 = math.sqrt(3.0)


class ConfigError(ValueError):
    pass


class NoData(ValueError):
    pass


class NotConverged(RuntimeError):
    pass


class InsufficientSamples(ValueError):
    pass


# --------------------------------------------------------------------------
# geometry


def hex_sites(n_sites: int, isd: float) -> np.ndarray:
    """Site coordinates of a 1-, 7- or 19-site hexagonal layout, centre first."""
    if n_sites not in (1, 7, 19):
        raise ConfigError(f"site count {n_sites} not in (1, 7, 19)")
    pts = [(0.0, 0.0)]
    if n_sites >= 7:
        for k in range(6):
            a = math.radians(60 * k)
            pts.append((isd * math.cos(a), isd * math.sin(a)))
    if n_sites == 19:
        for k in range(6):
            a = math.radians(60 * k)
            pts.append((2 * isd * math.cos(a), 2 * isd * math.sin(a)))
            b = math.radians(60 * k + 30)
            pts.append((SQRT3 * isd * math.cos(b), SQRT3 * isd * math.sin(b)))
    return np.array(pts)


def cell_area(isd: float) -> float:
    """Area of one hexagonal cell (apothem ``isd / 2``) in m^2."""
    return SQRT3 / 2.0 * isd * isd


def in_hexagon(dx, dy, isd: float) -> np.ndarray:
    """Points inside a cell whose flat sides face the neighbouring sites."""
    a = isd / 2.0
    ok = np.abs(dx) <= a
    for ang in (60.0, 120.0):
        t = math.radians(ang)
        ok &= np.abs(dx * math.cos(t) + dy * math.sin(t)) <= a
    return ok


def reuse3_colour(sites: np.ndarray, isd: float) -> np.ndarray:
    """Proper 3-colouring of the hex lattice (centre site gets 0)."""
    r = np.rint(sites[:, 1] / (isd * SQRT3 / 2.0)).astype(np.int64)
    q = np.rint((sites[:, 0] - r * isd / 2.0) / isd).astype(np.int64)
    return (q - r) % 3


@dataclass
class Deployment:
    sites: np.ndarray
    sink_xy: np.ndarray
    sink_site: np.ndarray
    sink_carrier: np.ndarray
    sink_height: float
    node_xy: np.ndarray
    node_indoor: np.ndarray
    node_height: float
    area_km2: float
    region: str
    nominal_nodes: int
    thinning: float = 1.0
    isd: float = 500.0

    @property
    def n_sinks(self) -> int:
        return len(self.sink_xy)

    @property
    def n_nodes(self) -> int:
        return len(self.node_xy)

    @property
    def n_devices(self) -> int:
        return self.n_sinks + self.n_nodes

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.sink_xy[:, 0], self.node_xy[:, 0]])

    @property
    def y(self) -> np.ndarray:
        return np.concatenate([self.sink_xy[:, 1], self.node_xy[:, 1]])

    @property
    def height(self) -> np.ndarray:
        return np.concatenate([np.full(self.n_sinks, self.sink_height),
                               np.full(self.n_nodes, self.node_height)])

    @property
    def indoor(self) -> np.ndarray:
        return np.concatenate([np.zeros(self.n_sinks, bool), self.node_indoor])

    @property
    def is_sink(self) -> np.ndarray:
        return np.arange(self.n_devices) < self.n_sinks


def _drop_hex(rng, sites, isd, n):
    out = np.empty((n, 2))
    got = 0
    R = isd / SQRT3
    while got < n:
        m = int((n - got) * 1.4) + 16
        cell = rng.integers(0, len(sites), m)
        dx = rng.uniform(-R, R, m)
        dy = rng.uniform(-isd / 2, isd / 2, m)
        keep = in_hexagon(dx, dy, isd)
        pts = sites[cell[keep]] + np.column_stack([dx[keep], dy[keep]])
        take = min(len(pts), n - got)
        out[got:got + take] = pts[:take]
        got += take
    return out


def _drop_disc(rng, centre, radius, n):
    r = radius * np.sqrt(rng.random(n))
    th = rng.uniform(0.0, 2 * np.pi, n)
    return centre + np.column_stack([r * np.cos(th), r * np.sin(th)])


def build_deployment(config, rng: np.random.Generator) -> Deployment:
    """Hex sites, co-located (or ring-offset) sinks and a uniform node drop.

    ``config`` is a :class:`~dectsim.config.RunConfig`. With ``node_area_km2``
    set, nodes are confined to a disc of that area around the centre site.
    ``target_nodes`` (or ``thinning``) simulates a subset of the nominal node
    population; callers scale per-node traffic by ``Deployment.thinning``.
    """
    sc = config.scenario
    if not sc.density_per_km2 > 0:
        raise ConfigError(f"density_per_km2 must be > 0 (got {sc.density_per_km2})")
    isd = sc.isd_m
    sites = hex_sites(sc.area_scale, isd)
    k = len(sites)
    per = sc.sinks_per_site
    if sc.sink_placement == "co-located":
        sink_xy = np.repeat(sites, per, axis=0)
    else:
        off = np.array([[math.cos(math.radians(90 + 120 * j)), math.sin(math.radians(90 + 120 * j))]
                        for j in range(per)]) * sc.sink_offset_m
        sink_xy = (sites[:, None, :] + off[None, :, :]).reshape(-1, 2)
    sink_site = np.repeat(np.arange(k), per)
    if sc.channels == 1:
        carrier = np.zeros(k * per, dtype=np.int64)
    elif sc.channel_pattern == "per-site":
        carrier = np.repeat(reuse3_colour(sites, isd), per)
    else:
        carrier = np.tile(np.arange(per) % sc.channels, k)

    if sc.node_area_km2 > 0:
        area_km2 = sc.node_area_km2
        region = "disc"
    else:
        area_km2 = k * cell_area(isd) / 1e6
        region = "hex"
    nominal = int(round(sc.density_per_km2 * area_km2))
    thinning = float(sc.thinning)
    if sc.target_nodes > 0:
        thinning = max(thinning, nominal / sc.target_nodes)
    n = int(round(nominal / thinning)) if thinning > 1 else nominal
    n = max(n, 1)
    if region == "disc":
        xy = _drop_disc(rng, sites[0], math.sqrt(area_km2 * 1e6 / math.pi), n)
    else:
        xy = _drop_hex(rng, sites, isd, n)
    indoor = rng.random(n) < sc.indoor_fraction
    return Deployment(sites, sink_xy, sink_site, carrier, sc.sink_height_m, xy, indoor,
                      sc.node_height_m, area_km2, region, nominal, thinning, isd)


# --------------------------------------------------------------------------
# traffic


@dataclass
class Arrivals:
    times: np.ndarray      # seconds, sorted
    nodes: np.ndarray      # device indices

    def __len__(self):
        return len(self.times)


def generate_traffic(deployment: Deployment, duration: float, rng: np.random.Generator,
                     interval_s: float = 7200.0, t0: float = 0.0) -> Arrivals:
    """Superposed per-node Poisson arrivals over ``[t0, t0 + duration)``.

    Each simulated node has rate ``thinning / interval_s``; drawing the total
    count, uniform times and uniform owners is equivalent to independent
    per-node processes. Sinks never originate traffic.
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    n = deployment.n_nodes
    lam = deployment.thinning / interval_s
    count = int(rng.poisson(n * lam * duration))
    times = np.sort(rng.uniform(t0, t0 + duration, count))
    nodes = rng.integers(0, n, count) + deployment.n_sinks
    return Arrivals(times, nodes)


# --------------------------------------------------------------------------
# energy


@dataclass(frozen=True)
class EnergyModel:
    pa_efficiency: float = 0.2
    tx_circuit_w: float = 0.010
    rx_listen_w: float = 0.005
    sleep_w: float = 1e-5

    def __post_init__(self):
        for k in ("pa_efficiency", "tx_circuit_w", "rx_listen_w", "sleep_w"):
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be positive")

    def tx_power_w(self, tx_dbm: float) -> float:
        return 10.0 ** (tx_dbm / 10.0) / 1000.0 / self.pa_efficiency + self.tx_circuit_w

    def tx_energy(self, tx_dbm: float, seconds: float) -> float:
        return self.tx_power_w(tx_dbm) * seconds

    def rx_energy(self, seconds: float) -> float:
        return self.rx_listen_w * seconds


TX, RX = 0, 1


class EnergyLedger:
    """Append-only per-event energy log with per-device aggregation.

    Idle time is charged at a per-device baseline power (sleep by default)
    when a window total is requested.
    """

    def __init__(self, n_devices: int, model: EnergyModel):
        self.model = model
        self.n = n_devices
        self._t: list[int] = []
        self._dev: list[int] = []
        self._kind: list[int] = []
        self._dur: list[int] = []
        self._j: list[float] = []
        self.baseline_w = np.full(n_devices, model.sleep_w)
        self._tx_w: dict[float, float] = {}

    def __len__(self):
        return len(self._t)

    def tx(self, dev: int, t: int, dbm: float, ticks: int) -> float:
        w = self._tx_w.get(dbm)
        if w is None:
            w = self._tx_w[dbm] = self.model.tx_power_w(dbm)
        j = w * ticks / TICKS_PER_SECOND
        self._append(dev, t, TX, ticks, j)
        return j

    def rx(self, dev: int, t: int, ticks: int) -> float:
        if ticks <= 0:
            return 0.0
        j = self.model.rx_listen_w * ticks / TICKS_PER_SECOND
        self._append(dev, t, RX, ticks, j)
        return j

    def _append(self, dev, t, kind, ticks, j):
        self._t.append(t)
        self._dev.append(dev)
        self._kind.append(kind)
        self._dur.append(ticks)
        self._j.append(j)

    def log(self) -> dict[str, np.ndarray]:
        return {"time": np.asarray(self._t, dtype=np.int64),
                "device": np.asarray(self._dev, dtype=np.int64),
                "kind": np.asarray(self._kind, dtype=np.int8),
                "ticks": np.asarray(self._dur, dtype=np.int64),
                "joules": np.asarray(self._j, dtype=float)}

    def per_device(self, window: tuple[int, int] | None = None) -> np.ndarray:
        lg = self.log()
        m = _in_window(lg["time"], window)
        return np.bincount(lg["device"][m], weights=lg["joules"][m], minlength=self.n)

    def total(self, window: tuple[int, int], devices: np.ndarray, scale: float = 1.0) -> float:
        """Energy of ``devices`` (bool mask) over ``window`` including idle baseline.

        ``scale`` multiplies the baseline population, so a thinned run still
        charges idle energy for every nominal device.
        """
        t0, t1 = window
        lg = self.log()
        m = _in_window(lg["time"], window) & devices[lg["device"]]
        active = float(lg["joules"][m].sum())
        busy_s = np.bincount(lg["device"][m], weights=lg["ticks"][m],
                             minlength=self.n) / TICKS_PER_SECOND
        span = (t1 - t0) / TICKS_PER_SECOND
        base = self.baseline_w[devices]
        idle = scale * span * float(base.sum()) - float((base * busy_s[devices]).sum())
        return active + idle


def _in_window(t, window):
    if window is None:
        return np.ones(len(t), dtype=bool)
    return (t >= window[0]) & (t < window[1])


# --------------------------------------------------------------------------
# per-message accounting

PENDING, DELIVERED, LOST_HARQ, LOST_WATCHDOG, LOST_HALFDUPLEX = range(5)
OUTCOME_NAMES = {DELIVERED: "delivered", LOST_HARQ: "loss_harq",
                 LOST_WATCHDOG: "loss_watchdog", LOST_HALFDUPLEX: "loss_halfduplex"}


@dataclass
class MessageTable:
    origin: np.ndarray
    gen: np.ndarray
    done: np.ndarray
    outcome: np.ndarray
    hops: np.ndarray
    bits: np.ndarray


class MetricsAccumulator:
    """Per-message outcomes plus the energy ledger of one run."""

    def __init__(self, energy: EnergyLedger | None = None, thinning: float = 1.0,
                 sinks: np.ndarray | None = None):
        self.energy = energy
        self.thinning = thinning
        self.sinks = sinks
        self._origin: list[int] = []
        self._gen: list[int] = []
        self._done: list[int] = []
        self._outcome: list[int] = []
        self._hops: list[int] = []
        self._bits: list[int] = []
        self.pending = 0

    def __len__(self):
        return len(self._gen)

    def new_message(self, origin: int, t: int, bits: int) -> int:
        self._origin.append(origin)
        self._gen.append(t)
        self._done.append(-1)
        self._outcome.append(PENDING)
        self._hops.append(0)
        self._bits.append(bits)
        self.pending += 1
        return len(self._gen) - 1

    def _close(self, mid: int, t: int, outcome: int, hops: int) -> None:
        if self._outcome[mid] != PENDING:
            raise RuntimeError(f"message {mid} resolved twice")
        self._outcome[mid] = outcome
        self._done[mid] = t
        self._hops[mid] = hops
        self.pending -= 1

    def delivered(self, mid: int, t: int, hops: int) -> None:
        self._close(mid, t, DELIVERED, hops)

    def lost(self, mid: int, outcome: int, t: int, hops: int = 0) -> None:
        if outcome not in (LOST_HARQ, LOST_WATCHDOG, LOST_HALFDUPLEX):
            raise ValueError(f"not a loss outcome: {outcome}")
        self._close(mid, t, outcome, hops)

    def table(self) -> MessageTable:
        return MessageTable(np.asarray(self._origin, dtype=np.int64),
                            np.asarray(self._gen, dtype=np.int64),
                            np.asarray(self._done, dtype=np.int64),
                            np.asarray(self._outcome, dtype=np.int8),
                            np.asarray(self._hops, dtype=np.int64),
                            np.asarray(self._bits, dtype=np.int64))

    def counts(self, window: tuple[int, int] | None = None) -> dict[str, int]:
        tb = self.table()
        m = _in_window(tb.gen, window)
        oc = tb.outcome[m]
        out = {"generated": int(m.sum()), "pending": int((oc == PENDING).sum())}
        for k, name in OUTCOME_NAMES.items():
            out[name] = int((oc == k).sum())
        return out


def _resolved(acc: MetricsAccumulator, window):
    tb = acc.table()
    m = _in_window(tb.gen, window) & (tb.outcome != PENDING)
    return tb, m


def plr(acc: MetricsAccumulator, window: tuple[int, int] | None = None) -> float:
    """Fraction of resolved messages generated in ``window`` that were lost."""
    tb, m = _resolved(acc, window)
    n = int(m.sum())
    if n == 0:
        raise NoData("no resolved messages in window")
    return float((tb.outcome[m] != DELIVERED).sum()) / n


def nearest_rank(values: np.ndarray, p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    v = np.sort(np.asarray(values))
    if v.size == 0:
        raise NoData("no samples")
    rank = max(1, math.ceil(round(p * v.size, 9)))
    return float(v[rank - 1])


def latency_percentile(acc: MetricsAccumulator, p: float,
                       window: tuple[int, int] | None = None) -> float:
    """Nearest-rank ``p`` quantile of delivered end-to-end latency (seconds)."""
    tb, m = _resolved(acc, window)
    m &= tb.outcome == DELIVERED
    if not m.any():
        raise NoData("no delivered messages in window")
    return nearest_rank((tb.done[m] - tb.gen[m]) / TICKS_PER_SECOND, p)


def energy_efficiency(acc: MetricsAccumulator, window: tuple[int, int] | None = None) -> float:
    """Delivered application Mbit per joule spent by non-sink devices."""
    tb, m = _resolved(acc, window)
    bits = float(tb.bits[m & (tb.outcome == DELIVERED)].sum())
    if bits == 0:
        return 0.0
    if window is None:
        window = (int(tb.gen.min()), int(max(tb.done.max(), tb.gen.max()) + 1))
    devices = ~acc.sinks if acc.sinks is not None else np.ones(acc.energy.n, dtype=bool)
    e = acc.energy.total(window, devices, acc.thinning)
    if not e > 0:
        raise ValueError("total energy must be positive")
    return bits / 1e6 / e


# --------------------------------------------------------------------------
# output analysis


def moving_average(series: Sequence[float], w: int) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if len(x) < w:
        return np.array([])
    c = np.convolve(x, np.ones(w) / w, mode="valid")
    return c


def detect_steady_state(series: Sequence[float], times: Sequence[float] | None = None,
                        windows: int = 5, eps: float = 0.05) -> float:
    """Start time of steady state from a windowed metric series.

    The moving average over ``windows`` consecutive values is tracked; steady
    state is declared at the first pair of consecutive moving averages that
    differ by less than ``eps`` (relative); the returned time is that of the
    last window in the earlier average, so a constant series is steady from
    the first full averaging window. Without ``times`` the window index is
    returned.
    """
    x = np.asarray(series, dtype=float)
    if len(x) < windows + 1:
        raise ValueError(f"need at least {windows + 1} windows, got {len(x)}")
    t = np.arange(len(x), dtype=float) if times is None else np.asarray(times, dtype=float)
    ma = moving_average(x, windows)
    for j in range(1, len(ma)):
        prev, cur = ma[j - 1], ma[j]
        if not (np.isfinite(prev) and np.isfinite(cur)):
            continue
        if prev == 0.0:
            ok = cur == 0.0
        else:
            ok = abs(cur - prev) < eps * abs(prev)
        if ok:
            return float(t[j + windows - 2])
    raise NotConverged("moving average never settled")


@dataclass(frozen=True)
class BatchMeans:
    mean: float
    half_width: float
    lag1: float
    batch_values: tuple = field(default=(), compare=False)


def lag1_autocorrelation(x: Sequence[float]) -> float:
    v = np.asarray(x, dtype=float)
    d = v - v.mean()
    den = float(d @ d)
    if den == 0.0:
        return 0.0
    return float(d[:-1] @ d[1:]) / den


def _t_half_width(values: np.ndarray, confidence: float) -> float:
    n = len(values)
    sd = float(np.std(values, ddof=1))
    return float(stats.t.ppf(0.5 + confidence / 2.0, n - 1)) * sd / math.sqrt(n)


def batch_statistic(samples: Sequence[float], n_batches: int = 10,
                    fn: Callable[[np.ndarray], float] = np.mean,
                    confidence: float = 0.95) -> BatchMeans:
    """Apply ``fn`` to equal contiguous batches and summarise across batches.

    Leading samples that do not fill a whole batch are dropped.
    """
    x = np.asarray(samples, dtype=float)
    if n_batches < 2:
        raise ValueError("need at least two batches")
    if len(x) < 2 * n_batches:
        raise InsufficientSamples(f"{len(x)} samples < 2 x {n_batches} batches")
    m = len(x) // n_batches
    x = x[len(x) - m * n_batches:]
    vals = np.array([fn(b) for b in x.reshape(n_batches, m)], dtype=float)
    vals = vals[np.isfinite(vals)]
    if len(vals) < 2:
        raise InsufficientSamples("fewer than two usable batches")
    return BatchMeans(float(vals.mean()), _t_half_width(vals, confidence),
                      lag1_autocorrelation(vals), tuple(vals.tolist()))


def batch_means(samples: Sequence[float], n_batches: int = 10,
                confidence: float = 0.95) -> BatchMeans:
    """Grand mean, Student-t half-width and lag-1 autocorrelation of batch means."""
    return batch_statistic(samples, n_batches, np.mean, confidence)
