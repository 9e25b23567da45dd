"""Run configuration: INI sections with typed, range-checked keys.

Every key has a default; an empty file therefore yields the baseline
scenario. Unknown sections or keys are rejected. ``to_ini`` emits every key,
and parsing that text reproduces an equal :class:`RunConfig`.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .scenario import ConfigError

AUTO = "auto"


class ParseError(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class RangeError(ConfigError):
    pass


def _opt(default, check=None, doc: str = ""):
    """Dataclass field carrying a validator ``check(value) -> bool`` and its range text."""
    return field(default=default, metadata={"check": check, "doc": doc})


def _choice(*vals):
    return (lambda v: v in vals), "one of " + ", ".join(map(str, vals))


def _gt(lo):
    return (lambda v: v > lo), f"> {lo}"


def _ge(lo):
    return (lambda v: v >= lo), f">= {lo}"


def _within(lo, hi):
    return (lambda v: lo <= v <= hi), f"in [{lo}, {hi}]"


def _open(lo, hi):
    return (lambda v: lo < v < hi), f"in ({lo}, {hi})"


def _auto_or(check):
    fn, doc = check
    return (lambda v: v == AUTO or fn(v)), f"'{AUTO}' or {doc}"


def _any():
    return (lambda v: math.isfinite(v)), "a finite number"


def _f(default, check):
    return _opt(default, check[0], check[1])


@dataclass(frozen=True)
class RunSection:
    master_seed: int = _f(1, _ge(0))
    sim_duration_s: float = _f(7200.0, _gt(0.0))
    target_messages: int = _f(0, _ge(0))
    warmup_policy: str = _f("detect-or-fixed", _choice("detect", "detect-or-fixed", "fixed", "none"))
    warmup_max_s: float = _f(120.0, _gt(0.0))
    min_associated_fraction: float = _f(0.99, _within(0.0, 1.0))
    fixed_warmup_fraction: float = _f(0.1, _within(0.0, 0.9))
    steady_windows: int = _f(40, _ge(6))
    steady_ma_windows: int = _f(5, _ge(1))
    steady_eps: float = _f(0.05, _open(0.0, 1.0))
    n_batches: int = _f(10, _ge(2))
    audit_every_s: float = _f(0.0, _ge(0.0))
    reproducible: bool = _f(False, (lambda v: isinstance(v, bool), "true or false"))
    max_dense_devices: int = _f(16000, _ge(1))


@dataclass(frozen=True)
class ScenarioSection:
    density_per_km2: float = _f(1.0e6, _gt(0.0))
    mode: str = _f("multi-hop", _choice("single-hop", "multi-hop"))
    bias_db: float = _f(0.0, _ge(0.0))
    channels: int = _f(1, _choice(1, 3))
    channel_pattern: str = _f("per-site", _choice("per-site", "per-sink"))
    area_scale: int = _f(7, _choice(1, 7, 19))
    isd_m: float = _f(500.0, _gt(0.0))
    node_area_km2: float = _f(0.0, _ge(0.0))
    thinning: float = _f(1.0, _ge(1.0))
    target_nodes: int = _f(0, _ge(0))
    sinks_per_site: int = _f(3, _ge(1))
    sink_placement: str = _f("co-located", _choice("co-located", "ring-offset"))
    sink_offset_m: float = _f(20.0, _ge(0.0))
    sink_height_m: float = _f(25.0, _gt(1.5))
    node_height_m: float = _f(1.5, _gt(0.0))
    indoor_fraction: float = _f(0.8, _within(0.0, 1.0))
    traffic_interval_s: float = _f(7200.0, _gt(0.0))
    payload_bytes: int = _f(32, _ge(1))


@dataclass(frozen=True)
class PhySection:
    carrier_ghz: float = _f(1.9, _within(0.5, 100.0))
    mu: int = _f(1, _choice(1, 2, 4, 8))
    beta: int = _f(1, _choice(1, 2, 4, 8, 12, 16))
    subslots_per_slot: int = _f(2, _choice(1, 2, 4, 8))
    noise_figure_db: float = _f(7.0, _ge(0.0))
    mcs: str = _f("qpsk-3/4", (lambda v: isinstance(v, str) and v != "", "an MCS name"))
    per_margin_db: float = _f(3.0, _any())
    per_slope_per_db: float = _f(2.0, _gt(0.0))
    sensitivity_per: float = _f(0.1, _open(0.0, 1.0))
    sensitivity_dbm: Any = _f(AUTO, _auto_or(_any()))
    prune_margin_db: float = _f(10.0, _ge(0.0))
    node_power_dbm: float = _f(7.0, _any())
    sink_power_multihop_dbm: float = _f(7.0, _any())
    sink_power_singlehop_dbm: float = _f(17.0, _any())
    single_hop_power_dbm: Any = _f(AUTO, _auto_or(_any()))
    calibration_quantile: float = _f(0.999, _open(0.0, 1.0))
    calibration_samples: int = _f(20000, _ge(100))


@dataclass(frozen=True)
class MacSection:
    access: str = _f("rach", _choice("rach", "scheduled"))
    cw_min: int = _f(8, _ge(1))
    cw_max: int = _f(256, _ge(1))
    lbt_threshold_dbm: float = _f(-82.0, _any())
    lbt_symbols: int = _f(2, _ge(2))
    max_retransmissions: int = _f(3, _ge(0))
    feedback_timeout_slots: int = _f(2, _ge(0))
    watchdog_s: float = _f(60.0, _gt(0.0))
    rach_subslots: str = _f("all", (lambda v: isinstance(v, str), "'all' or comma-separated subslot indices"))
    sched_period_frames: int = _f(10, _ge(1))


@dataclass(frozen=True)
class TopologySection:
    beacon_period_s: float = _f(1.0, _gt(0.0))
    beacon_miss_limit: int = _f(3, _ge(1))
    hysteresis_db: float = _f(6.0, _ge(0.0))
    max_depth: int = _f(0, _ge(0))
    promote_to_ft: bool = _f(True, (lambda v: isinstance(v, bool), "true or false"))
    # nodes cut off from every sink under the bias fall back to sensitivity
    bias_fallback: bool = _f(True, (lambda v: isinstance(v, bool), "true or false"))


@dataclass(frozen=True)
class EnergySection:
    pa_efficiency: float = _f(0.2, _within(1e-6, 1.0))
    tx_circuit_w: float = _f(0.010, _gt(0.0))
    rx_listen_w: float = _f(0.005, _gt(0.0))
    sleep_w: float = _f(1e-5, _gt(0.0))
    listen_policy: str = _f("activity", _choice("activity", "continuous-ft"))


SECTIONS = {
    "run": RunSection,
    "scenario": ScenarioSection,
    "phy": PhySection,
    "mac": MacSection,
    "topology": TopologySection,
    "energy": EnergySection,
}
IGNORED_SECTIONS = ("meta",)


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    phy: PhySection = field(default_factory=PhySection)
    mac: MacSection = field(default_factory=MacSection)
    topology: TopologySection = field(default_factory=TopologySection)
    energy: EnergySection = field(default_factory=EnergySection)

    def with_values(self, **sections: dict) -> "RunConfig":
        """Copy with ``section={key: value}`` overrides, validated."""
        out = self
        for name, kv in sections.items():
            if name not in SECTIONS:
                raise UnknownKey(f"unknown section [{name}]")
            sec = getattr(out, name)
            known = {f.name for f in fields(sec)}
            for k in kv:
                if k not in known:
                    raise UnknownKey(f"unknown key {name}.{k}")
            out = replace(out, **{name: replace(sec, **kv)})
        validate(out)
        return out

    def to_ini(self) -> str:
        return to_ini(self)


def _convert(text: str, default: Any, key: str) -> Any:
    t = text.strip()
    try:
        if isinstance(default, bool):
            low = t.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(t)
        if isinstance(default, int):
            return int(t)
        if isinstance(default, float):
            return float(t)
        if default == AUTO:
            return AUTO if t.lower() == AUTO else float(t)
        return t
    except ValueError:
        raise RangeError(f"{key}: cannot interpret {text!r} as {type(default).__name__}") from None


def validate(cfg: RunConfig) -> RunConfig:
    for name in SECTIONS:
        sec = getattr(cfg, name)
        for f in fields(sec):
            v = getattr(sec, f.name)
            check = f.metadata.get("check")
            if check is not None and not check(v):
                raise RangeError(f"{name}.{f.name} = {v!r} out of range (expected {f.metadata['doc']})")
    if cfg.mac.cw_max < cfg.mac.cw_min:
        raise RangeError(f"mac.cw_max = {cfg.mac.cw_max} out of range (expected >= mac.cw_min)")
    if cfg.mac.rach_subslots != "all":
        try:
            idx = [int(s) for s in cfg.mac.rach_subslots.split(",") if s.strip()]
        except ValueError:
            raise RangeError("mac.rach_subslots: expected 'all' or comma-separated integers") from None
        n = 24 * cfg.phy.subslots_per_slot
        if not idx or any(not 0 <= i < n for i in idx):
            raise RangeError(f"mac.rach_subslots: indices must lie in [0, {n - 1}]")
    return cfg


def parse_config_text(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ParseError(str(exc)) from None
    built = {}
    for sec in cp.sections():
        if sec in IGNORED_SECTIONS:
            continue
        if sec not in SECTIONS:
            raise UnknownKey(f"unknown section [{sec}]")
        cls = SECTIONS[sec]
        defaults = cls()
        known = {f.name: getattr(defaults, f.name) for f in fields(cls)}
        kv = {}
        for k, v in cp.items(sec):
            if k not in known:
                raise UnknownKey(f"unknown key {sec}.{k}")
            kv[k] = _convert(v, known[k], f"{sec}.{k}")
        built[sec] = cls(**kv)
    return validate(RunConfig(**built))


def parse_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    return parse_config_text(text)


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_ini(cfg: RunConfig, meta: dict[str, Any] | None = None) -> str:
    lines = []
    for name in SECTIONS:
        sec = getattr(cfg, name)
        lines.append(f"[{name}]")
        for f in fields(sec):
            lines.append(f"{f.name} = {_fmt(getattr(sec, f.name))}")
        lines.append("")
    if meta:
        lines.append("[meta]")
        for k, v in meta.items():
            lines.append(f"{k} = {_fmt(v)}")
        lines.append("")
    return "\n".join(lines)
