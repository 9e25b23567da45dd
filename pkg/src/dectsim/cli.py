"""Command-line entry point, sweeps and result files.

Exit codes: 0 success, 1 configuration error, 2 invariant violation,
3 steady state or topology not reached.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .config import RunConfig, parse_config, to_ini
from .engine import InvariantViolation
from .numerology import FRAME_TICKS, SLOT_TICKS, SYMBOL_TICKS, TICKS_PER_SECOND
from .rng import derive_seed
from .scenario import ConfigError, NotConverged
from .simulator import RunResult, TopologyFailure, run_simulation

log = logging.getLogger("dectsim")

COLUMNS = ("density_per_km2", "mode", "bias_db", "channels", "seed", "replication",
           "plr", "plr_ci", "latency_p99_ms", "latency_ci", "energy_eff_mbit_per_j",
           "energy_ci", "loss_harq", "loss_watchdog", "loss_halfduplex", "generated",
           "delivered", "sim_hours", "wall_seconds")
INT_COLUMNS = {"channels", "seed", "replication", "loss_harq", "loss_watchdog",
               "loss_halfduplex", "generated", "delivered"}

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_NOT_CONVERGED = 0, 1, 2, 3


@dataclass
class RunRecord:
    point: int
    replication: int
    seed: int
    result: RunResult | None = None
    error: str | None = None
    error_kind: str | None = None


@dataclass
class SweepResults:
    axis: str
    values: tuple
    records: list[RunRecord] = field(default_factory=list)

    @property
    def rows(self) -> list[RunRecord]:
        return [r for r in self.records if r.result is not None]

    @property
    def errors(self) -> list[RunRecord]:
        return [r for r in self.records if r.result is None]


def fmt_number(v) -> str:
    """Nine significant digits; integral values keep a trailing ``.0``."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    s = f"{v:.9g}"
    if s in ("nan", "inf", "-inf"):
        return s
    if "." not in s and "e" not in s:
        s += ".0"
    return s


def point_config(base: RunConfig, axis: str, value: float, seed: int) -> RunConfig:
    sc = base.scenario
    if axis == "density":
        sc = replace(sc, density_per_km2=float(value))
    elif axis == "bias":
        sc = replace(sc, bias_db=float(value))
    elif axis != "none":
        raise ValueError(f"unknown sweep axis {axis!r}")
    return replace(base, scenario=sc, run=replace(base.run, master_seed=seed))


def _run_one(args):
    point, rep, seed, cfg = args
    rec = RunRecord(point, rep, seed)
    try:
        rec.result = run_simulation(cfg)
    except InvariantViolation as exc:
        rec.error, rec.error_kind = str(exc), "invariant"
    except (NotConverged, TopologyFailure) as exc:
        rec.error, rec.error_kind = str(exc), "not-converged"
    except ConfigError as exc:
        rec.error, rec.error_kind = str(exc), "config"
    except Exception as exc:  # keep sibling runs alive
        rec.error, rec.error_kind = f"{type(exc).__name__}: {exc}", "error"
    return rec


def run_sweep(config: RunConfig, axis: str = "none", values: Sequence[float] = (),
              replications: int = 1, jobs: int = 1, common_seeds: bool = False) -> SweepResults:
    """One run per (axis value, replication), each with its own derived seed.

    With ``common_seeds`` every axis point of replication ``r`` shares one seed
    (common random numbers), which pairs the geometry across points when the
    node count does not depend on the axis value.
    """
    if axis != "none" and not len(values):
        raise ValueError("sweep axis is empty")
    if replications < 1:
        raise ValueError("replications must be >= 1")
    vals = tuple(values) if axis != "none" else (None,)
    tasks = []
    for i, v in enumerate(vals):
        for r in range(replications):
            seed = derive_seed(config.run.master_seed, 0 if common_seeds else i, r)
            cfg = point_config(config, axis, v, seed) if v is not None else \
                replace(config, run=replace(config.run, master_seed=seed))
            tasks.append((i, r, seed, cfg))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            recs = list(ex.map(_run_one, tasks))
    else:
        recs = [_run_one(t) for t in tasks]
    return SweepResults(axis, vals, recs)


def result_row(rec: RunRecord) -> dict:
    cfg = rec.result.config
    m = rec.result.metrics
    row = {"density_per_km2": cfg.scenario.density_per_km2, "mode": cfg.scenario.mode,
           "bias_db": cfg.scenario.bias_db, "channels": cfg.scenario.channels,
           "seed": rec.seed, "replication": rec.replication}
    for k in COLUMNS[6:]:
        row[k] = m[k]
    return row


def emit_results(results: SweepResults, out_dir: str | Path, base: RunConfig,
                 export_topology: bool = False) -> list[Path]:
    if not results.records:
        raise ValueError("no results to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    p = out / "results.csv"
    with p.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for rec in results.rows:
            row = result_row(rec)
            w.writerow([row[c] if c == "mode" else fmt_number(int(row[c]) if c in INT_COLUMNS
                                                               else row[c]) for c in COLUMNS])
    written.append(p)
    meta = {"code_version": __version__, "ticks_per_second": TICKS_PER_SECOND,
            "symbol_ticks": SYMBOL_TICKS, "slot_ticks": SLOT_TICKS, "frame_ticks": FRAME_TICKS,
            "sweep_axis": results.axis,
            "sweep_values": ",".join("" if v is None else fmt_number(v) for v in results.values),
            "runs": len(results.rows), "errors": len(results.errors)}
    p = out / "run_meta.ini"
    p.write_text(to_ini(base, meta), encoding="utf-8")
    written.append(p)
    if results.errors:
        p = out / "errors.csv"
        with p.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("point", "replication", "seed", "kind", "message"))
            for rec in results.errors:
                w.writerow((rec.point, rec.replication, rec.seed, rec.error_kind, rec.error))
        written.append(p)
    for rec in results.rows:
        tag = f"p{rec.point}_r{rec.replication}"
        ds = rec.result.device_stats
        p = out / f"devices_{tag}.csv"
        with p.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            keys = list(ds)
            w.writerow(keys)
            for i in range(len(ds[keys[0]])):
                w.writerow([fmt_number(ds[k][i]) for k in keys])
        written.append(p)
        if export_topology:
            p = out / f"topology_{tag}.csv"
            with p.open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(("device", "long_rd_id", "short_rd_id", "is_sink", "is_ft", "parent",
                            "hop", "carrier", "x_m", "y_m", "indoor"))
                for row in rec.result.topology:
                    w.writerow([fmt_number(v) for v in row])
            written.append(p)
    return written


def _floats(text: str) -> list[float]:
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dectsim",
                                 description="DECT-2020 NR mesh system-level simulator")
    ap.add_argument("--config", type=Path, help="INI configuration file")
    ap.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    g = ap.add_mutually_exclusive_group()
    g.add_argument("--sweep-density", type=_floats, metavar="A,B,C",
                   help="node densities per km^2")
    g.add_argument("--sweep-bias", type=_floats, metavar="A,B,C", help="bias values in dB")
    ap.add_argument("--replications", type=int, default=1)
    ap.add_argument("--seed", type=int, help="override run.master_seed")
    ap.add_argument("--export-topology", action="store_true")
    ap.add_argument("--audit-every", type=float, metavar="SECONDS",
                    help="invariant audit cadence (0 disables)")
    ap.add_argument("--jobs", type=int, default=1, help="sweep points run in parallel")
    ap.add_argument("--common-seeds", action="store_true",
                    help="reuse one seed per replication across sweep points")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config) if args.config else RunConfig()
        over = {}
        if args.seed is not None:
            over["master_seed"] = args.seed
        if args.audit_every is not None:
            over["audit_every_s"] = args.audit_every
        if over:
            cfg = cfg.with_values(run=over)
        if args.replications < 1:
            raise ConfigError("--replications must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.sweep_density:
        axis, values = "density", args.sweep_density
        if any(v <= 0 for v in values):
            print("config error: densities must be > 0", file=sys.stderr)
            return EXIT_CONFIG
    elif args.sweep_bias:
        axis, values = "bias", args.sweep_bias
        if any(v < 0 for v in values):
            print("config error: bias values must be >= 0", file=sys.stderr)
            return EXIT_CONFIG
    else:
        axis, values = "none", ()
    res = run_sweep(cfg, axis, values, args.replications, args.jobs, args.common_seeds)
    emit_results(res, args.out, cfg, args.export_topology)
    for rec in res.errors:
        print(f"run p{rec.point} r{rec.replication} failed ({rec.error_kind}): {rec.error}",
              file=sys.stderr)
    kinds = {r.error_kind for r in res.errors}
    if "invariant" in kinds:
        return EXIT_INVARIANT
    if "not-converged" in kinds:
        return EXIT_NOT_CONVERGED
    if "config" in kinds:
        return EXIT_CONFIG
    if "error" in kinds:
        return EXIT_INVARIANT if not res.rows else EXIT_OK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
