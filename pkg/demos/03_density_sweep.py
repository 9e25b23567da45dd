# coding: utf-8

# # Density sweep: single-hop against mesh
#
# The same sweep the CLI runs with --sweep-density, driven from Python and
# written to a results directory.

import csv
import sys
from pathlib import Path

from dectsim import RunConfig
from dectsim.cli import emit_results, run_sweep

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_sweep")
densities = [0.5e6, 4e6, 16e6]

# Each point simulates 1500 nodes; common seeds reuse one geometry across
# densities so that only the offered load changes from point to point.

rows = {}
for mode, bias in [("single-hop", 0.0), ("multi-hop", 3.0)]:
    cfg = RunConfig().with_values(
        scenario=dict(mode=mode, bias_db=bias, target_nodes=1500),
        run=dict(target_messages=3000, reproducible=True))
    res = run_sweep(cfg, "density", densities, common_seeds=True)
    emit_results(res, out / mode, cfg)
    with open(out / mode / "results.csv", newline="") as fh:
        rows[mode] = list(csv.DictReader(fh))

# ## Loss and latency by density

print(f"{'density':>10} {'mode':>11} {'PLR':>8} {'p99 ms':>8} {'Mbit/J':>9}")
for mode, rs in rows.items():
    for r in rs:
        print(f"{float(r['density_per_km2']):>10.3g} {mode:>11} {float(r['plr']):>8.4f} "
              f"{float(r['latency_p99_ms']):>8.2f} {float(r['energy_eff_mbit_per_j']):>9.5f}")
