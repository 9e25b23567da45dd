"""System-level simulator for DECT-2020 NR mesh networks.

Quick start::

    from dectsim import RunConfig, run_simulation
    cfg = RunConfig().with_values(scenario={"density_per_km2": 5e5, "target_nodes": 2000})
    result = run_simulation(cfg)
    print(result.metrics["plr"], result.metrics["latency_p99_ms"])
"""

__version__ = "0.1.0"

from .config import RunConfig, parse_config, parse_config_text, to_ini  # noqa: E402
from .simulator import RunResult, Simulation, run_simulation  # noqa: E402

__all__ = ["RunConfig", "RunResult", "Simulation", "parse_config", "parse_config_text",
           "run_simulation", "to_ini", "__version__"]
