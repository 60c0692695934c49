"""Run every shipped experiment config through the CLI.

    python3 scripts/run_experiments.py            # all configs
    python3 scripts/run_experiments.py nonsym     # configs whose name contains "nonsym"

Results land in results/ (paths come from each config).  The full set takes
roughly 15 minutes; the scaling tables dominate.
"""

import sys
import time
from pathlib import Path

from crfve.harness.cli import main

ROOT = Path(__file__).resolve().parents[1]
COMMANDS = {
    "mesh_info": "mesh-info",
    "nonsymmetry": "diagnostics",
    "perturbation": "diagnostics",
    "iterations": "iterations",
    "scaling": "scaling",
    "convergence": "convergence",
    "spectrum": "spectrum",
}


def command_for(name: str) -> str:
    for prefix, cmd in COMMANDS.items():
        if name.startswith(prefix):
            return cmd
    raise KeyError(f"no command for config {name}")


def run(patterns) -> int:
    (ROOT / "results").mkdir(exist_ok=True)
    status = 0
    for cfg in sorted((ROOT / "configs").glob("*.json")):
        if patterns and not any(p in cfg.stem for p in patterns):
            continue
        cmd = command_for(cfg.stem)
        t0 = time.perf_counter()
        code = main([cmd, "--config", str(cfg)])
        print(f"{cmd:12s} {cfg.name:32s} exit {code}  {time.perf_counter() - t0:6.1f}s",
              flush=True)
        status = max(status, code)
    return status


if __name__ == "__main__":
    import os
    os.chdir(ROOT)
    sys.exit(run(sys.argv[1:]))
