"""Cached solver runs shared by the slow acceptance criteria."""

import json
import os
from pathlib import Path

import numpy as np

from branchscape.cli import run_solve
from branchscape.energy import SolverConfig
from branchscape.grid import CellField, GridGeometry
from branchscape.io import read_field_csv

CACHE = Path(os.environ.get("BRANCHSCAPE_RUN_CACHE", Path(__file__).parent / ".runs"))


def converged_run(M: int, alpha: float, **overrides):
    """Return ``(nu, manifest)``, solving only if no matching run is cached."""
    cfg = SolverConfig(alpha=alpha, M=M, **overrides)
    out = CACHE / f"M{M}_a{alpha:g}"
    manifest_path = out / "manifest.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
        if manifest["config"] != json.loads(json.dumps(cfg.as_dict())):
            manifest = None
    else:
        manifest = None
    if manifest is None:
        run_solve(cfg, out)
        manifest = json.loads(manifest_path.read_text())
    nu = CellField(read_field_csv(out / "nu.csv"), GridGeometry(M))
    return nu, manifest


if __name__ == "__main__":
    import logging
    import sys

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    for item in sys.argv[1:]:
        M, alpha = item.split(":")
        nu, man = converged_run(int(M), float(alpha))
        print(item, man["status"], man["iterations"], man["wall_time_s"],
              man["shape"]["area"], man["shape"].get("isoperimetric_ratio"),
              man["shape"].get("dimension", {}).get("slope"), flush=True)
