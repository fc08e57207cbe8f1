"""Command line entry point: ``branchscape {solve,analyze,oracle}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import platform
import sys
import time
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (boundary_cells, box_counting, extract_shape, irrigated_density,
                       shape_summary, theory_refs)
from .energy import SolverConfig
from .grid import CellField, GridGeometry, interpolate_to_centers
from .io import read_field_csv, write_energy_csv, write_field_csv, write_pgm
from .optimizer import solve
from .problem import build_instance

__all__ = ["parse_config", "read_config_file", "run_solve", "main", "EXIT_CODES"]

logger = logging.getLogger("branchscape")

EXIT_CODES = {"converged": 0, "stalled": 2, "max_iter": 3}

MIN_GRID = 8

# option name -> (type, default); None means "derived" or "required"
OPTIONS = {
    "alpha": (float, None),
    "grid_size": (int, 201),
    "eps_factor": (float, 3.0),
    "source_radius_factor": (float, 3.0),
    "tol": (float, 1e-6),
    "tol_p": (float, 1e-8),
    "tau0": (float, 1.0),
    "tau_p": (float, None),
    "history": (int, 10),
    "max_iter": (int, 20000),
    "max_proj_iter": (int, 20000),
    "seed": (int, 0),
    "eps_s": (float, 1e-4),
    "armijo": (bool, False),
    "out": (str, "run"),
    "threshold": (float, 0.5),
    "profile": (str, "standard-bump"),
}


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot read {text!r} as a boolean")


def _convert(key: str, raw):
    kind = OPTIONS[key][0]
    try:
        if kind is bool:
            return raw if isinstance(raw, bool) else _parse_bool(str(raw))
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OPTIONS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _convert(key, value)
    return out


def _add_run_flags(p: argparse.ArgumentParser):
    for key, (kind, _) in OPTIONS.items():
        flag = "--" + key.replace("_", "-")
        if key == "grid_size":
            p.add_argument(flag, "-M", dest=key, type=int, default=None)
        elif key == "history":
            p.add_argument(flag, "-L", dest=key, type=int, default=None)
        elif kind is bool:
            p.add_argument(flag, dest=key, action="store_const", const=True, default=None)
        else:
            p.add_argument(flag, dest=key, type=kind, default=None)
    p.add_argument("--config", default=None, help="flat key = value file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="branchscape")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("solve", help="run the proximal L-BFGS solver"))
    pa = sub.add_parser("analyze", help="shape and dimension of a saved density")
    pa.add_argument("path", help="nu.csv or a run directory containing it")
    pa.add_argument("--alpha", type=float, default=None)
    pa.add_argument("--threshold", type=float, default=0.5)
    pa.add_argument("--full-range", action="store_true",
                    help="fit the slope over all scales instead of the default window")
    po = sub.add_parser("oracle", help="optimal Y junction and reference exponents")
    po.add_argument("--alpha", type=float, required=True)
    po.add_argument("--sinks", type=float, nargs=4, default=[1.0, 0.3, 1.0, -0.3],
                    metavar=("X1", "Y1", "X2", "Y2"))
    po.add_argument("--masses", type=float, nargs=2, default=[0.5, 0.5])
    return parser


def merge_options(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    merged = {k: v[1] for k, v in OPTIONS.items()}
    if getattr(args, "config", None):
        merged.update(read_config_file(args.config))
    for key in OPTIONS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def config_from_options(opts: dict) -> SolverConfig:
    alpha = opts["alpha"]
    if alpha is None:
        raise ConfigError("--alpha is required")
    if not 0.5 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0.5, 1), got {alpha}")
    M = opts["grid_size"]
    if M < MIN_GRID:
        raise ConfigError(f"grid size must be at least {MIN_GRID}, got {M}")
    h = 2.0 / M
    return SolverConfig(
        alpha=alpha, M=M, eps=opts["eps_factor"] * h, eps_s=opts["eps_s"],
        tol=opts["tol"], tol_p=opts["tol_p"], tau0=opts["tau0"], tau_p=opts["tau_p"],
        L=opts["history"], max_iter=opts["max_iter"], max_proj_iter=opts["max_proj_iter"],
        seed=opts["seed"], source_radius=opts["source_radius_factor"] * h,
        armijo=opts["armijo"])


def parse_config(argv=None, config_file=None) -> SolverConfig:
    """Solver configuration from ``solve`` flags and an optional config file."""
    argv = list(argv or [])
    if config_file is not None:
        argv += ["--config", str(config_file)]
    args = build_parser().parse_args(["solve", *argv])
    return config_from_options(merge_options(args))


def _versions() -> dict:
    import scipy
    return {"branchscape": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj)}")


def _image(values: np.ndarray) -> np.ndarray:
    # x to the right, y upwards
    return np.flipud(values.T)


def run_solve(cfg: SolverConfig, out_dir, *, threshold: float = 0.5,
              profile: str = "standard-bump", extra: dict | None = None) -> tuple[int, list[Path]]:
    """Solve, then write CSV fields, PGM images and ``manifest.json`` to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")

    t0 = time.perf_counter()
    delta, bounds = build_instance(cfg, profile=profile)

    def progress(k, V, report):
        if k % 100 == 0:
            logger.info("iter %d  F=%.10g  tau=%.3g  viol=%.2e  proj_it=%d", k,
                        report.energies[-1], report.step_sizes[-1],
                        report.violations[-1], report.projection_iterations[-1])

    V, report = solve(cfg, None, delta, bounds=bounds, callback=progress)
    wall = time.perf_counter() - t0

    nu = irrigated_density(delta, V)
    vhat = interpolate_to_centers(V).magnitude()
    files = [
        write_energy_csv(report, out / "energy.csv"),
        write_field_csv(V.vx, out / "vx.csv"),
        write_field_csv(V.vy, out / "vy.csv"),
        write_field_csv(nu.values, out / "nu.csv"),
        write_field_csv(delta.values, out / "delta.csv"),
        write_pgm(_image(vhat), out / "vnorm.pgm"),
        write_pgm(_image(nu.values), out / "nu.pgm"),
    ]
    summary = shape_summary(nu, threshold, alpha=cfg.alpha)
    if summary["touches_domain_edge"]:
        logger.warning("the shape touches the domain edge; the box is too small")
    manifest_path = out / "manifest.json"
    files.append(manifest_path)
    manifest = {
        "config": cfg.as_dict(),
        "profile": profile,
        "versions": _versions(),
        "wall_time_s": wall,
        "status": report.status,
        "iterations": report.iterations,
        "initial_energy": report.initial_energy,
        "final_energy": report.final_energy,
        "final_error": report.final_error,
        "constraint_violation": report.final_violation,
        "unconverged_projections": int(sum(not f for f in report.projection_flags)),
        "shape": summary,
        "theory": dict(zip(("beta", "dim_bound", "zstar_coeff"), theory_refs(cfg.alpha))),
        "files": [p.name for p in files],
    }
    if extra:
        manifest.update(extra)
    manifest_path.write_text(json.dumps(manifest, indent=2, default=_json_default) + "\n")
    return EXIT_CODES[report.status], files


def _analyze(args) -> int:
    path = Path(args.path)
    if path.is_dir():
        path = path / "nu.csv"
    values = read_field_csv(path)
    nu = CellField(values, GridGeometry(values.shape[0]))
    mask = extract_shape(nu, args.threshold)
    est = box_counting(boundary_cells(mask), alpha=args.alpha,
                       fit_window=not args.full_range)
    summary = shape_summary(nu, args.threshold, alpha=args.alpha)
    summary["dimension"] = est.as_dict()
    print(json.dumps(summary, indent=2, default=_json_default))
    return 0


def _oracle(args) -> int:
    from .gilbert import branch_angle, force_balance, optimal_y, y_angle_from_masses

    sinks = np.array(args.sinks).reshape(2, 2)
    source = np.zeros(2)
    branch, cost = optimal_y(source, sinks, args.masses, args.alpha)
    out = {
        "alpha": args.alpha,
        "branch_point": branch.tolist(),
        "cost": cost,
        "branch_angle_deg": math.degrees(branch_angle(branch, sinks)),
        "balanced_angle_deg": math.degrees(y_angle_from_masses(*args.masses, args.alpha)),
        "force_residual": float(np.linalg.norm(
            force_balance(branch, source, sinks, args.masses, args.alpha))),
    }
    if args.alpha > 0.5:
        out.update(zip(("beta", "dim_bound", "zstar_coeff"), theory_refs(args.alpha)))
    print(json.dumps(out, indent=2))
    return 0


def _thread_limit():
    n = os.environ.get("BRANCHSCAPE_THREADS")
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=int(n))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(levelname)s %(message)s")
    with _thread_limit():
        try:
            if args.command == "analyze":
                return _analyze(args)
            if args.command == "oracle":
                return _oracle(args)
            opts = merge_options(args)
            cfg = config_from_options(opts)
        except (ConfigError, ValueError) as exc:
            parser.error(str(exc))
        code, files = run_solve(cfg, opts["out"], threshold=opts["threshold"],
                                profile=opts["profile"])
        print(f"{cfg.M}x{cfg.M} alpha={cfg.alpha}: exit {code}, wrote {len(files)} files "
              f"to {opts['out']}")
        return code


if __name__ == "__main__":
    sys.exit(main())
