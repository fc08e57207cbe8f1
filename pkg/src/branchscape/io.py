"""Plain-text and PGM writers for run outputs."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .grid import CellField

__all__ = ["write_pgm", "read_pgm", "write_field_csv", "read_field_csv", "write_energy_csv"]


def write_pgm(field, path) -> Path:
    """Write a 2D array (or :class:`CellField`) as an 8-bit binary PGM.

    Row ``r`` of the array becomes image row ``r`` counted from the top.
    Values are mapped linearly from ``[min, max]`` to ``[0, 255]``; a constant
    field maps to 0.
    """
    values = field.values if isinstance(field, CellField) else np.asarray(field, dtype=float)
    if values.ndim != 2:
        raise ValueError("PGM output needs a 2D array")
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi > lo:
        pixels = np.rint((values - lo) * (255.0 / (hi - lo)))
    else:
        pixels = np.zeros_like(values)
    pixels = np.clip(pixels, 0, 255).astype(np.uint8)
    height, width = pixels.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes(order="C"))
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError(f"{path} is not a binary PGM")
    width, height = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(height, width)


def write_field_csv(values, path) -> Path:
    """One value per line in row-major order, 17 significant digits."""
    path = Path(path)
    np.savetxt(path, np.asarray(values, dtype=float).ravel(order="C"), fmt="%.17g")
    return path


def read_field_csv(path, shape=None) -> np.ndarray:
    flat = np.loadtxt(path, dtype=float, ndmin=1)
    if shape is None:
        M = int(round(np.sqrt(flat.size)))
        if M * M != flat.size:
            raise ValueError(f"{path}: {flat.size} values do not form a square grid")
        shape = (M, M)
    return flat.reshape(shape)


def write_energy_csv(report, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "energy", "tau", "violation"])
        for k, (F, tau, viol) in enumerate(
                zip(report.energies, report.step_sizes, report.violations), start=1):
            w.writerow([k, f"{F:.17g}", f"{tau:.17g}", f"{viol:.17g}"])
    return path
