"""Rasterised test sets with known box-counting dimension."""

import numpy as np

from branchscape.analysis import ShapeMask
from branchscape.grid import GridGeometry


def koch_points(level: int, start=(-0.9, -0.3), end=(0.9, -0.3)) -> np.ndarray:
    pts = np.array([start, end], dtype=float)
    rot = np.array([[0.5, -np.sqrt(3) / 2], [np.sqrt(3) / 2, 0.5]])
    for _ in range(level):
        a, b = pts[:-1], pts[1:]
        d = (b - a) / 3.0
        p1 = a + d
        p2 = p1 + d @ rot.T
        p3 = a + 2 * d
        new = np.stack([a, p1, p2, p3], axis=1).reshape(-1, 2)
        pts = np.vstack([new, pts[-1]])
    return pts


def rasterize_polyline(points: np.ndarray, geom: GridGeometry, per_cell: int = 4) -> ShapeMask:
    cells = np.zeros((geom.M, geom.M), dtype=bool)
    h = geom.h
    for a, b in zip(points[:-1], points[1:]):
        n = max(2, int(np.ceil(np.linalg.norm(b - a) / h * per_cell)) + 1)
        s = np.linspace(0.0, 1.0, n)[:, None]
        p = a + s * (b - a)
        idx = np.clip(np.floor((p + 1.0) / h).astype(int), 0, geom.M - 1)
        cells[idx[:, 0], idx[:, 1]] = True
    return ShapeMask(cells, geom)


def square_mask(geom: GridGeometry, half: float = 0.5) -> ShapeMask:
    x = (np.arange(geom.M) + 0.5) * geom.h - 1.0
    inside = np.abs(x) <= half
    return ShapeMask(inside[:, None] & inside[None, :], geom)


def disc_mask(geom: GridGeometry, radius: float = 0.5) -> ShapeMask:
    x = (np.arange(geom.M) + 0.5) * geom.h - 1.0
    return ShapeMask(x[:, None] ** 2 + x[None, :] ** 2 <= radius ** 2, geom)
