"""Discrete problem instance: mollified point source and divergence bounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import CellField, GridGeometry
from .projection import BoxBounds

__all__ = ["SourceSpec", "mollified_dirac", "make_bounds", "build_instance"]

PROFILES = ("standard-bump", "truncated-gaussian")


@dataclass(frozen=True)
class SourceSpec:
    radius: float
    center: tuple[float, float] = (0.0, 0.0)
    profile: str = "standard-bump"
    subsamples: int = 8

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown source profile {self.profile!r}; choose from {PROFILES}")
        if not self.radius > 0:
            raise ValueError(f"source radius must be positive, got {self.radius}")
        if self.subsamples < 1:
            raise ValueError("subsamples must be >= 1")


def _profile(r2: np.ndarray, profile: str) -> np.ndarray:
    # r2 is the squared distance in units of the radius
    inside = r2 < 1.0
    out = np.zeros_like(r2)
    if profile == "standard-bump":
        out[inside] = np.exp(1.0 / (r2[inside] - 1.0))
    else:
        out[inside] = np.exp(-4.5 * r2[inside])
    return out


def _axis_offsets(M: int, s: int, shift: float, h: float) -> np.ndarray:
    """Sub-sample coordinates along one axis, shape ``(M, s)``.

    Offsets from the domain centre are built from integer numerators so that
    mirrored sub-samples are exact negatives of each other.
    """
    i = np.arange(M)[:, None]
    k = np.arange(s)[None, :]
    num = 2 * s * i + 2 * k + 1 - s * M
    return num * (h / (2 * s)) - shift


def mollified_dirac(spec: SourceSpec, geom: GridGeometry) -> CellField:
    """Cell averages of a compactly supported bump, renormalised to unit mass.

    Each cell value is the mean of the profile over ``subsamples**2`` points,
    so the source is nonzero only on cells that meet the open ball of the
    given radius.
    """
    h = geom.h
    if spec.radius < h:
        raise ValueError(f"source radius {spec.radius} is below the cell width {h}")
    s = spec.subsamples
    cx, cy = spec.center
    ox = _axis_offsets(geom.M, s, cx, h) / spec.radius
    oy = _axis_offsets(geom.M, s, cy, h) / spec.radius
    r2 = ox[:, None, :, None] ** 2 + oy[None, :, None, :] ** 2
    samples = _profile(r2, spec.profile).reshape(geom.M, geom.M, s * s)
    # sorting makes the sum independent of the sample order, so the grid
    # symmetries of the sample set carry over bit for bit
    vals = np.sort(samples, axis=2).sum(axis=2) / (s * s)
    total = vals.sum() * h * h
    if not total > 0:
        raise ValueError("source does not meet any sample point of the grid")
    return CellField(vals / total, geom)


def make_bounds(delta: CellField) -> BoxBounds:
    """``a = delta - 1``, ``b = delta``."""
    if np.any(delta.values < 0):
        raise ValueError("source density must be nonnegative")
    return BoxBounds(CellField(delta.values - 1.0, delta.geometry),
                     CellField(delta.values.copy(), delta.geometry))


def build_instance(cfg, profile: str = "standard-bump") -> tuple[CellField, BoxBounds]:
    """Source and bounds for a :class:`~branchscape.energy.SolverConfig`."""
    geom = cfg.geometry
    delta = mollified_dirac(SourceSpec(radius=cfg.source_radius, profile=profile), geom)
    return delta, make_bounds(delta)
