"""Smoothed phase-field energy of a staggered vector field and its gradient.

The discrete energy is

    F(V) = eps**-sigma1 * h**2 * sum_cells N(Vhat)**sigma
           + eps**sigma2 * h**2 / 2 * (|grad vx|**2 + |grad vy|**2)

with ``N(x) = sqrt(|x|**2 + eps_s**2)`` and ``Vhat`` the cell-centred
interpolation of ``V``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .grid import GridGeometry, StaggeredField

__all__ = [
    "SolverConfig",
    "exponents_for_alpha",
    "smooth_norm",
    "objective",
    "objective_gradient",
    "objective_and_gradient",
]


def exponents_for_alpha(alpha: float) -> tuple[float, float, float]:
    """Exponents ``(sigma, sigma1, sigma2)`` of the phase-field energy.

    A straight tube carrying flux ``theta`` over a width ``w`` costs about
    ``eps**-sigma1 * theta**sigma * w**(1 - sigma)`` from the concave term and
    ``eps**sigma2 * theta**2 * w**-3`` from the Dirichlet term. Optimising the
    width gives a cost proportional to ``theta**alpha`` with no residual power
    of ``eps`` exactly when

        sigma * (1 + alpha) = 4 * alpha - 2   and   3 * sigma1 = sigma2 * (1 - sigma).

    ``sigma2`` is fixed to 1; any other positive choice only rescales ``eps``.
    """
    alpha = float(alpha)
    if not 0.5 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (1/2, 1), got {alpha}")
    sigma = (4.0 * alpha - 2.0) / (alpha + 1.0)
    sigma2 = 1.0
    sigma1 = sigma2 * (1.0 - sigma) / 3.0
    return sigma, sigma1, sigma2


@dataclass(frozen=True)
class SolverConfig:
    """Problem and algorithm parameters.

    ``eps`` and ``source_radius`` default to ``3 h``. Exponents left as
    ``None`` are derived from ``alpha`` with :func:`exponents_for_alpha`.
    ``tau_p = None`` selects the FISTA step from the current metric.
    """

    alpha: float
    M: int = 201
    eps: float | None = None
    sigma: float | None = None
    sigma1: float | None = None
    sigma2: float | None = None
    eps_s: float = 1e-4
    tol: float = 1e-6
    tol_p: float = 1e-8
    tau0: float = 1.0
    tau_p: float | None = None
    L: int = 10
    max_iter: int = 20000
    seed: int = 0
    source_radius: float | None = None
    armijo: bool = False
    max_proj_iter: int = 20000
    init_amplitude: float = 0.01

    def __post_init__(self):
        alpha = float(self.alpha)
        if not 0.5 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (1/2, 1), got {alpha}")
        if int(self.M) != self.M or self.M < 2:
            raise ValueError(f"M must be an integer >= 2, got {self.M!r}")
        h = 2.0 / self.M
        if self.eps is None:
            object.__setattr__(self, "eps", 3.0 * h)
        if self.source_radius is None:
            object.__setattr__(self, "source_radius", 3.0 * h)
        if self.sigma is None or self.sigma1 is None or self.sigma2 is None:
            sigma, sigma1, sigma2 = exponents_for_alpha(alpha)
            for name, value in (("sigma", sigma), ("sigma1", sigma1), ("sigma2", sigma2)):
                if getattr(self, name) is None:
                    object.__setattr__(self, name, value)
        for name in ("eps", "eps_s", "tol", "tol_p", "tau0", "source_radius"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if self.tau_p is not None and not self.tau_p > 0:
            raise ValueError(f"tau_p must be positive, got {self.tau_p}")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")
        if self.L < 1:
            raise ValueError(f"history length L must be >= 1, got {self.L}")
        if self.max_iter < 0 or self.max_proj_iter < 1:
            raise ValueError("iteration caps must be positive")

    @property
    def geometry(self) -> GridGeometry:
        return GridGeometry(self.M)

    @property
    def h(self) -> float:
        return 2.0 / self.M

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def smooth_norm(x, eps_s: float) -> np.ndarray | float:
    """``(|x|**2 + eps_s**2) ** 0.5`` over the last axis of ``x``."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.sum(x * x, axis=-1) + eps_s * eps_s)


def _coefficients(cfg: SolverConfig) -> tuple[float, float]:
    h = cfg.h
    return cfg.eps ** (-cfg.sigma1) * h * h, cfg.eps ** cfg.sigma2 * 0.5


def objective_and_gradient(V: StaggeredField, cfg: SolverConfig,
                           need_gradient: bool = True):
    """Return ``F(V)`` and, if requested, ``grad F(V)`` (zero on boundary faces)."""
    g = V.geometry
    if g.M != cfg.M:
        raise ValueError(f"field has M={g.M} but config has M={cfg.M}")
    if not np.all(np.isfinite(V.data)):
        raise ValueError("field contains non-finite values")
    vx, vy = V.vx, V.vy
    c_mass, c_dir = _coefficients(cfg)

    xh = 0.5 * (vx[:-1, :] + vx[1:, :])
    yh = 0.5 * (vy[:, :-1] + vy[:, 1:])
    n2 = xh * xh + yh * yh + cfg.eps_s * cfg.eps_s
    ns = n2 ** (0.5 * cfg.sigma)
    dxx = np.diff(vx, axis=0)
    dxy = np.diff(vx, axis=1)
    dyx = np.diff(vy, axis=0)
    dyy = np.diff(vy, axis=1)
    dirichlet = (np.sum(dxx * dxx) + np.sum(dxy * dxy)
                 + np.sum(dyx * dyx) + np.sum(dyy * dyy))
    # h**2 / h**2 cancels in the Dirichlet term
    value = c_mass * float(np.sum(ns)) + c_dir * float(dirichlet)
    if not need_gradient:
        return value, None

    # d/dVhat of N**sigma is sigma * N**(sigma - 2) * Vhat
    w = (c_mass * cfg.sigma * 0.5) * ns / n2
    out = np.zeros(g.n_faces)
    n = g.n_x_faces
    gx = out[:n].reshape(vx.shape)
    gy = out[n:].reshape(vy.shape)
    px = w * xh
    py = w * yh
    gx[:-1, :] += px
    gx[1:, :] += px
    gy[:, :-1] += py
    gy[:, 1:] += py

    k = 2.0 * c_dir
    gx[1:, :] += k * dxx
    gx[:-1, :] -= k * dxx
    gx[:, 1:] += k * dxy
    gx[:, :-1] -= k * dxy
    gy[1:, :] += k * dyx
    gy[:-1, :] -= k * dyx
    gy[:, 1:] += k * dyy
    gy[:, :-1] -= k * dyy

    grad = StaggeredField(g, out)
    grad.enforce_boundary()
    return value, grad


def objective(V: StaggeredField, cfg: SolverConfig) -> float:
    return objective_and_gradient(V, cfg, need_gradient=False)[0]


def objective_gradient(V: StaggeredField, cfg: SolverConfig) -> StaggeredField:
    return objective_and_gradient(V, cfg)[1]
