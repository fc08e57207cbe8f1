"""Projection onto ``{a <= div v <= b}`` in an L-BFGS metric, via dual FISTA.

For the metric ``H`` the projection of ``V0`` solves

    min_V  1/2 |V - V0|_H^2   subject to  a <= div V <= b,

whose dual is

    min_u  1/2 <H^-1 grad u, grad u> - <u, div V0> + sum(b u_+ - a u_-).

The first part is smooth with gradient ``-div(V0 + H^-1 grad u)``, the second
has a closed-form prox, so accelerated proximal gradient applies. The primal
solution is recovered as ``V = V0 + H^-1 grad u``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .grid import CellField, StaggeredField, _div, _grad_into
from .lbfgs import LbfgsHistory

__all__ = [
    "BoxBounds",
    "FistaState",
    "ProjectionResult",
    "prox_g",
    "dual_objective",
    "primal_objective",
    "duality_gap",
    "fista_momentum",
    "max_violation",
    "default_fista_step",
    "project",
]

logger = logging.getLogger(__name__)


@dataclass
class BoxBounds:
    """Cellwise bounds ``a <= div V <= b``."""

    a: CellField
    b: CellField

    def __post_init__(self):
        if self.a.geometry != self.b.geometry:
            raise ValueError("bounds live on different grids")
        if np.any(self.a.values > self.b.values):
            raise ValueError("lower bound exceeds upper bound in some cell")

    @property
    def geometry(self):
        return self.a.geometry


@dataclass
class FistaState:
    t: float = 1.0
    u: CellField | None = None
    u_old: CellField | None = None
    s: float = 0.0

    def __post_init__(self):
        if not self.t >= 1.0:
            raise ValueError(f"FISTA momentum t must be >= 1, got {self.t}")


@dataclass
class ProjectionResult:
    V: StaggeredField
    u: CellField
    converged: bool
    iterations: int
    violation: float
    rel_change: float
    tau_p: float
    backtracks: int = 0

    def __iter__(self):
        # allows ``V, u = project(...)``
        yield self.V
        yield self.u


def _prox(u: np.ndarray, a: np.ndarray, b: np.ndarray, tau: float) -> np.ndarray:
    lo = tau * a
    hi = tau * b
    return np.where(u < lo, u - lo, np.where(u > hi, u - hi, 0.0))


def prox_g(u: CellField, bounds: BoxBounds, tau: float) -> CellField:
    """Prox of ``tau * sum(b u_+ - a u_-)``: shift by ``tau a`` or ``tau b``, else 0."""
    if not tau > 0:
        raise ValueError(f"prox step must be positive, got {tau}")
    return CellField(_prox(u.values, bounds.a.values, bounds.b.values, tau), u.geometry)


def _metric_gradient(apply, u: np.ndarray, h: float, buf: np.ndarray) -> np.ndarray:
    _grad_into(u, h, buf)
    return apply(buf)


def _g(u: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(b * np.maximum(u, 0.0)) - np.sum(a * np.maximum(-u, 0.0)))


def dual_objective(u: CellField, V0: StaggeredField, metric: LbfgsHistory,
                   bounds: BoxBounds) -> float:
    geom = u.geometry
    gu = np.empty(geom.n_faces)
    _grad_into(u.values, geom.h, gu)
    hg = metric.multiply(gu)
    d0 = _div(V0.vx, V0.vy, geom.h)
    return (0.5 * float(np.dot(hg, gu)) - float(np.vdot(u.values, d0))
            + _g(u.values, bounds.a.values, bounds.b.values))


def primal_objective(V: StaggeredField, V0: StaggeredField, metric: LbfgsHistory) -> float:
    """``1/2 |V - V0|_H^2``; the metric is inverted with conjugate gradients."""
    d = V.data - V0.data
    if len(metric) == 0:
        return 0.5 * float(np.dot(d, d))
    n = d.size
    op = LinearOperator((n, n), matvec=metric.multiply, dtype=float)
    x, info = cg(op, d, rtol=1e-13, atol=0.0, maxiter=10 * n)
    if info != 0:
        logger.warning("CG did not converge while evaluating the primal objective")
    return 0.5 * float(np.dot(d, x))


def duality_gap(result: ProjectionResult, V0: StaggeredField, metric: LbfgsHistory,
                bounds: BoxBounds) -> float:
    """Primal plus dual value; zero at the exact projection."""
    return (primal_objective(result.V, V0, metric)
            + dual_objective(result.u, V0, metric, bounds))


def fista_momentum(state: FistaState) -> FistaState:
    """One step of ``t <- (1 + sqrt(1 + 4 t^2)) / 2`` with weight ``s = (t_old - 1) / t``."""
    t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * state.t * state.t))
    return FistaState(t=t_new, u=state.u, u_old=state.u_old, s=(state.t - 1.0) / t_new)


def _violation(div_v: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float(max(np.max(a - div_v), np.max(div_v - b), 0.0))


def max_violation(V: StaggeredField, bounds: BoxBounds) -> float:
    """Largest amount by which ``div V`` leaves ``[a, b]`` in any cell."""
    g = V.geometry
    return _violation(_div(V.vx, V.vy, g.h), bounds.a.values, bounds.b.values)


def default_fista_step(h: float, metric: LbfgsHistory) -> float:
    """``h**2 / (8 s_H)``: inverse of the Lipschitz bound ``s_H |div|^2``."""
    return h * h / (8.0 * metric.scaling)


def project(V0: StaggeredField, u0: CellField | None, bounds: BoxBounds,
            metric: LbfgsHistory, cfg=None, *, tol_p: float | None = None,
            tol_c: float | None = None, tau_p: float | None = None,
            max_iter: int | None = None, restart: bool = True) -> ProjectionResult:
    """Project ``V0`` on the divergence box in the norm of ``metric``.

    Parameters
    ----------
    V0 : StaggeredField
        Point to project; its boundary faces must be zero.
    u0 : CellField or None
        Warm start for the dual potential (``None`` means zero).
    bounds : BoxBounds
    metric : LbfgsHistory
        Inverse metric ``H^-1``; empty for the Euclidean projection.
    cfg : SolverConfig, optional
        Supplies ``tol_p``, ``tau_p`` and ``max_proj_iter`` unless the keyword
        arguments override them.
    tol_c : float, optional
        Admissible constraint violation at exit. Defaults to ``tol_p``.
    restart : bool
        Reset the momentum whenever the step and the last move disagree.

    Returns
    -------
    ProjectionResult
        Unpacks as ``(V, u)``. ``converged`` is False when the iteration cap
        was hit before both the relative change of ``u`` dropped below
        ``tol_p`` and the violation dropped below ``tol_c``.

    Notes
    -----
    The step starts at ``tau_p`` (or :func:`default_fista_step`) and is halved
    whenever the quadratic upper bound fails, which can happen because the
    largest eigenvalue of ``H^-1`` may exceed the central scaling ``s_H``.
    Because the smooth part is quadratic the test is exact and costs no extra
    metric product.
    """
    geom = V0.geometry
    h = geom.h
    if tol_p is None:
        tol_p = cfg.tol_p if cfg is not None else 1e-8
    if tol_c is None:
        tol_c = tol_p
    if tau_p is None and cfg is not None:
        tau_p = cfg.tau_p
    if tau_p is None:
        tau_p = default_fista_step(h, metric)
    if max_iter is None:
        max_iter = cfg.max_proj_iter if cfg is not None else 20000
    a = bounds.a.values
    b = bounds.b.values

    apply = metric.compact()
    buf = np.empty(geom.n_faces)
    d0 = _div(V0.vx, V0.vy, h)
    u = np.zeros_like(d0) if u0 is None else np.array(u0.values, dtype=float)
    G = _metric_gradient(apply, u, h, buf)
    dG = _div(*_split(G, geom), h)

    viol = _violation(d0 + dG, a, b)
    u_old, G_old, dG_old = u, G, dG
    t = 1.0
    tau = float(tau_p)
    rel = math.inf
    converged = False
    backtracks = 0
    k = 0
    while k < max_iter:
        k += 1
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        s = (t - 1.0) / t_new
        if s:
            ut = u + s * (u - u_old)
            Gt = G + s * (G - G_old)
            dGt = dG + s * (dG - dG_old)
        else:
            ut, Gt, dGt = u, G, dG
        # gradient of the smooth dual part is -div(V0 + H^-1 grad ut)
        step_dir = d0 + dGt
        while True:
            un = _prox(ut + tau * step_dir, a, b, tau)
            d = un - ut
            Gn = _metric_gradient(apply, un, h, buf)
            dGn = _div(*_split(Gn, geom), h)
            # <grad d, H^-1 grad d> = -<d, div(Gn - Gt)>
            curv = -float(np.vdot(d, dGn - dGt))
            dd = float(np.vdot(d, d))
            if curv <= dd / tau * (1.0 + 1e-10) + 1e-300:
                break
            tau *= 0.5
            backtracks += 1
        if restart and float(np.vdot(ut - un, un - u)) > 0.0:
            t = 1.0
        else:
            t = t_new
        u_old, G_old, dG_old = u, G, dG
        u, G, dG = un, Gn, dGn
        rel = float(np.linalg.norm(u - u_old)) / max(float(np.linalg.norm(u)), 1.0)
        viol = _violation(d0 + dG, a, b)
        if rel < tol_p and viol <= tol_c:
            converged = True
            break

    if not converged:
        logger.debug("projection stopped after %d iterations (rel=%.3e, viol=%.3e)",
                     k, rel, viol)
    V = StaggeredField(geom, V0.data + G)
    V.enforce_boundary()
    return ProjectionResult(V=V, u=CellField(u, geom), converged=converged,
                            iterations=k, violation=viol, rel_change=rel,
                            tau_p=tau, backtracks=backtracks)


def _split(flat: np.ndarray, geom):
    M = geom.M
    n = geom.n_x_faces
    return flat[:n].reshape(M + 1, M), flat[n:].reshape(M, M + 1)
