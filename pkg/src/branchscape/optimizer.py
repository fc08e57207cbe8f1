"""Proximal L-BFGS descent on the phase-field energy under the divergence box."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .energy import SolverConfig, objective, objective_and_gradient
from .grid import CellField, StaggeredField
from .lbfgs import LbfgsHistory, lbfgs_multiply, lbfgs_update
from .projection import BoxBounds, project

__all__ = ["RunReport", "solve", "initial_field", "LbfgsHistory", "lbfgs_multiply",
           "lbfgs_update"]

logger = logging.getLogger(__name__)

ARMIJO_C = 1e-4
TAU_MIN_FACTOR = 1e-12


@dataclass
class RunReport:
    """History of a run; ``energies[k]`` belongs to accepted iteration ``k + 1``."""

    initial_energy: float = float("nan")
    energies: list[float] = field(default_factory=list)
    step_sizes: list[float] = field(default_factory=list)
    violations: list[float] = field(default_factory=list)
    projection_flags: list[bool] = field(default_factory=list)
    projection_iterations: list[int] = field(default_factory=list)
    final_error: float = float("inf")
    iterations: int = 0
    status: str = "running"
    u: CellField | None = None

    @property
    def final_energy(self) -> float:
        return self.energies[-1] if self.energies else self.initial_energy

    @property
    def final_violation(self) -> float:
        return self.violations[-1] if self.violations else float("nan")


def initial_field(cfg: SolverConfig) -> StaggeredField:
    """Uniform noise of amplitude ``cfg.init_amplitude`` on the free faces."""
    rng = np.random.default_rng(cfg.seed)
    return StaggeredField.random(cfg.geometry, rng, cfg.init_amplitude)


def solve(cfg: SolverConfig, V0: StaggeredField | None, delta: CellField | None = None,
          *, bounds: BoxBounds | None = None, u0: CellField | None = None,
          callback=None) -> tuple[StaggeredField, RunReport]:
    """Minimise the energy over ``{a <= div V <= b}``.

    Each outer iteration takes the quasi-Newton direction ``H^-1 grad F(V)``,
    projects ``V - tau H^-1 grad F(V)`` back on the constraint set in the
    ``H`` norm and halves ``tau`` (starting again from ``tau0``) until the
    energy decreases. The loop stops when the relative energy change falls
    below ``cfg.tol`` (status ``"converged"``), when ``cfg.max_iter``
    iterations are done (``"max_iter"``) or when the step collapses below
    ``1e-12 tau0`` (``"stalled"``).

    ``V0`` is first projected with the identity metric so that the descent
    starts from an admissible field; ``None`` draws it from ``cfg.seed``.
    ``bounds`` defaults to ``make_bounds(delta)``. ``callback(k, V, report)``
    is called after every accepted iteration.
    """
    if bounds is None:
        if delta is None:
            raise ValueError("either delta or bounds is required")
        from .problem import make_bounds
        bounds = make_bounds(delta)
    if V0 is None:
        V0 = initial_field(cfg)
    if V0.geometry.M != cfg.M:
        raise ValueError(f"initial field has M={V0.geometry.M}, config has M={cfg.M}")
    V0 = V0.copy().enforce_boundary()

    hist = LbfgsHistory(cfg.L)
    report = RunReport()
    proj = project(V0, u0, bounds, hist, cfg)
    V, u = proj.V, proj.u
    F, g = objective_and_gradient(V, cfg)
    report.initial_energy = F
    tau_p = proj.tau_p
    tau_min = TAU_MIN_FACTOR * cfg.tau0

    if cfg.max_iter == 0:
        report.status = "max_iter"
    while report.iterations < cfg.max_iter:
        direction = lbfgs_multiply(hist, g)
        tau = cfg.tau0
        accepted = None
        while tau >= tau_min:
            trial = V - tau * direction
            res = project(trial, u, bounds, hist, cfg, tau_p=tau_p)
            # the metric is fixed during the line search, keep the shrunk step
            tau_p = res.tau_p
            u = res.u
            F_trial = objective(res.V, cfg)
            if cfg.armijo:
                ok = F_trial <= F + ARMIJO_C * g.dot(res.V - V)
            else:
                ok = F_trial < F
            if ok:
                accepted = (res, F_trial, tau)
                break
            tau *= 0.5
        if accepted is None:
            report.status = "stalled"
            logger.info("line search stalled at iteration %d", report.iterations)
            break
        res, F_new, tau = accepted
        V_new = res.V
        F_new, g_new = objective_and_gradient(V_new, cfg)
        lbfgs_update(hist, V_new, V, g_new, g)
        error = abs(F - F_new) / max(abs(F), 1e-300)
        V, F, g = V_new, F_new, g_new
        report.iterations += 1
        report.energies.append(F)
        report.step_sizes.append(tau)
        report.violations.append(res.violation)
        report.projection_flags.append(res.converged)
        report.projection_iterations.append(res.iterations)
        report.final_error = error
        # the metric just changed: restart the FISTA step from its default
        tau_p = None if cfg.tau_p is None else cfg.tau_p
        if callback is not None:
            callback(report.iterations, V, report)
        if error < cfg.tol:
            report.status = "converged"
            break
    else:
        if report.status == "running":
            report.status = "max_iter"
    report.u = u
    return V, report
