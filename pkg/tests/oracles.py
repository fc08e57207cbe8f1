"""Independent reference implementations used only by the tests."""

import numpy as np
from scipy.optimize import minimize

from branchscape.grid import GridGeometry


def divergence_matrix(geom: GridGeometry) -> np.ndarray:
    """Dense divergence on the flat face buffer, built entry by entry."""
    M, h = geom.M, geom.h
    nx = geom.n_x_faces
    D = np.zeros((M * M, geom.n_faces))
    for i in range(M):
        for j in range(M):
            row = i * M + j
            D[row, (i + 1) * M + j] += 1.0 / h
            D[row, i * M + j] -= 1.0 / h
            D[row, nx + i * (M + 1) + j + 1] += 1.0 / h
            D[row, nx + i * (M + 1) + j] -= 1.0 / h
    return D


def naive_energy(vx, vy, cfg) -> float:
    """Double-loop evaluation of the phase-field energy."""
    M = cfg.M
    h = 2.0 / M
    mass = 0.0
    for i in range(M):
        for j in range(M):
            x = 0.5 * (vx[i, j] + vx[i + 1, j])
            y = 0.5 * (vy[i, j] + vy[i, j + 1])
            mass += (x * x + y * y + cfg.eps_s ** 2) ** (cfg.sigma / 2)
    dirichlet = 0.0
    for W in (vx, vy):
        n0, n1 = W.shape
        for i in range(n0):
            for j in range(n1):
                if i + 1 < n0:
                    dirichlet += ((W[i + 1, j] - W[i, j]) / h) ** 2
                if j + 1 < n1:
                    dirichlet += ((W[i, j + 1] - W[i, j]) / h) ** 2
    return (cfg.eps ** (-cfg.sigma1) * h * h * mass
            + cfg.eps ** cfg.sigma2 * h * h / 2 * dirichlet)


def brute_force_projection(V0: np.ndarray, a: np.ndarray, b: np.ndarray,
                           geom: GridGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Euclidean projection of ``V0`` on ``{a <= D V <= b}`` over the free faces.

    SLSQP finds the active set, then the equality-constrained problem on that
    set is solved exactly. Returns the projected field and the multiplier
    ``u = mu_b - mu_a`` (so that ``V = V0 - D^T u``).
    """
    free = geom.free_face_mask()
    D = divergence_matrix(geom)[:, free]
    x0 = V0[free]
    lo, hi = a.ravel(), b.ravel()
    cons = [{"type": "ineq", "fun": lambda x: D @ x - lo, "jac": lambda x: D},
            {"type": "ineq", "fun": lambda x: hi - D @ x, "jac": lambda x: -D}]
    res = minimize(lambda x: 0.5 * np.dot(x - x0, x - x0), x0, jac=lambda x: x - x0,
                   constraints=cons, method="SLSQP",
                   options={"ftol": 1e-15, "maxiter": 2000})
    d = D @ res.x
    scale = max(1.0, np.max(np.abs(hi)))
    upper = np.abs(d - hi) < 1e-6 * scale
    lower = np.abs(d - lo) < 1e-6 * scale
    active = upper | lower
    target = np.where(upper, hi, lo)[active]
    DA = D[active]
    lam, *_ = np.linalg.lstsq(DA @ DA.T, DA @ x0 - target, rcond=None)
    x = x0 - DA.T @ lam
    V = np.zeros_like(V0)
    V[free] = x
    u = np.zeros(len(lo))
    u[active] = lam
    return V, u.reshape(a.shape)


def dense_bfgs_inverse(pairs, n: int) -> np.ndarray:
    """BFGS inverse update applied to ``gamma I``, oldest pair first.

    ``gamma`` is the scaling of the newest pair, as in L-BFGS.
    """
    z, y = pairs[-1]
    H = np.eye(n) * (z @ y) / (y @ y)
    for z, y in pairs:
        r = 1.0 / (y @ z)
        E = np.eye(n) - r * np.outer(z, y)
        H = E @ H @ E.T + r * np.outer(z, z)
    return H


def spd_matrix(rng: np.random.Generator, n: int, cond: float = 50.0) -> np.ndarray:
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    eig = np.geomspace(1.0, cond, n)
    return Q @ np.diag(eig) @ Q.T
