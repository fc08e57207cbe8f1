"""Limited-memory BFGS inverse metric (two-loop recursion)."""

from __future__ import annotations

from collections import deque

import numpy as np
import scipy.linalg

from .grid import StaggeredField

__all__ = ["LbfgsHistory", "lbfgs_multiply", "lbfgs_update", "CURVATURE_EPS"]

CURVATURE_EPS = 1e-10


class LbfgsHistory:
    """Ring buffer of at most ``L`` curvature pairs ``(Z, Y, r = 1 / Y.Z)``.

    ``Z`` is a step between accepted iterates and ``Y`` the matching change of
    gradient; both are flat float arrays. Index 0 is the oldest pair. An
    empty history stands for the identity metric.
    """

    def __init__(self, L: int, curvature_eps: float = CURVATURE_EPS):
        if L < 1:
            raise ValueError(f"history length must be >= 1, got {L}")
        self.L = int(L)
        self.curvature_eps = float(curvature_eps)
        self._pairs: deque[tuple[np.ndarray, np.ndarray, float]] = deque(maxlen=self.L)
        self._compact = None

    def __len__(self) -> int:
        return len(self._pairs)

    @property
    def pairs(self) -> list[tuple[np.ndarray, np.ndarray, float]]:
        return list(self._pairs)

    @property
    def scaling(self) -> float:
        """Central scaling ``(Z_L . Y_L) / (Y_L . Y_L)`` of the newest pair."""
        if not self._pairs:
            return 1.0
        z, y, r = self._pairs[-1]
        return 1.0 / (r * float(np.dot(y, y)))

    def clear(self):
        self._pairs.clear()
        self._compact = None

    def push(self, z, y) -> bool:
        """Store ``(z, y)`` unless its curvature ``y.z`` is too small."""
        z = np.array(z, dtype=float).ravel()
        y = np.array(y, dtype=float).ravel()
        yz = float(np.dot(y, z))
        scale = float(np.linalg.norm(y) * np.linalg.norm(z))
        if not (scale > 0.0 and yz > self.curvature_eps * scale):
            return False
        self._pairs.append((z, y, 1.0 / yz))
        self._compact = None
        return True

    def update(self, V_new, V_old, G_new, G_old) -> bool:
        return self.push(_flat(V_new) - _flat(V_old), _flat(G_new) - _flat(G_old))

    def multiply(self, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Apply the inverse metric to a flat array."""
        g = np.array(x, dtype=float, copy=True) if out is None else _copy_into(out, x)
        pairs = self._pairs
        if not pairs:
            return g
        s = [0.0] * len(pairs)
        for i in range(len(pairs) - 1, -1, -1):
            z, y, r = pairs[i]
            s[i] = r * float(np.dot(z, g))
            g -= s[i] * y
        g *= self.scaling
        for i, (z, y, r) in enumerate(pairs):
            t = r * float(np.dot(y, g))
            g += (s[i] - t) * z
        return g

    def compact(self) -> "CompactInverse":
        """Same operator as :meth:`multiply` in compact matrix form (cached)."""
        if self._compact is None:
            self._compact = CompactInverse(self)
        return self._compact

    def dense_inverse(self, n: int) -> np.ndarray:
        """Materialise the ``n x n`` inverse metric (small problems only)."""
        return np.column_stack([self.multiply(e) for e in np.eye(n)])


class CompactInverse:
    """``H^-1 x = gamma x + W^T K W x`` with ``W = [Z; gamma Y]``.

    Byrd, Nocedal and Schnabel's compact form of the two-loop operator. With
    the pairs frozen it needs two dense matrix-vector products instead of
    ``4 L`` vector operations, which pays off when one metric is applied many
    times in a row.
    """

    def __init__(self, hist: LbfgsHistory):
        self.gamma = hist.scaling
        pairs = hist.pairs
        self.empty = not pairs
        if self.empty:
            return
        Z = np.array([p[0] for p in pairs])
        Y = np.array([p[1] for p in pairs])
        L = len(pairs)
        ZY = Z @ Y.T
        with np.errstate(all="ignore"):
            R_inv = scipy.linalg.solve_triangular(np.triu(ZY), np.eye(L))
        D = np.diag(np.diag(ZY))
        K = np.zeros((2 * L, 2 * L))
        K[:L, :L] = R_inv.T @ (D + self.gamma * (Y @ Y.T)) @ R_inv
        K[:L, L:] = -R_inv.T
        K[L:, :L] = -R_inv
        self.K = K
        self.W = np.vstack([Z, self.gamma * Y])
        # badly conditioned pair sets fall back to the two-loop recursion
        self._fallback = None if np.all(np.isfinite(K)) else hist.multiply

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.empty:
            return np.array(x, dtype=float, copy=True)
        if self._fallback is not None:
            return self._fallback(x)
        out = self.W.T @ (self.K @ (self.W @ x))
        out += self.gamma * x
        return out


def _flat(v) -> np.ndarray:
    return v.data if isinstance(v, StaggeredField) else np.asarray(v, dtype=float).ravel()


def _copy_into(out, x):
    out[...] = x
    return out


def lbfgs_multiply(hist: LbfgsHistory, X):
    """Two-loop recursion ``H^-1 X``; accepts a field or a flat array."""
    if isinstance(X, StaggeredField):
        return StaggeredField(X.geometry, hist.multiply(X.data))
    return hist.multiply(np.asarray(X, dtype=float))


def lbfgs_update(hist: LbfgsHistory, V_new, V_old, G_new, G_old) -> LbfgsHistory:
    hist.update(V_new, V_old, G_new, G_old)
    return hist
