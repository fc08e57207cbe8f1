"""Exact branched transport on small trees.

A tree carries mass from its root to masses sitting at its nodes. Each edge is
stored with its child node: ``theta[i]`` is the mass flowing from
``parent[i]`` to ``i`` and ``length[i]`` the edge length. Moving mass ``m``
over a length ``l`` costs ``m**alpha * l``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "IrrigationTree",
    "EdgeFlow",
    "tree_multiplicities",
    "gilbert_cost",
    "tree_landscape",
    "optimal_y",
    "y_tree",
    "y_angle_from_masses",
    "branch_angle",
    "force_balance",
    "random_tree",
]


@dataclass
class IrrigationTree:
    """Rooted tree in the plane.

    Attributes
    ----------
    positions : (n, 2) array
    parent : (n,) int array, ``-1`` at the root only
    masses : (n,) array of nonnegative masses delivered at each node
        (normally nonzero at leaves only)
    """

    positions: np.ndarray
    parent: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.parent = np.asarray(self.parent, dtype=int)
        self.masses = np.asarray(self.masses, dtype=float)
        n = len(self.positions)
        if self.parent.shape != (n,) or self.masses.shape != (n,):
            raise ValueError("positions, parent and masses must have matching lengths")
        if np.any(self.masses < 0):
            raise ValueError("masses must be nonnegative")
        roots = np.flatnonzero(self.parent < 0)
        if len(roots) != 1:
            raise ValueError(f"a tree needs exactly one root, found {len(roots)}")
        if np.any(self.parent >= n):
            raise ValueError("parent index out of range")
        self.root = int(roots[0])
        self.order = self._topological_order()

    def _topological_order(self) -> np.ndarray:
        n = len(self.parent)
        children = [[] for _ in range(n)]
        for i, p in enumerate(self.parent):
            if p >= 0:
                children[p].append(i)
        order = [self.root]
        k = 0
        while k < len(order):
            order.extend(children[order[k]])
            k += 1
        if len(order) != n:
            raise ValueError("parent links contain a cycle or a disconnected part")
        return np.array(order)

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def scaled(self, length_factor: float, mass_factor: float) -> "IrrigationTree":
        root_pos = self.positions[self.root]
        pos = root_pos + length_factor * (self.positions - root_pos)
        return IrrigationTree(pos, self.parent.copy(), mass_factor * self.masses)


@dataclass
class EdgeFlow:
    """Per-node edge data; the root entry has zero length and the total mass."""

    theta: np.ndarray
    length: np.ndarray


def tree_multiplicities(tree: IrrigationTree) -> EdgeFlow:
    """Mass through every edge, accumulated leaves-to-root in one pass."""
    theta = tree.masses.copy()
    for i in tree.order[:0:-1]:
        theta[tree.parent[i]] += theta[i]
    length = np.zeros(len(theta))
    child = tree.order[1:]
    length[child] = np.linalg.norm(
        tree.positions[child] - tree.positions[tree.parent[child]], axis=1)
    return EdgeFlow(theta=theta, length=length)


def _weight(theta: float, length: float, alpha: float) -> float:
    # theta**(alpha - 1) * length with 0**(alpha - 1) = inf (alpha < 1) and inf * 0 = 0
    if length == 0.0:
        return 0.0
    if theta == 0.0:
        return math.inf if alpha < 1.0 else length
    return theta ** (alpha - 1.0) * length


def gilbert_cost(tree: IrrigationTree, alpha: float) -> float:
    """``sum_e theta_e**alpha * length_e``."""
    flow = tree_multiplicities(tree)
    edges = tree.order[1:]
    return float(np.sum(flow.theta[edges] ** alpha * flow.length[edges]))


def tree_landscape(tree: IrrigationTree, alpha: float) -> np.ndarray:
    """``z(node) = sum over root-path edges of theta**(alpha - 1) * length``.

    Nodes reached through an edge of zero mass get ``inf``.
    """
    flow = tree_multiplicities(tree)
    z = np.zeros(len(flow.theta))
    for i in tree.order[1:]:
        z[i] = z[tree.parent[i]] + _weight(flow.theta[i], flow.length[i], alpha)
    return z


def y_tree(source, sinks, masses, branch) -> IrrigationTree:
    """Tree ``source -> branch -> (sink_1, sink_2)``."""
    pos = np.vstack([source, branch, sinks[0], sinks[1]])
    return IrrigationTree(pos, [-1, 0, 1, 1], [0.0, 0.0, masses[0], masses[1]])


def _ternary(f, lo: float, hi: float, iters: int) -> float:
    for _ in range(iters):
        if hi - lo <= 1e-15 * max(1.0, abs(lo) + abs(hi)):
            break
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if f(m1) <= f(m2):
            hi = m2
        else:
            lo = m1
    return 0.5 * (lo + hi)


def optimal_y(source, sinks, masses, alpha: float, iters: int = 200):
    """Best branch point for one source feeding two sinks.

    The cost is a weighted sum of distances, hence convex in the branch point.
    A ternary search over ``y`` nested in a ternary search over ``x`` covers
    the terminals' bounding box enlarged by 10 %; the branch point may end up
    on a terminal.

    Returns
    -------
    branch : (2,) array
    cost : float
    """
    source = np.asarray(source, dtype=float)
    sinks = np.asarray(sinks, dtype=float).reshape(2, 2)
    m1, m2 = (float(m) for m in masses)
    if not (m1 > 0 and m2 > 0):
        raise ValueError("sink masses must be positive")
    w0, w1, w2 = (m1 + m2) ** alpha, m1 ** alpha, m2 ** alpha
    (sx, sy), (ax, ay), (bx, by) = source, sinks[0], sinks[1]

    def cost(x, y):
        return (w0 * math.hypot(x - sx, y - sy) + w1 * math.hypot(x - ax, y - ay)
                + w2 * math.hypot(x - bx, y - by))

    pts = np.vstack([source, sinks])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 0.1 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    def best_y(x):
        return _ternary(lambda y: cost(x, y), lo[1], hi[1], iters)

    x = _ternary(lambda x: cost(x, best_y(x)), lo[0], hi[0], iters)
    y = best_y(x)
    return np.array([x, y]), cost(x, y)


def y_angle_from_masses(m1: float, m2: float, alpha: float) -> float:
    """Angle (radians) between the two branches of a balanced Y junction."""
    a, b, c = m1 ** alpha, m2 ** alpha, (m1 + m2) ** alpha
    return math.acos(max(-1.0, min(1.0, (c * c - a * a - b * b) / (2.0 * a * b))))


def branch_angle(branch, sinks) -> float:
    """Angle (radians) at ``branch`` between the directions to the two sinks."""
    u = np.asarray(sinks[0], float) - branch
    v = np.asarray(sinks[1], float) - branch
    c = float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
    return math.acos(max(-1.0, min(1.0, c)))


def force_balance(branch, source, sinks, masses, alpha: float) -> np.ndarray:
    """Sum of unit edge directions at the branch point weighted by ``theta**alpha``."""
    total = float(masses[0] + masses[1])
    out = np.zeros(2)
    for p, m in ((source, total), (sinks[0], masses[0]), (sinks[1], masses[1])):
        d = np.asarray(p, float) - branch
        out += m ** alpha * d / np.linalg.norm(d)
    return out


def random_tree(rng: np.random.Generator, n_leaves: int, n_internal: int | None = None,
                total_mass: float = 1.0) -> IrrigationTree:
    """Random tree rooted at the origin with mass only on its leaves."""
    if n_internal is None:
        n_internal = max(1, n_leaves // 2)
    n = 1 + n_internal + n_leaves
    parent = np.full(n, -1)
    for i in range(1, 1 + n_internal):
        parent[i] = rng.integers(0, i)
    for i in range(1 + n_internal, n):
        parent[i] = rng.integers(0, 1 + n_internal)
    positions = np.zeros((n, 2))
    for i in range(1, n):
        positions[i] = positions[parent[i]] + rng.normal(size=2)
    masses = np.zeros(n)
    w = rng.uniform(0.1, 1.0, n_leaves)
    masses[1 + n_internal:] = total_mass * w / w.sum()
    return IrrigationTree(positions, parent, masses)
