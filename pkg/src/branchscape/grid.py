"""Staggered (MAC) discretization of the square [-1, 1]^2.

Layout
------
The square is split into ``M x M`` cells of side ``h = 2 / M``. Scalars live at
cell centres (arrays of shape ``(M, M)``, first index along x). A vector field
stores its x-component on the x-normal faces, shape ``(M + 1, M)``, and its
y-component on the y-normal faces, shape ``(M, M + 1)``. The outer layer of
faces carries the no-flux condition and is held at zero.

All inner products are plain sums of products; the cell area ``h**2`` only
enters the energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridGeometry",
    "StaggeredField",
    "CellField",
    "CellVectorField",
    "divergence",
    "gradient",
    "interpolate_to_centers",
    "face_gradient_energy",
]


@dataclass(frozen=True)
class GridGeometry:
    """Uniform ``M x M`` grid on [-1, 1]^2."""

    M: int

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 2:
            raise ValueError(f"grid size M must be an integer >= 2, got {self.M!r}")

    @property
    def h(self) -> float:
        return 2.0 / self.M

    @property
    def n_x_faces(self) -> int:
        return (self.M + 1) * self.M

    @property
    def n_faces(self) -> int:
        return 2 * (self.M + 1) * self.M

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """1D coordinates of the cell centres along each axis."""
        c = -1.0 + (np.arange(self.M) + 0.5) * self.h
        return c, c.copy()

    def face_coordinates(self) -> np.ndarray:
        """1D coordinates of the face lines ``x = -1 + i h``, ``i = 0..M``."""
        return -1.0 + np.arange(self.M + 1) * self.h

    def cell_index(self, point) -> tuple[int, int]:
        """Index of the cell containing ``point`` (clipped to the grid)."""
        x, y = point
        i = int(np.clip(np.floor((x + 1.0) / self.h), 0, self.M - 1))
        j = int(np.clip(np.floor((y + 1.0) / self.h), 0, self.M - 1))
        return i, j

    def free_face_mask(self) -> np.ndarray:
        """Flat boolean mask of the faces that are actual unknowns."""
        M = self.M
        mx = np.ones((M + 1, M), dtype=bool)
        mx[0, :] = mx[M, :] = False
        my = np.ones((M, M + 1), dtype=bool)
        my[:, 0] = my[:, M] = False
        return np.concatenate([mx.ravel(), my.ravel()])


@dataclass
class StaggeredField:
    """Face-centred vector field backed by one contiguous buffer.

    ``vx`` and ``vy`` are reshaped views into ``data``, so in-place edits of
    either component are visible through ``data`` and vice versa.
    """

    geometry: GridGeometry
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=float)
        if self.data.shape != (self.geometry.n_faces,):
            raise ValueError(
                f"field buffer has shape {self.data.shape}, "
                f"expected ({self.geometry.n_faces},)"
            )

    @classmethod
    def zeros(cls, geometry: GridGeometry) -> "StaggeredField":
        return cls(geometry, np.zeros(geometry.n_faces))

    @classmethod
    def from_components(cls, vx, vy, geometry: GridGeometry | None = None,
                        enforce_boundary: bool = False) -> "StaggeredField":
        vx = np.asarray(vx, dtype=float)
        vy = np.asarray(vy, dtype=float)
        if geometry is None:
            geometry = GridGeometry(vx.shape[1])
        M = geometry.M
        if vx.shape != (M + 1, M) or vy.shape != (M, M + 1):
            raise ValueError(
                f"component shapes {vx.shape}, {vy.shape} do not match "
                f"M={M}: expected {(M + 1, M)} and {(M, M + 1)}"
            )
        out = cls(geometry, np.concatenate([vx.ravel(), vy.ravel()]))
        if enforce_boundary:
            out.enforce_boundary()
        return out

    @classmethod
    def random(cls, geometry: GridGeometry, rng: np.random.Generator,
               amplitude: float = 1.0) -> "StaggeredField":
        """Uniform values in ``[-amplitude, amplitude]`` on the free faces."""
        out = cls(geometry, rng.uniform(-amplitude, amplitude, geometry.n_faces))
        out.enforce_boundary()
        return out

    @property
    def vx(self) -> np.ndarray:
        M = self.geometry.M
        return self.data[: self.geometry.n_x_faces].reshape(M + 1, M)

    @property
    def vy(self) -> np.ndarray:
        M = self.geometry.M
        return self.data[self.geometry.n_x_faces:].reshape(M, M + 1)

    def enforce_boundary(self) -> "StaggeredField":
        vx, vy = self.vx, self.vy
        vx[0, :] = 0.0
        vx[-1, :] = 0.0
        vy[:, 0] = 0.0
        vy[:, -1] = 0.0
        return self

    def boundary_max(self) -> float:
        """Largest magnitude found on the no-flux boundary faces."""
        vx, vy = self.vx, self.vy
        return float(max(np.abs(vx[[0, -1], :]).max(), np.abs(vy[:, [0, -1]]).max()))

    def copy(self) -> "StaggeredField":
        return StaggeredField(self.geometry, self.data.copy())

    def dot(self, other: "StaggeredField") -> float:
        return float(np.dot(self.data, other.data))

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def _wrap(self, data):
        return StaggeredField(self.geometry, data)

    def __add__(self, other):
        return self._wrap(self.data + other.data)

    def __sub__(self, other):
        return self._wrap(self.data - other.data)

    def __mul__(self, c):
        return self._wrap(self.data * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.data)


@dataclass
class CellField:
    """Scalar field sampled at cell centres."""

    values: np.ndarray
    geometry: GridGeometry

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        M = self.geometry.M
        if self.values.shape != (M, M):
            raise ValueError(f"cell field has shape {self.values.shape}, expected {(M, M)}")

    @classmethod
    def zeros(cls, geometry: GridGeometry) -> "CellField":
        return cls(np.zeros((geometry.M, geometry.M)), geometry)

    def total(self) -> float:
        """Integral over the domain, i.e. ``sum(values) * h**2``."""
        return float(self.values.sum()) * self.geometry.h ** 2

    def copy(self) -> "CellField":
        return CellField(self.values.copy(), self.geometry)

    def dot(self, other: "CellField") -> float:
        return float(np.vdot(self.values, other.values))


@dataclass
class CellVectorField:
    x: np.ndarray
    y: np.ndarray
    geometry: GridGeometry

    def __post_init__(self):
        M = self.geometry.M
        if np.shape(self.x) != (M, M) or np.shape(self.y) != (M, M):
            raise ValueError("cell vector components must both have shape (M, M)")

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.x, self.y)


# Array-level kernels. The optimizer's inner loops call these directly on
# views to avoid re-wrapping.

def _div(vx: np.ndarray, vy: np.ndarray, h: float) -> np.ndarray:
    return (vx[1:, :] - vx[:-1, :] + vy[:, 1:] - vy[:, :-1]) / h


def _grad_into(u: np.ndarray, h: float, out: np.ndarray) -> np.ndarray:
    M = u.shape[0]
    n = (M + 1) * M
    gx = out[:n].reshape(M + 1, M)
    gy = out[n:].reshape(M, M + 1)
    gx[0, :] = 0.0
    gx[M, :] = 0.0
    np.subtract(u[1:, :], u[:-1, :], out=gx[1:M, :])
    gx[1:M, :] /= h
    gy[:, 0] = 0.0
    gy[:, M] = 0.0
    np.subtract(u[:, 1:], u[:, :-1], out=gy[:, 1:M])
    gy[:, 1:M] /= h
    return out


def _check_geometry(field_geom: GridGeometry, M: int):
    if field_geom.M != M:
        raise ValueError(f"geometry mismatch: {field_geom.M} vs {M}")


def divergence(V: StaggeredField) -> CellField:
    """Discrete divergence ``(vx[i+1,j]-vx[i,j])/h + (vy[i,j+1]-vy[i,j])/h``."""
    g = V.geometry
    return CellField(_div(V.vx, V.vy, g.h), g)


def gradient(U: CellField) -> StaggeredField:
    """Face-difference gradient of a cell field, zero on the boundary faces.

    This is exactly ``-divergence^T`` on fields with zero boundary faces.
    """
    g = U.geometry
    out = np.empty(g.n_faces)
    _grad_into(U.values, g.h, out)
    return StaggeredField(g, out)


def interpolate_to_centers(V: StaggeredField) -> CellVectorField:
    """Average the two faces bounding each cell, componentwise."""
    vx, vy = V.vx, V.vy
    return CellVectorField(0.5 * (vx[:-1, :] + vx[1:, :]),
                           0.5 * (vy[:, :-1] + vy[:, 1:]), V.geometry)


def face_gradient_energy(W: np.ndarray, h: float) -> float:
    """Sum of squared forward differences of one face component, over ``h**2``.

    Every difference between two neighbouring entries of ``W`` is counted once,
    along both array axes, so the sum is invariant under reflections of the
    grid.
    """
    W = np.asarray(W, dtype=float)
    d0 = np.diff(W, axis=0)
    d1 = np.diff(W, axis=1)
    return float((np.sum(d0 * d0) + np.sum(d1 * d1)) / (h * h))
