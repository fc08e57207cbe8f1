import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from branchscape.grid import (CellField, GridGeometry, StaggeredField, divergence,
                              face_gradient_energy, gradient, interpolate_to_centers)
from oracles import divergence_matrix


def test_zero_field_has_zero_divergence():
    g = GridGeometry(5)
    assert np.all(divergence(StaggeredField.zeros(g)).values == 0)


def test_single_face_divergence():
    g = GridGeometry(2)
    vx = np.zeros((3, 2))
    vx[1, 0] = 1.0
    V = StaggeredField.from_components(vx, np.zeros((2, 3)))
    d = divergence(V).values
    assert d[0, 0] == pytest.approx(1 / g.h)
    assert d[1, 0] == pytest.approx(-1 / g.h)
    assert d[0, 1] == 0 and d[1, 1] == 0


def test_divergence_matches_dense_matrix():
    g = GridGeometry(5)
    V = StaggeredField.random(g, np.random.default_rng(0))
    np.testing.assert_allclose(divergence(V).values.ravel(), divergence_matrix(g) @ V.data,
                               rtol=1e-13, atol=1e-13)


def test_gradient_of_constant_and_affine():
    g = GridGeometry(6)
    assert np.all(gradient(CellField(np.full((6, 6), 3.0), g)).data == 0)
    x, _ = g.cell_centers()
    G = gradient(CellField(np.repeat(x[:, None], 6, axis=1), g))
    np.testing.assert_allclose(G.vx[1:-1], 1.0, rtol=1e-12)
    assert np.all(G.vx[[0, -1]] == 0)
    np.testing.assert_allclose(G.vy, 0.0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(M=st.integers(2, 12), seed=st.integers(0, 2**32 - 1))
def test_adjointness_and_conservation(M, seed):
    rng = np.random.default_rng(seed)
    g = GridGeometry(M)
    V = StaggeredField.random(g, rng)
    U = CellField(rng.normal(size=(M, M)), g)
    lhs = gradient(U).dot(V)
    rhs = -U.dot(divergence(V))
    scale = np.linalg.norm(gradient(U).data) * V.norm()
    assert abs(lhs - rhs) <= 1e-12 * scale
    d = divergence(V).values
    assert abs(d.sum()) <= 1e-12 * np.abs(d).sum()


def test_interpolation():
    g = GridGeometry(4)
    assert np.all(interpolate_to_centers(StaggeredField.zeros(g)).magnitude() == 0)
    V = StaggeredField.from_components(np.full((5, 4), 2.5), np.zeros((4, 5)))
    np.testing.assert_allclose(interpolate_to_centers(V).x, 2.5)
    vx = np.zeros((3, 2))
    vx[1, 0] = 2.0
    c = interpolate_to_centers(StaggeredField.from_components(vx, np.zeros((2, 3))))
    assert c.x[0, 0] == 1.0


def test_face_gradient_energy():
    h = 0.25
    assert face_gradient_energy(np.full((5, 4), 1.3), h) == 0
    coords = np.arange(5)[:, None] * h + np.zeros((5, 4))
    # 4 x 4 stencils along axis 0, each difference equal to h
    assert face_gradient_energy(coords, h) == pytest.approx(16.0)
    W = np.random.default_rng(1).normal(size=(7, 6))
    naive = 0.0
    for i in range(7):
        for j in range(6):
            if i < 6:
                naive += ((W[i + 1, j] - W[i, j]) / h) ** 2
            if j < 5:
                naive += ((W[i, j + 1] - W[i, j]) / h) ** 2
    assert face_gradient_energy(W, h) == pytest.approx(naive, rel=1e-12)


def test_field_views_share_buffer():
    g = GridGeometry(3)
    V = StaggeredField.zeros(g)
    V.vx[1, 1] = 4.0
    V.vy[2, 1] = -1.0
    assert V.data[1 * 3 + 1] == 4.0
    assert V.data[g.n_x_faces + 2 * 4 + 1] == -1.0


def test_enforce_boundary_and_validation():
    g = GridGeometry(3)
    V = StaggeredField(g, np.ones(g.n_faces)).enforce_boundary()
    assert V.boundary_max() == 0
    assert V.data.sum() == 2 * 2 * 3
    with pytest.raises(ValueError):
        StaggeredField(g, np.ones(5))
    with pytest.raises(ValueError):
        StaggeredField.from_components(np.zeros((3, 3)), np.zeros((3, 4)))
    with pytest.raises(ValueError):
        GridGeometry(1)


def test_cell_index():
    g = GridGeometry(4)
    assert g.cell_index((0.0, 0.0)) == (2, 2)
    assert g.cell_index((-1.0, 1.0)) == (0, 3)
