import math

import numpy as np
import pytest

from hho_wave.basis_quad import (
    BasisWorkspace,
    build_workspaces,
    monomial_exponents,
    n_poly,
    reference_triangle_rule,
)
from hho_wave.mesh import build_structured


def reference_moment(a: int, b: int) -> float:
    """Exact integral of x^a y^b over the unit reference triangle."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@pytest.mark.parametrize("npts", [2, 3, 5])
def test_reference_rule_exactness(npts):
    pts, w = reference_triangle_rule(npts)
    deg = 2 * npts - 1
    for a in range(deg + 1):
        for b in range(deg + 1 - a):
            got = float(w @ (pts[:, 0] ** a * pts[:, 1] ** b))
            assert got == pytest.approx(reference_moment(a, b), abs=1e-15, rel=1e-13)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_cell_basis_orthonormal(k):
    mesh = build_structured(2)
    for ws in build_workspaces(mesh, k, k):
        V = ws.basis.values
        G = V.T @ (ws.quad_w[:, None] * V)
        assert np.abs(G - np.eye(G.shape[0])).max() < 1e-12


def test_cell_basis_nested():
    """First n_poly(m) functions stay orthonormal in P^m for every m <= k+1."""
    mesh = build_structured(1)
    ws = BasisWorkspace(mesh, 0, 3, 3)
    expo = monomial_exponents(4)
    for m in range(4):
        n = n_poly(m)
        # upper-triangular change of basis: phi_j only uses monomials of
        # degree <= deg(monomial_j), so the leading block spans P^m
        assert np.abs(ws.basis.coeff[n:, :n]).max() == 0.0
        assert np.all(expo[:n].sum(axis=1) <= m)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_face_basis_orthonormal(k):
    mesh = build_structured(2)
    ws = BasisWorkspace(mesh, 1, k, k)
    for fb in ws.faces:
        G = fb.values.T @ (fb.quad_weights[:, None] * fb.values)
        assert np.abs(G - np.eye(k + 1)).max() < 1e-12


def test_face_eval_matches_quadrature_values():
    mesh = build_structured(2)
    ws = BasisWorkspace(mesh, 2, 2, 2)
    for fb in ws.faces:
        assert np.allclose(fb.eval(fb.quad_points), fb.values, atol=1e-12)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_projection_reproduces_polynomials(k):
    mesh = build_structured(2)
    rng = np.random.default_rng(5)
    c = rng.standard_normal((k + 1, k + 1))
    for i in range(k + 1):
        for j in range(k + 1):
            if i + j > k:
                c[i, j] = 0.0

    def poly(p):
        return np.polynomial.polynomial.polyval2d(p[:, 0], p[:, 1], c)

    for ws in build_workspaces(mesh, k, k)[:3]:
        coeffs = ws.project_cell(poly, k)
        vals = ws.basis.values[:, : n_poly(k)] @ coeffs
        assert np.abs(vals - poly(ws.basis.quad_points)).max() < 1e-12


def test_projection_vector_valued():
    mesh = build_structured(1)
    ws = BasisWorkspace(mesh, 1, 1, 1)
    coeffs = ws.project_cell(lambda p: np.stack([p[:, 0], 2.0 * p[:, 1]], axis=1), 1)
    assert coeffs.shape == (2, n_poly(1))


def test_elliptic_projection():
    """Gradient moments against P^{k+1} gradients match; mean preserved."""
    mesh = build_structured(2)
    ws = BasisWorkspace(mesh, 2, 2, 2)

    def v(p):
        return np.sin(p[:, 0]) * np.cos(p[:, 1])

    def gv(p):
        return np.stack([np.cos(p[:, 0]) * np.cos(p[:, 1]),
                         -np.sin(p[:, 0]) * np.sin(p[:, 1])], axis=1)

    c = ws.elliptic_project(v, gv)
    w = ws.quad_w
    g = ws.basis.grads
    gh = np.einsum("cqa,a->qc", g, c)
    defect = np.einsum("q,qc,cqa->a", w, gh - gv(ws.basis.quad_points), g)
    assert np.abs(defect).max() < 1e-12
    mean_h = ws.basis.values[:, 0] @ (w * (ws.basis.values @ c))
    mean_v = ws.basis.values[:, 0] @ (w * v(ws.basis.quad_points))
    assert abs(mean_h - mean_v) < 1e-13


def test_workspace_degree_validation():
    mesh = build_structured(1)
    with pytest.raises(ValueError):
        BasisWorkspace(mesh, 0, 1, 3)
