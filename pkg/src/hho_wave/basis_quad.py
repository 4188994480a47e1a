"""Orthonormal polynomial bases and quadrature on triangles and their edges.

Cell bases are orthonormalized scaled monomials (centered at the centroid,
scaled by the cell diameter), built by Cholesky factorization of the exact
Gram matrix in graded monomial order.  With that ordering the first
(m+1)(m+2)/2 functions of the degree-(k+1) basis form an orthonormal basis
of P^m for every m <= k+1, so a single basis serves all degrees.

Face bases are Legendre polynomials on the face parameter, scaled to be
orthonormal in L2(F).  Both cells adjacent to a face use the basis built
from the face's own stored vertex order, so face coefficients are globally
unambiguous.
"""

from __future__ import annotations

import numpy as np
from scipy.special import eval_legendre, roots_jacobi, roots_legendre

from .mesh import SimplicialMesh


def n_poly(m: int) -> int:
    """Dimension of P^m in two variables (0 for m < 0)."""
    return 0 if m < 0 else (m + 1) * (m + 2) // 2


def monomial_exponents(m: int) -> np.ndarray:
    """Exponent pairs of the 2D monomials up to total degree m, graded order."""
    out = [(i - j, j) for i in range(m + 1) for j in range(i + 1)]
    return np.asarray(out, dtype=np.int64)


def reference_triangle_rule(npts_1d: int):
    """Collapsed Gauss rule on {x,y>=0, x+y<=1}, exact to degree 2*npts_1d - 1.

    Tensorizes Gauss-Legendre in the collapsed direction with Gauss-Jacobi
    (weight 1-y) across, so the Duffy Jacobian is integrated exactly.
    """
    xg, wg = roots_legendre(npts_1d)
    u = 0.5 * (xg + 1.0)
    wu = 0.5 * wg
    xj, wj = roots_jacobi(npts_1d, 1.0, 0.0)
    v = 0.5 * (xj + 1.0)
    wv = 0.25 * wj  # absorbs the (1 - v) Duffy factor
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv)
    pts = np.stack([(U * (1.0 - V)).ravel(), V.ravel()], axis=1)
    return pts, W.ravel()


class CellBasis:
    """Orthonormal basis of P^degree on one triangle."""

    def __init__(self, vertices: np.ndarray, degree: int, quad_npts: int):
        self.degree = degree
        self.vertices = vertices
        self.exponents = monomial_exponents(degree)
        self.centroid = vertices.mean(axis=0)
        self.h = max(
            np.linalg.norm(vertices[i] - vertices[j])
            for i in range(3)
            for j in range(i + 1, 3)
        )
        ref_pts, ref_w = reference_triangle_rule(quad_npts)
        jac = np.stack([vertices[1] - vertices[0], vertices[2] - vertices[0]], axis=1)
        det = abs(np.linalg.det(jac))
        self.quad_points = vertices[0] + ref_pts @ jac.T
        self.quad_weights = ref_w * det
        self.volume = 0.5 * det

        vander = self._monomials(self.quad_points)
        gram = vander.T @ (vander * self.quad_weights[:, None])
        L = np.linalg.cholesky(gram)
        # phi = monomials @ coeff with upper-triangular coeff = inv(L).T
        self.coeff = np.linalg.inv(L).T
        self.values = vander @ self.coeff
        gx, gy = self._monomial_grads(self.quad_points)
        self.grads = np.stack([gx @ self.coeff, gy @ self.coeff], axis=0)

    def _local(self, pts):
        return (pts - self.centroid) / self.h

    def _monomials(self, pts):
        loc = self._local(np.atleast_2d(pts))
        px = loc[:, 0][:, None] ** self.exponents[:, 0][None, :]
        py = loc[:, 1][:, None] ** self.exponents[:, 1][None, :]
        return px * py

    def _monomial_grads(self, pts):
        loc = self._local(np.atleast_2d(pts))
        a = self.exponents[:, 0][None, :]
        b = self.exponents[:, 1][None, :]
        x = loc[:, 0][:, None]
        y = loc[:, 1][:, None]
        xa1 = np.where(a >= 1, x ** np.maximum(a - 1, 0), 0.0)
        yb1 = np.where(b >= 1, y ** np.maximum(b - 1, 0), 0.0)
        gx = a * xa1 * y**b / self.h
        gy = b * x**a * yb1 / self.h
        return gx, gy

    def eval(self, pts: np.ndarray, n: int | None = None) -> np.ndarray:
        """Basis values at arbitrary points; first ``n`` functions if given."""
        vals = self._monomials(pts) @ self.coeff
        return vals if n is None else vals[:, :n]

    def eval_grad(self, pts: np.ndarray, n: int | None = None) -> np.ndarray:
        gx, gy = self._monomial_grads(pts)
        g = np.stack([gx @ self.coeff, gy @ self.coeff], axis=0)
        return g if n is None else g[:, :, :n]


class FaceBasis:
    """Orthonormal basis of P^degree on one mesh face (straight segment)."""

    def __init__(self, a: np.ndarray, b: np.ndarray, degree: int, quad_npts: int):
        self.degree = degree
        self.a = a
        self.b = b
        self.length = float(np.linalg.norm(b - a))
        self.mid = 0.5 * (a + b)
        self.half = 0.5 * (b - a)
        xg, wg = roots_legendre(quad_npts)
        self.quad_points = self.mid + xg[:, None] * self.half[None, :]
        self.quad_weights = wg * 0.5 * self.length
        self.values = self._eval_param(xg)

    def _eval_param(self, t: np.ndarray) -> np.ndarray:
        js = np.arange(self.degree + 1)
        vals = np.stack([eval_legendre(j, t) for j in js], axis=1)
        return vals * np.sqrt((2 * js + 1) / self.length)[None, :]

    def eval(self, pts: np.ndarray) -> np.ndarray:
        """Basis values at physical points assumed to lie on the face."""
        rel = np.atleast_2d(pts) - self.mid
        t = rel @ self.half / (self.half @ self.half)
        return self._eval_param(t)


class BasisWorkspace:
    """Per-cell bundle: quadrature, volume basis up to k+1, face bases of degree k.

    ``face_cell_vals`` / ``face_cell_grads`` hold the volume basis (and its
    gradient) evaluated at the face quadrature points, which is all the local
    operator assembly needs.
    """

    def __init__(self, mesh: SimplicialMesh, cell: int, k: int, kp: int):
        if kp not in (k, k + 1):
            raise ValueError("cell degree must be k or k+1")
        self.cell = cell
        self.k = k
        self.kp = kp
        self.h = float(mesh.cell_diameters[cell])
        self.volume = float(mesh.cell_volumes[cell])
        nq = k + 3  # cell rule exact to 2k+5, face rule to 2k+5
        verts = mesh.vertices[mesh.cells[cell]]
        self.basis = CellBasis(verts, k + 1, nq)
        self.face_ids = mesh.cell_faces[cell]
        self.faces: list[FaceBasis] = []
        self.normals = np.empty((3, 2))
        self.face_cell_vals = []
        self.face_cell_grads = []
        for local, f in enumerate(self.face_ids):
            fa, fb = mesh.vertices[mesh.faces[f]]
            fb_basis = FaceBasis(fa, fb, k, nq)
            self.faces.append(fb_basis)
            self.normals[local] = mesh.face_normals[f] * mesh.face_orientation(f, cell)
            self.face_cell_vals.append(self.basis.eval(fb_basis.quad_points))
            self.face_cell_grads.append(self.basis.eval_grad(fb_basis.quad_points))

    # -- projections ----------------------------------------------------

    def project_cell(self, f, m: int) -> np.ndarray:
        """L2-projection coefficients of a callable onto P^m (componentwise if vector)."""
        n = n_poly(m)
        pts = self.basis.quad_points
        vals = np.asarray(f(pts))
        if n == 0:
            shape = (0,) if vals.ndim == 1 else (vals.shape[1], 0)
            return np.zeros(shape)
        phi = self.basis.values[:, :n]
        w = self.quad_w
        if vals.ndim == 1:
            return phi.T @ (w * vals)
        return np.stack([phi.T @ (w * vals[:, c]) for c in range(vals.shape[1])])

    def project_face(self, local: int, f) -> np.ndarray:
        """L2-projection coefficients of a callable onto P^k on one face."""
        fb = self.faces[local]
        vals = np.asarray(f(fb.quad_points))
        return fb.values.T @ (fb.quad_weights * vals)

    def elliptic_project(self, v, grad_v) -> np.ndarray:
        """Elliptic projection onto P^{k+1}: gradients matched, mean preserved."""
        w = self.quad_w
        g = self.basis.grads  # (2, nq, N)
        K = np.einsum("q,cqa,cqb->ab", w, g, g)
        gv = np.asarray(grad_v(self.basis.quad_points))  # (nq, 2)
        rhs = np.einsum("q,cqa,qc->a", w, g, gv)
        n1 = K.shape[0]
        coeffs = np.zeros(n1)
        coeffs[1:] = np.linalg.solve(K[1:, 1:], rhs[1:])
        # constant basis function is 1/sqrt(|T|): mean constraint fixes coeff 0
        vv = np.asarray(v(self.basis.quad_points))
        coeffs[0] = self.basis.values[:, 0] @ (w * vv)
        return coeffs

    @property
    def quad_w(self) -> np.ndarray:
        return self.basis.quad_weights


def build_workspaces(mesh: SimplicialMesh, k: int, kp: int) -> list[BasisWorkspace]:
    return [BasisWorkspace(mesh, t, k, kp) for t in range(mesh.n_cells)]
