"""Global semi-discrete wave operator with static condensation of face unknowns.

The face unknowns carry no time derivative: testing the primal equation with
pure face functions yields an algebraic constraint whose (time-independent,
symmetric positive definite) matrix is factored once per mesh and reused in
every right-hand-side evaluation.  Boundary faces are eliminated from the
global indexing altogether (homogeneous Dirichlet data on the primal trace).

Global dof layout: sigma coefficients cell by cell (component-major inside
a cell), then primal cell coefficients cell by cell, then primal face
coefficients over interior faces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis_quad import BasisWorkspace, n_poly
from .h_interp import h_interpolate
from .local_ops import LocalOperatorPack
from .mesh import SimplicialMesh


@dataclass
class HybridField:
    """Coefficient triple (sigma, v_cell, v_face); boundary faces are exact zeros."""

    sigma: np.ndarray  # (n_cells, 2, Nk)
    vee_cell: np.ndarray  # (n_cells, Nkp)
    vee_face: np.ndarray  # (n_interior_faces, k+1)


class SkeletonSolver:
    """Reusable solve of the face-face block of the stabilization form.

    Mixed-order: the block is diagonal per interior face (the stabilization
    of one cell contributes a multiple of the identity on each of its
    faces); the small blocks are inverted up front and applied batched.

    Equal-order: the block is only positive *semi*-definite.  The
    stabilization vanishes on interpolates of degree-(k+1) polynomials, so
    pairs (0, trace of p) with p in P^{k+1} and L2-orthogonal to P^k lie in
    its kernel; globally these glue into a kernel of dimension equal to the
    number of interior mesh vertices.  The face equation then determines
    v_F only up to this kernel.  We factor a tiny diagonal shift of the
    block once (SuperLU), deflate right-hand sides against the kernel, and
    recover machine precision on the range with one step of iterative
    refinement.  The kernel basis itself is computed once per mesh by block
    inverse iteration with the same factorization.  The kernel component of
    v_F is fixed separately (see WaveOperator.solve_faces): the time
    derivative of sigma must keep the normal-flux jumps orthogonal to the
    kernel traces, otherwise the face equation would drift out of
    consistency.
    """

    def __init__(self, Kff: sp.spmatrix, A_face: sp.spmatrix, variant: str,
                 n_faces: int, block: int, kernel_guess: int = 0):
        self.variant = variant
        self.block = block
        self.n = Kff.shape[0]
        asym = abs(Kff - Kff.T).max() if Kff.nnz else 0.0
        scale = abs(Kff).max() if Kff.nnz else 1.0
        if asym > 1e-13 * max(1.0, scale):
            raise ValueError("face matrix is not symmetric")
        if variant == "mixed":
            self._init_block_diagonal(Kff.tocsr(), n_faces, block)
            self.kernel = np.zeros((self.n, 0))
        else:
            self._init_deflated(Kff.tocsc(), A_face, scale, kernel_guess)
        self.kernel_dim = self.kernel.shape[1]

    def _init_block_diagonal(self, K, n_faces, block):
        blocks = np.zeros((n_faces, block, block))
        total = abs(K).sum()
        for i in range(n_faces):
            sl = slice(i * block, (i + 1) * block)
            blocks[i] = K[sl, sl].toarray()
        off = total - abs(blocks).sum()
        if off > 1e-12 * max(1.0, abs(K).max()):
            raise ValueError("mixed-order face matrix is not block-diagonal")
        self._inv_blocks = np.linalg.inv(blocks) if n_faces else blocks
        self._K = None
        self._lu = None
        self._gram_cho = None

    def _init_deflated(self, K, A_face, scale, kernel_guess):
        self._K = K.tocsr()
        self._inv_blocks = None
        if self.n == 0:
            self.kernel = np.zeros((0, 0))
            self._lu = None
            self._gram_cho = None
            return
        shift = 1e-13 * scale
        self._lu = spla.splu((K + shift * sp.eye(self.n, format="csc")).tocsc())
        self.kernel = self._kernel_basis(scale, kernel_guess)
        W = A_face @ self.kernel  # (n_sigma, m): images G(0, mu_i)
        gram = W.T @ W
        if self.kernel_dim_of(gram):
            raise ValueError("gradient reconstruction degenerate on face kernel")
        self._gram_cho = scipy.linalg.cho_factor(gram) if gram.size else None

    @staticmethod
    def kernel_dim_of(gram) -> int:
        if gram.size == 0:
            return 0
        w = np.linalg.eigvalsh(gram)
        return int((w < 1e-10 * max(w.max(), 1.0)).sum())

    def _kernel_basis(self, scale, guess) -> np.ndarray:
        """Orthonormal basis of ker(K_ff) via block inverse iteration."""
        rng = np.random.default_rng(0)
        tol = 1e-8 * scale
        b = min(self.n, max(guess + 8, 16))
        while True:
            X = rng.standard_normal((self.n, b))
            for _ in range(2):
                X = self._lu.solve(X)
                X, _ = np.linalg.qr(X)
            B = X.T @ (self._K @ X)
            w, V = np.linalg.eigh(B)
            m = int((w < tol).sum())
            if m < b or b == self.n:
                break
            b = min(self.n, 2 * b)  # all candidates looked null: widen the block
        N = X @ V[:, :m]
        if m and abs(self._K @ N).max() > 1e-10 * scale:
            raise ValueError("face-block kernel basis did not converge")
        return N

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Particular solution of K_ff x = rhs on the range (kernel-free)."""
        if self._inv_blocks is not None:
            n = self._inv_blocks.shape[0]
            if n == 0:
                return np.zeros_like(rhs)
            r = rhs.reshape(n, self.block)
            return np.einsum("fij,fj->fi", self._inv_blocks, r).ravel()
        if self.n == 0:
            return np.zeros_like(rhs)
        N = self.kernel
        r = rhs - N @ (N.T @ rhs)
        x = self._lu.solve(r)
        x -= N @ (N.T @ x)
        # one step of iterative refinement to wash out the diagonal shift
        d = r - self._K @ x
        x = x + self._lu.solve(d)
        return x - N @ (N.T @ x)

    def kernel_coefficients(self, flux_moments: np.ndarray) -> np.ndarray:
        """Solve the kernel Gram system against A_face^T(candidate dsigma)."""
        proj = self.kernel.T @ flux_moments
        return scipy.linalg.cho_solve(self._gram_cho, -proj)


class WaveOperator:
    """Assembled semi-discrete operator bundle for one mesh/variant/degree."""

    def __init__(self, mesh: SimplicialMesh, packs: list[LocalOperatorPack],
                 workspaces: list[BasisWorkspace]):
        variants = {p.variant for p in packs}
        if len(variants) != 1:
            raise ValueError("all cells must use the same variant")
        self.variant = variants.pop()
        self.mesh = mesh
        self.packs = packs
        self.workspaces = workspaces
        self.k = packs[0].k
        self.kp = packs[0].kp
        k, kp = self.k, self.kp
        Nk, Nkp = n_poly(k), n_poly(kp)
        nfd = k + 1
        nc = mesh.n_cells
        interior = mesh.interior_faces
        self._face_slot = -np.ones(mesh.n_faces, dtype=np.int64)
        self._face_slot[interior] = np.arange(len(interior))
        self.n_sigma = nc * 2 * Nk
        self.n_vcell = nc * Nkp
        self.n_vface = len(interior) * nfd

        rows_A, cols_A, vals_A = [], [], []
        rows_S, cols_S, vals_S = [], [], []
        srow = 0
        for t, pack in enumerate(packs):
            cols = np.empty(pack.ncols, dtype=np.int64)
            keep = np.ones(pack.ncols, dtype=bool)
            cols[:Nkp] = t * Nkp + np.arange(Nkp)
            for local in range(3):
                f = mesh.cell_faces[t, local]
                slot = self._face_slot[f]
                csl = slice(Nkp + local * nfd, Nkp + (local + 1) * nfd)
                if slot < 0:
                    keep[csl] = False
                    cols[csl] = 0
                else:
                    cols[csl] = self.n_vcell + slot * nfd + np.arange(nfd)
            g = pack.G[:, keep]
            rr = t * 2 * Nk + np.arange(2 * Nk)
            rows_A.append(np.repeat(rr, keep.sum()))
            cols_A.append(np.tile(cols[keep], 2 * Nk))
            vals_A.append(g.ravel())
            s = np.sqrt(pack.tau) * pack.S[:, keep]
            rows_S.append(np.repeat(srow + np.arange(pack.n_face), keep.sum()))
            cols_S.append(np.tile(cols[keep], pack.n_face))
            vals_S.append(s.ravel())
            srow += pack.n_face

        nx = self.n_vcell + self.n_vface
        A = sp.csr_matrix(
            (np.concatenate(vals_A), (np.concatenate(rows_A), np.concatenate(cols_A))),
            shape=(self.n_sigma, nx),
        )
        Sg = sp.csr_matrix(
            (np.concatenate(vals_S), (np.concatenate(rows_S), np.concatenate(cols_S))),
            shape=(srow, nx),
        )
        Kg = (Sg.T @ Sg).tocsr()
        self.A_cell = A[:, : self.n_vcell].tocsr()
        self.A_face = A[:, self.n_vcell :].tocsr()
        self.Sg = Sg
        self.K_cc = Kg[: self.n_vcell, : self.n_vcell]
        self.K_cf = Kg[: self.n_vcell, self.n_vcell :]
        self.K_ff = Kg[self.n_vcell :, self.n_vcell :]
        boundary_verts = np.unique(mesh.faces[mesh.boundary_faces])
        n_interior_verts = mesh.vertices.shape[0] - boundary_verts.size
        self.skeleton = SkeletonSolver(
            self.K_ff, self.A_face, self.variant, len(interior), nfd,
            kernel_guess=n_interior_verts,
        )

        # stacked quadrature data for loads and norms
        self.quad_points = np.stack([ws.basis.quad_points for ws in workspaces])
        self.quad_weights = np.stack([ws.quad_w for ws in workspaces])
        self.cell_values = np.stack([ws.basis.values for ws in workspaces])
        self.cell_grads = np.stack([ws.basis.grads for ws in workspaces])

    # -- state helpers ---------------------------------------------------

    @property
    def n_state(self) -> int:
        return self.n_sigma + self.n_vcell

    def split(self, y: np.ndarray):
        return y[: self.n_sigma], y[self.n_sigma :]

    def join(self, sigma: np.ndarray, vcell: np.ndarray) -> np.ndarray:
        return np.concatenate([sigma, vcell])

    def field(self, y: np.ndarray, vface: np.ndarray | None = None) -> HybridField:
        sigma, vcell = self.split(y)
        if vface is None:
            vface = self.solve_faces(sigma, vcell)
        Nk, Nkp = n_poly(self.k), n_poly(self.kp)
        nc = self.mesh.n_cells
        return HybridField(
            sigma=sigma.reshape(nc, 2, Nk),
            vee_cell=vcell.reshape(nc, Nkp),
            vee_face=vface.reshape(-1, self.k + 1),
        )

    # -- core operations -------------------------------------------------

    def solve_faces(self, sigma: np.ndarray, vcell: np.ndarray) -> np.ndarray:
        """Interior face values closing the algebraic constraint.

        Equal-order only determines v_F up to the stabilization kernel; the
        kernel component is fixed by requiring the resulting dsigma/dt to
        keep the normal-flux jumps orthogonal to the kernel traces, which
        is the condition under which the face equation stays consistent
        along the flow (and is satisfied by the exact solution, whose
        normal flux has no jumps at all).
        """
        rhs = -(self.A_face.T @ sigma) - (self.K_cf.T @ vcell)
        vface = self.skeleton.solve(rhs)
        if self.skeleton.kernel_dim:
            dsig = self.A_cell @ vcell + self.A_face @ vface
            c = self.skeleton.kernel_coefficients(self.A_face.T @ dsig)
            vface = vface + self.skeleton.kernel @ c
        return vface

    def load_moments(self, f, t: float) -> np.ndarray:
        """Cell moments (f(t), w_T) stacked into the v_cell layout."""
        if f is None:
            return np.zeros(self.n_vcell)
        pts = self.quad_points.reshape(-1, 2)
        vals = np.asarray(f(pts, t)).reshape(self.quad_weights.shape)
        Nkp = n_poly(self.kp)
        return np.einsum(
            "cq,cqj->cj", self.quad_weights * vals, self.cell_values[:, :, :Nkp]
        ).ravel()

    def ode_rhs(self, y: np.ndarray, t: float, f=None) -> np.ndarray:
        """Reduced right-hand side after static condensation of the faces."""
        sigma, vcell = self.split(y)
        vface = self.solve_faces(sigma, vcell)
        d_sigma = self.A_cell @ vcell + self.A_face @ vface
        d_vcell = -(self.A_cell.T @ sigma) - (self.K_cc @ vcell + self.K_cf @ vface)
        if f is not None:
            d_vcell = d_vcell + self.load_moments(f, t)
        return self.join(d_sigma, d_vcell)

    def stabilization_energy(self, vcell: np.ndarray, vface: np.ndarray) -> float:
        """s_M(vhat, vhat) for a hybrid primal state."""
        z = self.Sg @ np.concatenate([vcell, vface])
        return float(z @ z)

    def face_residual(self, sigma: np.ndarray, vcell: np.ndarray,
                      vface: np.ndarray) -> float:
        """Max residual of the face equation for a given full state."""
        x = np.concatenate([vcell, vface])
        r = self.A_face.T @ sigma + (self.Sg.T @ (self.Sg @ x))[self.n_vcell :]
        return float(np.max(np.abs(r))) if r.size else 0.0

    def hdg_flux_trace(self, field: HybridField) -> np.ndarray:
        """Numerical flux trace coefficients, per cell and face: (nc, 3, k+1)."""
        k, kp = self.k, self.kp
        Nkp = n_poly(kp)
        nfd = k + 1
        nc = self.mesh.n_cells
        out = np.empty((nc, 3, nfd))
        for t, pack in enumerate(self.packs):
            x = np.empty(pack.ncols)
            x[:Nkp] = field.vee_cell[t]
            for local in range(3):
                f = self.mesh.cell_faces[t, local]
                slot = self._face_slot[f]
                vals = field.vee_face[slot] if slot >= 0 else np.zeros(nfd)
                x[Nkp + local * nfd : Nkp + (local + 1) * nfd] = vals
            sn = pack.N @ field.sigma[t].ravel()
            flux = sn - pack.tau * (pack.lam @ (pack.D @ x))
            out[t] = flux.reshape(3, nfd)
        return out

    def transmission_residual(self, field: HybridField) -> float:
        """Max over interior faces of the summed two-sided flux coefficients."""
        flux = self.hdg_flux_trace(field)
        acc = np.zeros((self.mesh.n_faces, self.k + 1))
        for t in range(self.mesh.n_cells):
            for local in range(3):
                acc[self.mesh.cell_faces[t, local]] += flux[t, local]
        interior = self.mesh.interior_faces
        return float(np.max(np.abs(acc[interior]))) if len(interior) else 0.0

    def initial_state(self, sigma0, v0, mode: str = "h-interp") -> np.ndarray:
        """Discrete initial data from the H-interpolation or plain projections."""
        Nk, Nkp = n_poly(self.k), n_poly(self.kp)
        sig = np.empty((self.mesh.n_cells, 2, Nk))
        vee = np.empty((self.mesh.n_cells, Nkp))
        if mode == "h-interp":
            for t, (pack, ws) in enumerate(zip(self.packs, self.workspaces)):
                hi = h_interpolate(pack, ws, sigma0, v0)
                sig[t] = hi.sigma
                vee[t] = hi.vee
        elif mode == "l2":
            for t, ws in enumerate(self.workspaces):
                sig[t] = ws.project_cell(sigma0, self.k)
                vee[t] = ws.project_cell(v0, self.kp)
        else:
            raise ValueError(f"unknown initial-condition mode {mode!r}")
        return self.join(sig.ravel(), vee.ravel())


def assemble(mesh: SimplicialMesh, packs, workspaces) -> WaveOperator:
    return WaveOperator(mesh, packs, workspaces)
