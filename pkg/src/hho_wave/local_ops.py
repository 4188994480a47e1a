"""Per-cell operator matrices: gradient/potential reconstruction, stabilization.

All matrices act on coefficient vectors in the orthonormal bases of
`basis_quad`, so every local mass matrix is the identity and adjoints are
plain transposes.

Column layout of the hybrid pair (v_T, v_dT): the first n_poly(kp) entries
are the cell coefficients, followed by the three per-face blocks of k+1
coefficients each, in `cell_faces` order.  Sigma coefficients are stored
component-major: index c * n_poly(k) + a for component c.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis_quad import BasisWorkspace, n_poly


@dataclass
class LocalOperatorPack:
    """Matrices of the local hybrid operators on one cell."""

    variant: str  # "equal" or "mixed"
    k: int
    kp: int
    tau: float
    h: float
    G: np.ndarray  # (2*Nk, ncols) gradient reconstruction
    R: np.ndarray  # (Nk1, ncols) potential reconstruction
    D: np.ndarray  # (nf, ncols) face projection of the boundary difference
    S: np.ndarray  # (nf, ncols) stabilization operator
    Stilde: np.ndarray  # (nf, nf) reformulated stabilization on face data
    lam: np.ndarray  # (nf, nf) flux-trace weight: Stilde^T Stilde or identity
    N: np.ndarray  # (nf, 2*Nk) normal moments (sigma.n against face basis)
    Pk1_faces: np.ndarray  # (nf, Nk1) face projection of the degree-(k+1) cell basis
    K_stiff: np.ndarray  # (Nk1, Nk1) stiffness matrix of the volume basis
    trace_mass: np.ndarray  # (ncols, ncols) quadratic form of ||v_T - v_dT||^2_dT

    @property
    def n_sigma(self) -> int:
        return 2 * n_poly(self.k)

    @property
    def n_cell(self) -> int:
        return n_poly(self.kp)

    @property
    def n_face(self) -> int:
        return 3 * (self.k + 1)

    @property
    def ncols(self) -> int:
        return self.n_cell + self.n_face


def build_pack(ws: BasisWorkspace, variant: str, ell_omega: float) -> LocalOperatorPack:
    k, kp = ws.k, ws.kp
    if variant not in ("equal", "mixed"):
        raise ValueError(f"unknown variant {variant!r}")
    if (variant == "equal") != (kp == k):
        raise ValueError("variant inconsistent with cell degree")
    Nk, Nkp, Nk1 = n_poly(k), n_poly(kp), n_poly(k + 1)
    nfd = k + 1
    nf = 3 * nfd
    ncols = Nkp + nf
    w = ws.quad_w
    vals = ws.basis.values
    grads = ws.basis.grads

    # volume stiffness and volume gradient moments
    K = np.einsum("q,cqa,cqb->ab", w, grads, grads)  # (Nk1, Nk1)
    # Dvol[c, a, j] = (phi_j d_c phi_a)_T restricted below as needed
    Dvol = np.einsum("q,qa,cqj->caj", w, vals, grads)  # (2, Nk1, Nk1): (phi_a, d_c phi_j)

    # face matrices
    Pk1_faces = np.zeros((nf, Nk1))  # face projection of volume basis traces
    Nmat = np.zeros((nf, 2 * Nk))
    Btrace = np.zeros((2, Nk, Nkp))  # sum_F (phi_a, phi_j n_c)_F
    Cface = np.zeros((2, Nk, nf))  # (phi_a, mu_i n_c)_F
    Rface_rhs = np.zeros((Nk1, ncols))  # boundary terms of the reconstruction rhs
    trace_mass = np.zeros((ncols, ncols))
    for local in range(3):
        fb = ws.faces[local]
        fw = fb.quad_weights
        fvals = fb.values  # (nq, nfd)
        cvals = ws.face_cell_vals[local]  # (nq, Nk1)
        cgrads = ws.face_cell_grads[local]  # (2, nq, Nk1)
        n = ws.normals[local]
        sl = slice(local * nfd, (local + 1) * nfd)
        proj = fvals.T @ (fw[:, None] * cvals)  # (nfd, Nk1)
        Pk1_faces[sl] = proj
        for c in range(2):
            Nmat[sl, c * Nk : (c + 1) * Nk] = n[c] * proj[:, :Nk]
            Btrace[c] += n[c] * (cvals[:, :Nk].T @ (fw[:, None] * cvals[:, :Nkp]))
            Cface[c, :, sl] = n[c] * (cvals[:, :Nk].T @ (fw[:, None] * fvals))
        # reconstruction rhs boundary term: -(v_T - v_F, grad w . n)_F
        gn = np.einsum("cqa,c->qa", cgrads, n)  # (nq, Nk1)
        Rface_rhs[:, :Nkp] -= gn.T @ (fw[:, None] * cvals[:, :Nkp])
        Rface_rhs[:, Nkp:][:, sl] += gn.T @ (fw[:, None] * fvals)
        # trace mass of (v_T|_F - v_F)
        mixed_vals = np.hstack([cvals[:, :Nkp], np.zeros((fvals.shape[0], nf))])
        mixed_vals[:, Nkp:][:, sl] = -fvals
        trace_mass += mixed_vals.T @ (fw[:, None] * mixed_vals)

    # gradient reconstruction
    G = np.zeros((2 * Nk, ncols))
    for c in range(2):
        rows = slice(c * Nk, (c + 1) * Nk)
        G[rows, :Nkp] = Dvol[c, :Nk, :Nkp] - Btrace[c]
        G[rows, Nkp:] = Cface[c]

    # potential reconstruction: solve the Neumann-type system with the
    # mean constraint pinning the constant coefficient
    R = np.zeros((Nk1, ncols))
    rhs = Rface_rhs.copy()
    rhs += np.pad(K[:, :Nkp], ((0, 0), (0, nf)))  # (grad v_T, grad w)_T columns
    R[1:] = np.linalg.solve(K[1:, 1:], rhs[1:])
    R[0, 0] = 1.0  # orthonormal constant: mean constraint copies coeff 0 of v_T

    # face projection of the boundary difference: Pi_dT(v_T|_dT) - v_F
    D = np.hstack([Pk1_faces[:, :Nkp], -np.eye(nf)])

    if variant == "equal":
        # high-order correction: trace of (1 - Pi_T^k) R
        Z = np.zeros((Nk1, Nk1))
        Z[Nk:, Nk:] = np.eye(Nk1 - Nk)
        S = D + Pk1_faces @ Z @ R
        Stilde = np.eye(nf) - Pk1_faces @ Z @ R[:, Nkp:]
        lam = Stilde.T @ Stilde
    else:
        S = D
        Stilde = np.eye(nf)
        lam = np.eye(nf)

    tau = ell_omega / ws.h
    return LocalOperatorPack(
        variant=variant,
        k=k,
        kp=kp,
        tau=tau,
        h=ws.h,
        G=G,
        R=R,
        D=D,
        S=S,
        Stilde=Stilde,
        lam=lam,
        N=Nmat,
        Pk1_faces=Pk1_faces,
        K_stiff=K,
        trace_mass=trace_mass,
    )


def build_packs(workspaces, variant: str, ell_omega: float):
    return [build_pack(ws, variant, ell_omega) for ws in workspaces]


def stability_equivalence_check(pack: LocalOperatorPack, n_samples: int = 100, seed: int = 0):
    """Empirical min/max of the local stability equivalence ratio.

    Ratio of the reconstructed seminorm ||G(vhat)||^2 + h^{-1} ||S(vhat)||^2
    to the direct one ||grad v_T||^2 + h^{-1} ||v_T - v_dT||^2_dT over random
    hybrid pairs; samples with (numerically) zero denominator are skipped.

    Face coefficients are drawn with a 1/sqrt(h) weight so that each sample
    corresponds to the same hybrid function under rescaling of the cell
    (unit-L2 face modes are 1/sqrt(h) larger pointwise than unit-L2 cell
    modes); with that weighting the sampled ratios are scale-invariant and
    comparable across refinement levels.
    """
    rng = np.random.default_rng(seed)
    Nkp = pack.n_cell
    Kv = pack.K_stiff[:Nkp, :Nkp]
    lo, hi = np.inf, -np.inf
    for _ in range(n_samples):
        x = rng.standard_normal(pack.ncols)
        x[Nkp:] /= np.sqrt(pack.h)
        denom = x[:Nkp] @ Kv @ x[:Nkp] + (x @ pack.trace_mass @ x) / pack.h
        if denom < 1e-12 * (x @ x):
            continue
        gx = pack.G @ x
        sx = pack.S @ x
        num = gx @ gx + (sx @ sx) / pack.h
        ratio = num / denom
        lo = min(lo, ratio)
        hi = max(hi, ratio)
    return lo, hi
