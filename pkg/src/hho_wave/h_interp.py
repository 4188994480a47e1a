"""The per-cell H-interpolation of a (dual, primal) field pair.

The interpolant (sigma_h, v_h) in P^k(T;R^2) x P^kp(T) is defined by cell
moments up to degree k-1 of both fields plus a normal-flux condition on the
cell boundary coupled through the stabilization operator; the mixed-order
setting adds gradient moments against the complement of P^k in P^{k+1}.
The resulting square linear system is tiny and solved densely with partial
pivoting.

`h_interpolate_hdgplus` solves the alternative mixed-order system whose
last block uses divergence moments; it must coincide with the primary
definition and serves as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .basis_quad import BasisWorkspace, n_poly
from .local_ops import LocalOperatorPack


@dataclass
class HInterpolant:
    sigma: np.ndarray  # (2, Nk) coefficients of the dual interpolant
    vee: np.ndarray  # (Nkp,) coefficients of the primal interpolant
    residual: float  # scaled max residual of the defining equations


def _cell_data_moments(ws: BasisWorkspace, sigma_fn, v_fn):
    """Quadrature moments of the input fields needed by the local system."""
    k = ws.k
    Nk1 = n_poly(k + 1)
    w = ws.quad_w
    pts = ws.basis.quad_points
    vals = ws.basis.values
    sig = np.asarray(sigma_fn(pts))  # (nq, 2)
    vv = np.asarray(v_fn(pts))
    mv = vals.T @ (w * vv)  # (Nk1,)
    ms = np.stack([vals.T @ (w * sig[:, c]) for c in range(2)])  # (2, Nk1)
    # (sigma, grad phi_a)_T for the mixed-order closure rows
    msg = np.einsum("q,cqa,qc->a", w, ws.basis.grads, sig)  # (Nk1,)

    nfd = k + 1
    g = np.zeros(3 * nfd)  # face projections of v
    bsn = np.zeros(3 * nfd)  # face moments of sigma.n
    corr = np.zeros(Nk1)  # sum_F (Pi_F(sigma.n) - sigma.n, phi_a)_F
    for local in range(3):
        fb = ws.faces[local]
        fw = fb.quad_weights
        fv = np.asarray(v_fn(fb.quad_points))
        fs = np.asarray(sigma_fn(fb.quad_points)) @ ws.normals[local]
        sl = slice(local * nfd, (local + 1) * nfd)
        g[sl] = fb.values.T @ (fw * fv)
        bsn[sl] = fb.values.T @ (fw * fs)
        proj_vals = fb.values @ bsn[sl]  # Pi_F^k(sigma.n) at face quad points
        corr += ws.face_cell_vals[local].T @ (fw * (proj_vals - fs))
    return mv, ms, msg, g, bsn, corr


def _assemble(pack: LocalOperatorPack, mv, ms, g, bsn):
    """Common rows (cell moments + flux/stabilization coupling) of both systems.

    Unknown ordering: [sigma (2*Nk, component-major); v (Nkp)].
    """
    k, kp = pack.k, pack.kp
    Nk, Nkm1, Nkp = n_poly(k), n_poly(k - 1), n_poly(kp)
    nf = pack.n_face
    ns = 2 * Nk
    ntot = ns + Nkp
    nrows = 3 * Nkm1 + nf
    A = np.zeros((nrows, ntot))
    b = np.zeros(nrows)
    r = 0
    for j in range(Nkm1):  # primal cell moments
        A[r, ns + j] = 1.0
        b[r] = mv[j]
        r += 1
    for c in range(2):  # dual cell moments
        for a in range(Nkm1):
            A[r, c * Nk + a] = 1.0
            b[r] = ms[c, a]
            r += 1
    # flux rows: (sigma_h . n, mu)_dT + tau (S_f^T S_c v_h, mu) =
    #            (sigma . n, mu)_dT - tau (S_f^T S_f g, mu)
    Sc = pack.S[:, :Nkp]
    Sf = pack.S[:, Nkp:]
    A[r : r + nf, :ns] = pack.N
    A[r : r + nf, ns:] = pack.tau * (Sf.T @ Sc)
    b[r : r + nf] = bsn - pack.tau * (Sf.T @ (Sf @ g))
    return A, b, r + nf


def h_interpolate(pack: LocalOperatorPack, ws: BasisWorkspace, sigma_fn, v_fn) -> HInterpolant:
    """Solve the defining system of the H-interpolation on one cell."""
    mv, ms, msg, g, bsn, corr = _cell_data_moments(ws, sigma_fn, v_fn)
    A, b, r = _assemble(pack, mv, ms, g, bsn)
    k = pack.k
    Nk, Nk1 = n_poly(k), n_poly(k + 1)
    if pack.variant == "mixed":
        # gradient moments against the orthonormal complement of P^k in P^{k+1}
        A2 = np.zeros((Nk1 - Nk, A.shape[1]))
        b2 = np.zeros(Nk1 - Nk)
        w = ws.quad_w
        vals = ws.basis.values
        grads = ws.basis.grads
        # (phi_j, d_c phi_a)_T for test index a in the complement
        M = np.einsum("q,qj,cqa->caj", w, vals[:, :Nk], grads[:, :, Nk:])
        for i, a in enumerate(range(Nk, Nk1)):
            for c in range(2):
                A2[i, c * Nk : (c + 1) * Nk] = M[c, i]
            b2[i] = msg[a] + corr[a]
        A = np.vstack([A, A2])
        b = np.concatenate([b, b2])
    x = scipy.linalg.solve(A, b)
    scale = max(1.0, float(np.linalg.norm(b)))
    residual = float(np.max(np.abs(A @ x - b))) / scale
    Nkp = n_poly(pack.kp)
    return HInterpolant(
        sigma=x[: 2 * Nk].reshape(2, Nk),
        vee=x[2 * Nk : 2 * Nk + Nkp],
        residual=residual,
    )


def h_interpolate_hdgplus(
    pack: LocalOperatorPack, ws: BasisWorkspace, sigma_fn, v_fn, div_sigma_fn
) -> HInterpolant:
    """Mixed-order cross-check system with divergence-moment closure rows."""
    if pack.variant != "mixed":
        raise ValueError("hdgplus interpolation requires the mixed-order variant")
    mv, ms, msg, g, bsn, _ = _cell_data_moments(ws, sigma_fn, v_fn)
    A, b, r = _assemble(pack, mv, ms, g, bsn)
    k = pack.k
    Nk, Nk1, Nkp = n_poly(k), n_poly(k + 1), n_poly(pack.kp)
    w = ws.quad_w
    vals = ws.basis.values
    grads = ws.basis.grads
    div = np.asarray(div_sigma_fn(ws.basis.quad_points))
    mdiv = vals.T @ (w * div)  # (div sigma, phi_a)_T
    Sc = pack.S[:, :Nkp]
    Sf = pack.S[:, Nkp:]
    A2 = np.zeros((Nk1 - Nk, A.shape[1]))
    b2 = np.zeros(Nk1 - Nk)
    # (d_c phi_j, phi_a)_T for the divergence of the unknown
    M = np.einsum("q,cqj,qa->caj", w, grads[:, :, :Nk], vals[:, Nk:])
    for i, a in enumerate(range(Nk, Nk1)):
        for c in range(2):
            A2[i, c * Nk : (c + 1) * Nk] = M[c, i]
        t_a = pack.Pk1_faces[:, a]
        A2[i, 2 * Nk :] = -pack.tau * (t_a @ Sc)
        b2[i] = mdiv[a] + pack.tau * (t_a @ (Sf @ g))
    A = np.vstack([A, A2])
    b = np.concatenate([b, b2])
    x = scipy.linalg.solve(A, b)
    scale = max(1.0, float(np.linalg.norm(b)))
    residual = float(np.max(np.abs(A @ x - b))) / scale
    return HInterpolant(
        sigma=x[: 2 * Nk].reshape(2, Nk),
        vee=x[2 * Nk : 2 * Nk + Nkp],
        residual=residual,
    )


def h_interpolate_global(packs, workspaces, sigma_fn, v_fn) -> list[HInterpolant]:
    """Cellwise application over the whole mesh."""
    return [
        h_interpolate(pack, ws, sigma_fn, v_fn) for pack, ws in zip(packs, workspaces)
    ]
