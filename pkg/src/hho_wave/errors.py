"""Manufactured solutions, error norms, and convergence-order bookkeeping.

The superconvergent metric for the time-integrated primal variable is the
projection-relative one, ||Pi^{k'}(int_0^T v) - int_0^T v_T||: that is the
quantity the sharper estimate controls at order k+2 for both variants (for
equal-order cells the plain difference is capped at k+1 by the P^k
projection error itself — supercloseness, not literal superconvergence).
The plain difference is recorded alongside for reference.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .basis_quad import BasisWorkspace, n_poly
from .semidisc import WaveOperator
from .timeint import RunResult


@dataclass
class ManufacturedProblem:
    """Closed-form space-time solution of the first-order wave system."""

    name: str
    v: Callable  # v(p, t)
    sigma: Callable  # sigma(p, t) -> (npts, 2)
    dv: Callable  # time derivative of v
    dsigma: Callable  # time derivative of sigma
    div_sigma: Callable  # spatial divergence of sigma
    grad_v: Callable  # spatial gradient of v
    integral_v: Callable  # int_0^t v(., tau) dtau
    f: Callable | None  # source term, or None for zero
    homogeneous_dirichlet: bool = True

    def v0(self, p):
        return self.v(p, 0.0)

    def sigma0(self, p):
        return self.sigma(p, 0.0)

    def residual(self, p, t: float) -> float:
        """Max pointwise defect of the two evolution equations at (p, t)."""
        r1 = self.dsigma(p, t) - self.grad_v(p, t)
        src = self.f(p, t) if self.f is not None else 0.0
        r2 = self.dv(p, t) - self.div_sigma(p, t) - src
        return float(max(np.abs(r1).max(), np.abs(r2).max()))


def standing_wave() -> ManufacturedProblem:
    """u = sin(pi x) sin(pi y) sin(w t)/w with w = sqrt(2) pi; v = du/dt, sigma = grad u."""
    w = np.sqrt(2.0) * np.pi

    def shape(p):
        return np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])

    def gshape(p):
        x, y = p[:, 0], p[:, 1]
        return np.pi * np.stack(
            [np.cos(np.pi * x) * np.sin(np.pi * y),
             np.sin(np.pi * x) * np.cos(np.pi * y)], axis=1
        )

    prob = ManufacturedProblem(
        name="standing-wave",
        v=lambda p, t: shape(p) * np.cos(w * t),
        sigma=lambda p, t: gshape(p) * (np.sin(w * t) / w),
        dv=lambda p, t: shape(p) * (-w * np.sin(w * t)),
        dsigma=lambda p, t: gshape(p) * np.cos(w * t),
        div_sigma=lambda p, t: shape(p) * (-2.0 * np.pi**2) * (np.sin(w * t) / w),
        grad_v=lambda p, t: gshape(p) * np.cos(w * t),
        integral_v=lambda p, t: shape(p) * (np.sin(w * t) / w),
        f=None,
    )
    _self_test(prob)
    return prob


def _self_test(prob: ManufacturedProblem, tol: float = 1e-12):
    rng = np.random.default_rng(7)
    p = rng.random((64, 2))
    for t in (0.0, 0.37, 1.0):
        r = prob.residual(p, t)
        if r > tol:
            raise ValueError(f"manufactured solution {prob.name!r} defect {r:.2e}")


# -- norms ---------------------------------------------------------------


def energy_error(op: WaveOperator, state: np.ndarray, prob: ManufacturedProblem,
                 t: float) -> tuple[float, float]:
    """Quadrature L2 norms (||sigma - sigma_T||, ||v - v_T||) at time t."""
    Nk, Nkp = n_poly(op.k), n_poly(op.kp)
    nc = op.mesh.n_cells
    sigma, vcell = op.split(state)
    sigma = sigma.reshape(nc, 2, Nk)
    vcell = vcell.reshape(nc, Nkp)
    pts = op.quad_points.reshape(-1, 2)
    wq = op.quad_weights
    sig_ex = np.asarray(prob.sigma(pts, t)).reshape(nc, -1, 2)
    v_ex = np.asarray(prob.v(pts, t)).reshape(nc, -1)
    sig_h = np.einsum("cqa,cia->cqi", op.cell_values[:, :, :Nk], sigma)
    v_h = np.einsum("cqa,ca->cq", op.cell_values[:, :, :Nkp], vcell)
    es = np.einsum("cq,cqi->", wq, (sig_h - sig_ex) ** 2)
    ev = np.einsum("cq,cq->", wq, (v_h - v_ex) ** 2)
    return float(np.sqrt(es)), float(np.sqrt(ev))


def superconvergent_error(op: WaveOperator, result: RunResult,
                          prob: ManufacturedProblem,
                          workspaces: list[BasisWorkspace]) -> tuple[float, float]:
    """(projection-relative, plain) L2 errors of the time-integrated primal.

    The first component is ||Pi^{k'}(int v) - int v_T|| (the superconvergent
    quantity); the second the plain quadrature error of the same fields.
    """
    Nkp = n_poly(op.kp)
    nc = op.mesh.n_cells
    T = result.config.t_final
    I_h = result.integral_vee.reshape(nc, Nkp)
    rel2 = 0.0
    for t, ws in enumerate(workspaces):
        proj = ws.project_cell(lambda p: prob.integral_v(p, T), op.kp)
        rel2 += float(np.sum((proj - I_h[t]) ** 2))
    pts = op.quad_points.reshape(-1, 2)
    wq = op.quad_weights
    I_ex = np.asarray(prob.integral_v(pts, T)).reshape(nc, -1)
    I_vals = np.einsum("cqa,ca->cq", op.cell_values[:, :, :Nkp], I_h)
    plain2 = float(np.einsum("cq,cq->", wq, (I_vals - I_ex) ** 2))
    return float(np.sqrt(rel2)), float(np.sqrt(plain2))


def stabilization_seminorm(op: WaveOperator, state: np.ndarray) -> float:
    """|v-hat|_S at one instant, faces closed by the algebraic constraint."""
    sigma, vcell = op.split(state)
    vface = op.solve_faces(sigma, vcell)
    return float(np.sqrt(op.stabilization_energy(vcell, vface)))


# -- reports -------------------------------------------------------------


@dataclass
class ConvergenceRow:
    h: float
    dofs: int
    err_sigma: float
    err_v: float
    stab_seminorm: float
    err_int_v: float  # projection-relative time-integrated primal error
    err_int_v_plain: float


@dataclass
class ConvergenceReport:
    variant: str
    degree: int
    scheme: str
    t_final: float
    ic_mode: str
    rows: list[ConvergenceRow] = field(default_factory=list)

    COLUMNS = ("err_sigma", "err_v", "stab_seminorm", "err_int_v", "err_int_v_plain")

    def eoc(self) -> dict[str, list[float]]:
        return compute_eoc(
            [[getattr(r, c) for c in self.COLUMNS] for r in self.rows],
            list(self.COLUMNS),
        )


def compute_eoc(rows: list[list[float]], columns: list[str]) -> dict[str, list[float]]:
    """log2 ratios of consecutive error rows (mesh size halving assumed)."""
    out: dict[str, list[float]] = {c: [] for c in columns}
    for prev, cur in zip(rows, rows[1:]):
        for c, a, b in zip(columns, prev, cur):
            if a > 0 and b > 0:
                out[c].append(float(np.log2(a / b)))
            else:
                out[c].append(float("nan"))
    return out
