import numpy as np
import pytest

from conftest import cached_operator
from hho_wave.basis_quad import n_poly

CASES = [(v, k) for v in ("equal", "mixed") for k in (0, 1, 2)]


def smooth_state(op):
    return op.initial_state(
        lambda p: np.stack([np.cos(p[:, 0] + p[:, 1]), np.sin(p[:, 0] - p[:, 1])], axis=1),
        lambda p: np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1]),
    )


@pytest.mark.parametrize("variant,k", CASES)
def test_face_block_kernel_dimension(variant, k):
    """Equal-order: one kernel vector per interior vertex; mixed-order: none."""
    for n in (2, 4):
        op = cached_operator(n, k, variant)
        expected = (n - 1) ** 2 if variant == "equal" else 0
        assert op.skeleton.kernel_dim == expected


@pytest.mark.parametrize("variant,k", CASES)
def test_face_block_positive_semidefinite(variant, k):
    op = cached_operator(2, k, variant)
    rng = np.random.default_rng(0)
    scale = abs(op.K_ff).max() if op.K_ff.nnz else 1.0
    for _ in range(20):
        mu = rng.standard_normal(op.n_vface)
        q = float(mu @ (op.K_ff @ mu))
        # quadratic form equals the stabilization energy of the pure face state
        assert q == pytest.approx(op.stabilization_energy(np.zeros(op.n_vcell), mu),
                                  rel=1e-12, abs=1e-12)
        assert q > -1e-12 * scale * (mu @ mu)


@pytest.mark.parametrize("variant,k", CASES)
def test_skeleton_solve_on_range(variant, k):
    op = cached_operator(4, k, variant)
    rng = np.random.default_rng(1)
    z = rng.standard_normal(op.n_vface)
    rhs = op.K_ff @ z  # guaranteed in the range
    x = op.skeleton.solve(rhs)
    scale = max(1.0, float(np.abs(rhs).max()))
    assert np.abs(op.K_ff @ x - rhs).max() < 1e-10 * scale
    if op.skeleton.kernel_dim:
        # particular solution carries no kernel component
        assert np.abs(op.skeleton.kernel.T @ x).max() < 1e-10 * scale


@pytest.mark.parametrize("variant,k", CASES)
def test_face_equation_and_transmission(variant, k):
    op = cached_operator(4, k, variant)
    y = smooth_state(op)
    sigma, vcell = op.split(y)
    vface = op.solve_faces(sigma, vcell)
    assert op.face_residual(sigma, vcell, vface) < 1e-11
    assert op.transmission_residual(op.field(y, vface)) < 1e-10


@pytest.mark.parametrize("variant,k", CASES)
def test_energy_dissipation_identity(variant, k):
    """d/dt (1/2 |y|^2) = <y, rhs(y)> = -s_M(v-hat) on consistent states (f = 0).

    The identity needs the face equation to close exactly, which requires
    the flux moments of sigma against the face-block kernel to vanish;
    interpolated smooth data satisfies that, a random vector does not.
    """
    op = cached_operator(2, k, variant)
    y = smooth_state(op)
    sigma, vcell = op.split(y)
    vface = op.solve_faces(sigma, vcell)
    lhs = float(y @ op.ode_rhs(y, 0.0))
    rhs = -op.stabilization_energy(vcell, vface)
    assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(rhs))


@pytest.mark.parametrize("variant,k", CASES)
def test_skew_adjoint_coupling(variant, k):
    op = cached_operator(2, k, variant)
    rng = np.random.default_rng(3)
    s = rng.standard_normal(op.n_sigma)
    x = rng.standard_normal(op.n_vcell + op.n_vface)
    lhs = float(s @ (op.A_cell @ x[: op.n_vcell] + op.A_face @ x[op.n_vcell :]))
    rhs = float(np.concatenate([op.A_cell.T @ s, op.A_face.T @ s]) @ x)
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))


def test_initial_state_l2_matches_projections():
    op = cached_operator(2, 1, "mixed")

    def sig(p):
        return np.stack([p[:, 0] ** 2, p[:, 1]], axis=1)

    def v(p):
        return p[:, 0] * p[:, 1]

    y = op.initial_state(sig, v, mode="l2")
    sigma, vcell = op.split(y)
    Nk, Nkp = n_poly(op.k), n_poly(op.kp)
    sigma = sigma.reshape(-1, 2, Nk)
    vcell = vcell.reshape(-1, Nkp)
    for t, ws in enumerate(op.workspaces):
        assert np.allclose(sigma[t], ws.project_cell(sig, op.k), atol=1e-13)
        assert np.allclose(vcell[t], ws.project_cell(v, op.kp), atol=1e-13)


def test_initial_state_mode_validation():
    op = cached_operator(2, 0, "equal")
    with pytest.raises(ValueError):
        op.initial_state(lambda p: np.zeros((len(p), 2)), lambda p: np.zeros(len(p)),
                         mode="bogus")


def test_field_shapes():
    op = cached_operator(2, 1, "equal")
    y = smooth_state(op)
    fld = op.field(y)
    assert fld.sigma.shape == (op.mesh.n_cells, 2, n_poly(op.k))
    assert fld.vee_cell.shape == (op.mesh.n_cells, n_poly(op.kp))
    assert fld.vee_face.shape == (len(op.mesh.interior_faces), op.k + 1)


@pytest.mark.parametrize("variant,k", CASES)
def test_hinterp_state_flux_constraint(variant, k):
    """With interpolated initial data, d(sigma)/dt keeps flux jumps off the kernel."""
    op = cached_operator(4, k, variant)
    if not op.skeleton.kernel_dim:
        pytest.skip("no kernel in the mixed-order face block")
    y = smooth_state(op)
    d = op.ode_rhs(y, 0.0)
    dsig = op.split(d)[0]
    moments = op.skeleton.kernel.T @ (op.A_face.T @ dsig)
    assert np.abs(moments).max() < 1e-10 * max(1.0, np.abs(dsig).max())
