import numpy as np
import pytest

from hho_wave.basis_quad import BasisWorkspace, n_poly
from hho_wave.h_interp import h_interpolate, h_interpolate_global, h_interpolate_hdgplus
from hho_wave.local_ops import build_pack
from hho_wave.mesh import build_structured

CASES = [(v, k) for v in ("equal", "mixed") for k in (0, 1, 2)]


def make_pack(variant, k, cell=0, n=2):
    mesh = build_structured(n)
    kp = k if variant == "equal" else k + 1
    ws = BasisWorkspace(mesh, cell, k, kp)
    return build_pack(ws, variant, mesh.domain_diameter), ws


@pytest.mark.parametrize("variant,k", CASES)
def test_zero_maps_to_zero(variant, k):
    pack, ws = make_pack(variant, k)
    hi = h_interpolate(pack, ws, lambda p: np.zeros((len(p), 2)), lambda p: np.zeros(len(p)))
    assert np.abs(hi.sigma).max() == 0.0
    assert np.abs(hi.vee).max() == 0.0
    assert hi.residual < 1e-14


@pytest.mark.parametrize("variant,k", CASES)
def test_polynomial_reproduction(variant, k):
    """On (sigma, v) in P^k x P^{k'} the interpolant equals the projections."""
    pack, ws = make_pack(variant, k)

    def psig(p):
        return np.stack([(p[:, 0] + 0.5) ** k, (p[:, 0] - p[:, 1]) ** k], axis=1)

    def pv(p):
        return (0.7 * p[:, 0] + p[:, 1] - 0.1) ** pack.kp

    hi = h_interpolate(pack, ws, psig, pv)
    assert np.abs(hi.sigma - ws.project_cell(psig, k)).max() < 1e-12
    assert np.abs(hi.vee - ws.project_cell(pv, pack.kp)).max() < 1e-12
    assert hi.residual < 1e-12


@pytest.mark.parametrize("variant,k", CASES)
def test_cell_moments_match(variant, k):
    """Moments up to degree k-1 of the interpolant agree with the data."""
    pack, ws = make_pack(variant, k)

    def sig(p):
        return np.stack([np.sin(p[:, 0]), np.cos(p[:, 1])], axis=1)

    def v(p):
        return np.exp(p[:, 0] - p[:, 1])

    hi = h_interpolate(pack, ws, sig, v)
    assert hi.residual < 1e-12
    nm = n_poly(k - 1)
    if nm:
        assert np.abs(hi.vee[:nm] - ws.project_cell(v, k - 1)).max() < 1e-12
        assert np.abs(hi.sigma[:, :nm] - ws.project_cell(sig, k - 1)).max() < 1e-12


@pytest.mark.parametrize("k", [0, 1, 2])
def test_hdgplus_equivalence(k):
    """The divergence-closure system gives the same mixed-order interpolant.

    Polynomial data of modest degree, so the integration by parts relating
    the two closure-row families is carried exactly by the quadrature.
    """
    pack, ws = make_pack("mixed", k)

    def sig(p):
        x, y = p[:, 0], p[:, 1]
        return np.stack([x**3 - 2 * x * y + y, x * y**2 + 0.5 * x - y**3], axis=1)

    def div_sig(p):
        x, y = p[:, 0], p[:, 1]
        return (3 * x**2 - 2 * y) + (2 * x * y - 3 * y**2)

    def v(p):
        x, y = p[:, 0], p[:, 1]
        return x**2 * y - y**2 + 0.3 * x

    a = h_interpolate(pack, ws, sig, v)
    b = h_interpolate_hdgplus(pack, ws, sig, v, div_sig)
    scale = max(np.abs(a.sigma).max(), np.abs(a.vee).max())
    assert np.abs(a.sigma - b.sigma).max() < 1e-10 * scale
    assert np.abs(a.vee - b.vee).max() < 1e-10 * scale


def test_hdgplus_requires_mixed():
    pack, ws = make_pack("equal", 1)
    with pytest.raises(ValueError):
        h_interpolate_hdgplus(pack, ws, lambda p: np.zeros((len(p), 2)),
                              lambda p: np.zeros(len(p)), lambda p: np.zeros(len(p)))


def test_global_interpolation_shapes():
    mesh = build_structured(2)
    k = 1
    wss = [BasisWorkspace(mesh, t, k, k) for t in range(mesh.n_cells)]
    packs = [build_pack(ws, "equal", mesh.domain_diameter) for ws in wss]
    out = h_interpolate_global(
        packs, wss,
        lambda p: np.stack([p[:, 0], p[:, 1]], axis=1),
        lambda p: p[:, 0] * p[:, 1],
    )
    assert len(out) == mesh.n_cells
    assert all(hi.sigma.shape == (2, n_poly(k)) for hi in out)
