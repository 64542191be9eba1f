import numpy as np
import pytest

from flatdimers.hodge import PeriodMatrix, harmonic_basis, mesh_doubling, period_matrix, star_weights
from flatdimers.surface import homology_basis, load_surface


def test_star_weights():
    m = load_surface("unit_torus").mesh(4)
    assert np.allclose(star_weights(m), 1.0)
    h = load_surface("hex_torus").mesh(3)
    assert np.allclose(star_weights(h), 1 / np.sqrt(3))


def test_torus_dual_of_A_is_dx(torus):
    forms = harmonic_basis(torus, 4)
    m = forms[0].mesh
    v = m.vec[m.edge_he]
    horiz = np.abs(v.imag) < 1e-12
    assert np.allclose(forms[0].values[horiz] * np.sign(v.real[horiz]), 1 / 4)
    assert np.allclose(forms[0].values[~horiz], 0, atol=1e-12)


@pytest.mark.parametrize("name,m", [("unit_torus", 4), ("pillow_g2", 8), ("pillow_g3", 4)])
def test_period_pairing_is_identity(name, m):
    s = load_surface(name)
    forms = harmonic_basis(s, m)
    C = homology_basis(s).chains(forms[0].mesh)
    H = np.array([f.on_half_edges() for f in forms])
    # antisymmetric chains count each edge from both half-edges
    assert np.allclose(C @ H.T / 2, np.eye(2 * s.genus), atol=1e-8)
    assert max(f.closed_residual for f in forms) < 1e-10
    assert max(f.coclosed_residual for f in forms) < 1e-8


def test_unit_torus_omega(torus):
    P = period_matrix(torus, 32)
    assert abs(P.omega[0, 0] - 1j) < 1e-6


def test_hex_torus_omega():
    P = period_matrix(load_surface("hex_torus"), 8)
    assert abs(P.omega[0, 0] - np.exp(1j * np.pi / 3)) < 1e-3


def test_pillow_diagnostics(pillow):
    P = period_matrix(pillow, 16)
    assert P.symmetry_residual < 1e-4
    assert P.cholesky_ok
    assert P.bilinear_residual < 1e-3
    assert np.allclose(P.omega, P.omega.T)


def test_pillow_first_order_convergence(pillow):
    # error roughly halves per doubling near the 4 pi cones
    r = mesh_doubling(pillow, (4, 8, 16))["ratios"][0]
    assert 1.6 < r < 2.6


def test_omega_json_round_trip(torus):
    P = period_matrix(torus, 8, richardson=False)
    d = P.to_dict()
    assert d["format"] == "flatdimers.omega/1"
    assert np.allclose(PeriodMatrix.omega_from_dict(d), P.omega, atol=1e-13)


def test_mesh_guard(torus):
    with pytest.raises(ValueError):
        harmonic_basis(torus, 1)
