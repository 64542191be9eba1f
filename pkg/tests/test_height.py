import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flatdimers.graph import DimerCover
from flatdimers.height import (QuadFormChar, angle_flow, calibrate, cover_periods, dimer_flow,
                               enumerated_sectors, period_vector, q0_characteristics, sector_distribution)
from flatdimers.kasteleyn import TwistVector
from flatdimers.sampler import _Moves

from conftest import covers, graph, kmatrix


def test_dimer_flow_values_and_divergence():
    g = graph("hex-torus", 3)
    D = covers("hex-torus", 3)[5]
    f = dimer_flow(g, D)
    assert set(np.unique(f.values)) <= {0.0, 1.0}
    dw, db = f.divergence()
    assert np.allclose(dw, 1) and np.allclose(db, -1)
    assert dw.sum() + db.sum() == 0
    one = dimer_flow(graph("hex-torus", 1), DimerCover((2,)))
    assert one.values.tolist() == [0.0, 0.0, 1.0]


def test_invalid_cover_rejected():
    with pytest.raises(ValueError):
        dimer_flow(graph("hex-torus", 2), DimerCover((0, 0, 0, 0)))


@pytest.mark.parametrize("key,val", [(("square-pillow", 2, "unit_torus"), 0.25), (("hex-torus", 3, None), 1 / 3)])
def test_angle_flow(key, val):
    g = graph(*key)
    fA = angle_flow(g)
    assert np.allclose(fA.values, val)
    dw, db = fA.divergence()
    assert np.allclose(dw, 1) and np.allclose(db, -1)


def test_pillow_angle_flow_divergence():
    dw, db = angle_flow(graph("square-pillow", 1, "pillow_g2")).divergence()
    assert np.allclose(dw, 1) and np.allclose(db, -1)


def test_pillow_periods_integer_for_all_covers():
    g = graph("square-pillow", 1, "pillow_g2")
    m = cover_periods(g, covers("square-pillow", 1, "pillow_g2"), TwistVector.zero(2))
    assert m.dtype == np.int64 and m.shape[1] == 4


def test_hex_periods_integer_after_gauge_correction():
    # periods of the angle flow are N/3 and 2N/3, fractional unless 3 | N
    K = kmatrix("hex-torus", 2)
    g = K.graph
    D = covers("hex-torus", 2)[0]
    raw = period_vector(dimer_flow(g, D) - angle_flow(g), TwistVector.zero(1))
    fixed = period_vector(dimer_flow(g, D) - angle_flow(g), K.alpha_G)
    assert np.allclose(fixed, np.round(fixed), atol=1e-12)
    assert np.allclose(raw - fixed, 2 * K.alpha_G.vector)
    assert not np.allclose(raw, np.round(raw))


def test_face_rotation_keeps_periods():
    g = graph("square-pillow", 1, "pillow_g2")
    mv = _Moves(g)
    D = covers("square-pillow", 1, "pillow_g2")[123]
    s = set(D.edges)
    for k in range(mv.n_faces):
        if all(e in s for e in mv.even[k]):
            new = (s - set(mv.even[k])) | set(mv.odd[k])
            E = [0] * g.n_white
            for e in new:
                E[g.edge_w[e]] = e
            D2 = DimerCover(tuple(E))
            assert D2.is_valid(g)
            p = cover_periods(g, [D, D2], TwistVector.zero(2))
            assert np.array_equal(p[0], p[1])
            return
    pytest.skip("no flippable face in this cover")


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-4, 4), min_size=8, max_size=8),
       st.lists(st.integers(0, 1), min_size=4, max_size=4))
def test_quadratic_identity(uv, bits):
    q = QuadFormChar.of(np.array(bits[:2]) / 2, np.array(bits[2:]) / 2)
    u, v = np.array(uv[:4]), np.array(uv[4:])
    dot = u[:2] @ v[2:] - u[2:] @ v[:2]
    assert (q(u + v) - q(u) - q(v) - dot) % 2 == 0


def test_quadratic_identity_all_basis_pairs():
    q = QuadFormChar.of([0.5, 0], [0, 0.5])
    E = np.eye(4, dtype=np.int64)
    for i in range(4):
        for j in range(4):
            u, v = E[i], E[j]
            dot = u[:2] @ v[2:] - u[2:] @ v[:2]
            assert (q(u + v) - q(u) - q(v) - dot) % 2 == 0


def test_torus_calibration_is_half_half():
    K = kmatrix("square-pillow", 2, "unit_torus")
    cal = calibrate(K)
    assert len(cal) == 1
    assert cal[0][0] == QuadFormChar.of([0.5], [0.5]) == q0_characteristics(K.graph)


def test_pillow_calibration_matches_geometry():
    key = ("square-pillow", 1, "pillow_g2")
    cal = calibrate(kmatrix(*key), covers(*key))
    assert len(cal) == 1 and cal[0][0] == q0_characteristics(graph(*key))
    assert abs(abs(cal[0][1]) - 1) < 1e-10


def test_sectors_hex_n1():
    K = kmatrix("hex-torus", 1)
    st_ = sector_distribution(K)
    assert np.allclose(st_.probs, 1 / 3)
    per = cover_periods(K.graph, covers("hex-torus", 1), K.alpha_G)
    assert sorted(map(tuple, per.tolist())) == sorted(st_.as_dict())


@pytest.mark.parametrize("key", [("hex-torus", 3, None), ("square-pillow", 2, "unit_torus"),
                                 ("square-pillow", 1, "pillow_g2")])
def test_sector_law_matches_enumeration(key):
    K = kmatrix(*key)
    st_ = sector_distribution(K)
    assert abs(st_.probs.sum() - 1) < 1e-10
    ex = enumerated_sectors(K.graph, K.alpha_G, covers(*key))
    assert st_.total_variation(ex) < 1e-10


def test_fixed_M_aliasing_is_reported():
    with pytest.raises(ValueError, match="aliasing"):
        sector_distribution(kmatrix("square-pillow", 1, "pillow_g2"), M=1)
