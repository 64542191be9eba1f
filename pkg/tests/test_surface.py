import numpy as np
import pytest

from flatdimers.mesh import E, N, S, W, ConeVertexError
from flatdimers.surface import (DisconnectedSurface, NoBasisError, NonInvolutiveGluing, SpecSyntaxError,
                                UngluedSide, cut_system, homology_basis, intersection_number,
                                load_surface, parse_surface, winding)

TORUS = "square 0\nglue 0.E 0.W\nglue 0.N 0.S\n"


def J(g):
    return np.block([[np.zeros((g, g)), np.eye(g)], [-np.eye(g), np.zeros((g, g))]])


def test_unit_torus_genus_one_no_cones():
    s = parse_surface(TORUS)
    assert s.genus == 1
    assert s.cone_points == []
    assert s.setting_violations() == []


def test_pillow_g2_two_4pi_cones(pillow):
    assert pillow.n_squares == 8
    assert pillow.genus == 2
    assert [c / 2 for _, c in pillow.cone_points] == [4.0, 4.0]
    assert pillow.gauss_bonnet_defect() == 0


def test_pillowcase_parsed_but_flagged():
    s = load_surface("pillowcase_g0")
    assert s.genus == 0
    assert s.euler_characteristic == 2
    assert any("4pi" in v for v in s.setting_violations())


def test_pillow_g3_cones():
    s = load_surface("pillow_g3")
    assert s.genus == 3 and len(s.cone_points) == 4


@pytest.mark.parametrize("text,exc", [
    ("square 0\nsquare 0\n", SpecSyntaxError),
    ("square 0\nglue 0.E 0.W\n", UngluedSide),
    ("square 0\nglue 0.E 0.W\nglue 0.E 0.N\nglue 0.N 0.S\n", NonInvolutiveGluing),
    ("square 0\nglue 0.E 0.Q\n", SpecSyntaxError),
    ("square 0\nsquare 1\nglue 0.E 0.W\nglue 0.N 0.S\nglue 1.E 1.W\nglue 1.N 1.S\n", DisconnectedSurface),
])
def test_parser_rejects(text, exc):
    with pytest.raises(exc):
        parse_surface(text)


def test_torus_basis_is_side_cycles(torus):
    hb = homology_basis(torus)
    m = torus.base_mesh
    A, B = hb.paths()
    assert A == [m.side_half_edge(0, S)]
    assert B == [m.side_half_edge(0, E)]
    assert intersection_number(m, A, B) == 1


@pytest.mark.parametrize("name", ["unit_torus", "hex_torus", "pillow_g2", "pillow_g3"])
def test_basis_symplectic(name):
    s = load_surface(name)
    hb = homology_basis(s)
    assert hb.genus == s.genus
    assert np.array_equal(hb.intersection_matrix(), J(s.genus))


def test_genus_zero_has_no_basis():
    with pytest.raises(NoBasisError):
        homology_basis(load_surface("pillowcase_g0"))


def test_intersection_antisymmetric_and_bilinear(torus):
    m = torus.mesh(3)
    A = [m.side_half_edge(i, S) for i in range(3)]
    B = [m.side_half_edge(3 * j, W) for j in range(3)][::-1]
    B = [int(m.twin[h]) for h in B][::-1]
    assert intersection_number(m, A, A) == 0
    assert intersection_number(m, A, B) == -intersection_number(m, B, A)
    # staircase homologous to A + B: right along the bottom row, then up the right column
    stair = A + [m.side_half_edge(3 * j + 2, E) for j in range(3)]
    # crossing count by hand: the staircase meets B once more than A does
    assert intersection_number(m, A, stair) == intersection_number(m, A, B)


def test_winding_values(torus):
    m = torus.mesh(3)
    square = [m.side_half_edge(4, k) for k in (S, E, N, W)]
    assert winding(m, square) == pytest.approx(2 * np.pi)
    A = [m.side_half_edge(i, S) for i in range(3)]
    assert winding(m, A) == pytest.approx(0.0)
    stair = A + [m.side_half_edge(3 * j + 2, E) for j in range(3)]
    assert np.isclose(np.mod(winding(m, stair), 2 * np.pi), 0.0, atol=1e-12) or \
        np.isclose(np.mod(winding(m, stair), 2 * np.pi), 2 * np.pi)


def test_winding_through_cone_raises(pillow):
    m = pillow.base_mesh
    cone = int(m.cone_vertices[0])
    h = m.outgoing(cone)[0]
    # any closed walk starting at a cone vertex
    loop = [h]
    while m.dest(loop[-1]) != cone:
        loop.append(int(m.next[loop[-1]]))
    with pytest.raises(ConeVertexError):
        winding(m, loop)


def test_cut_systems():
    assert cut_system(load_surface("unit_torus")).paths == ()
    cs = cut_system(load_surface("pillow_g2"))
    assert len(cs.paths) == 1 and cs.verify()
    cs3 = cut_system(load_surface("pillow_g3"))
    assert len(cs3.paths) == 2 and cs3.verify()
    m = cs3.surface.base_mesh
    v = [{int(m.origin[h]) for h in p} | {int(m.dest(p[-1]))} for p in cs3.paths]
    assert not v[0] & v[1]


def test_torus_q0_is_odd_on_straight_cycles(torus):
    hb = homology_basis(torus)
    assert hb.q0_values(cut_system(torus)).tolist() == [1, 1]
