import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flatdimers.cff import (DegenerateOmegaError, action_S0, bosonization_check, instanton_law, lattice_side,
                            predicted_ratio, predicted_ratios, theta_side)
from flatdimers.hodge import period_matrix
from flatdimers.surface import load_surface
from flatdimers.theta import arf, theta

TAUS = [np.array([[1j]]), np.array([[np.exp(1j * np.pi / 3)]]), np.array([[0.3 + 1.4j]])]


@pytest.fixture(scope="module")
def pillow_omega():
    return period_matrix(load_surface("pillow_g2"), 8).omega


def test_action_examples():
    assert action_S0([0, 0], [[1j]]) == 0
    assert action_S0([1, 0], [[1j]]) == pytest.approx(np.pi / 2)
    assert action_S0([0, 1], [[1j]]) == pytest.approx(np.pi / 2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_action_even_and_nonnegative(u):
    Om = np.array([[0.1 + 1.2j, 0.2 + 0.1j], [0.2 + 0.1j, -0.3 + 0.9j]])
    s = action_S0(u, Om)
    assert s >= -1e-12
    assert s == pytest.approx(action_S0(-np.asarray(u), Om))


def test_instanton_symmetric():
    law = instanton_law([[0.2 + 1.1j]], R=6)
    p = law.pmf()
    assert all(abs(p[k] - p[(-k[0], -k[1])]) < 1e-15 for k in p)
    assert law.tail_bound < 1e-10
    assert np.allclose(law.mean(), 0, atol=1e-14)


@pytest.mark.parametrize("a,b", [(0.0, 0.0), (0.17, -0.31), (0.5, 0.25)])
def test_poisson_resummation_g1(a, b):
    tau = 0.3 + 1.4j
    X, T = tau.real, tau.imag
    direct = lattice_side(([a], [b]), ([0.0], [0.0]), ([0.0], [0.0]), [[tau]], R=12)
    r = np.arange(-12, 13)
    N, k = np.meshgrid(r, r, indexing="ij")
    # the (-1)^(N M) of the quadratic form moves the M-frequency to a + N/2
    s = a + N / 2
    dual = np.sqrt(2 * T) * np.sum(np.exp(-np.pi * T * N ** 2 / 2 - 2 * np.pi * T * (k - s) ** 2
                                          - 2j * np.pi * (k - s) * X * N - 2j * np.pi * b * N))
    assert abs(direct - dual) < 1e-12 * abs(dual)


@pytest.mark.parametrize("Om", TAUS)
def test_Z1_is_sqrt_det(Om):
    L = lattice_side(([0.0], [0.0]), ([0.0], [0.0]), ([0.0], [0.0]), Om)
    Th = theta_side(([0.0], [0.0]), ([0.0], [0.0]), ([0.0], [0.0]), Om)
    assert L / Th == pytest.approx(np.sqrt(np.linalg.det(2 * Om.imag)), rel=1e-12)


def test_alpha_zero_ratio_one():
    r = bosonization_check(([0.0], [0.0]), ([0.0], [0.0]), ([0.0], [0.0]), [[1j]])
    assert r.difference < 1e-8


def test_half_integer_twist_gives_real_lattice_side():
    for q0 in [([0.0], [0.0]), ([0.5], [0.0]), ([0.5], [0.5])]:
        L = lattice_side(([0.5], [0.0]), ([0.0], [0.0]), q0, [[0.3 + 1.4j]])
        assert abs(L.imag) < 1e-8 * max(1, abs(L))


@pytest.mark.parametrize("Om", TAUS)
def test_bosonization_g1_all_q0(Om):
    rng = np.random.default_rng(4)
    for bits in [(0, 0), (0.5, 0), (0, 0.5), (0.5, 0.5)]:
        q0 = ([bits[0]], [bits[1]])
        for _ in range(4):
            al = ([rng.uniform(-0.5, 0.5)], [rng.uniform(-0.5, 0.5)])
            a1 = ([rng.uniform(-0.5, 0.5)], [rng.uniform(-0.5, 0.5)])
            assert bosonization_check(al, a1, q0, Om).difference < 1e-10


def test_bosonization_pillow(pillow_omega):
    rng = np.random.default_rng(5)
    q0 = (np.array([0.5, 0.5]), np.array([0.5, 0.5]))
    for _ in range(3):
        al = (rng.uniform(-0.5, 0.5, 2), rng.uniform(-0.5, 0.5, 2))
        r = bosonization_check(al, (np.zeros(2), np.zeros(2)), q0, pillow_omega, R=8, tail_tol=1e-6)
        assert r.difference < 1e-6


def test_truncation_guard(pillow_omega):
    with pytest.raises(ValueError):
        bosonization_check((np.zeros(2), np.zeros(2)), (np.zeros(2), np.zeros(2)), ([0, 0], [0, 0]),
                           pillow_omega, R=3)


@pytest.mark.parametrize("q0", [([0.5], [0.5]), ([0.0], [0.0]), ([0.5], [0.0])])
def test_prediction_sum_rule_and_parity(q0):
    pred = predicted_ratios([[1j]], q0)
    assert sum(pred.values()) / 2 == pytest.approx(1.0, abs=1e-14)
    for (la, lb), v in pred.items():
        if arf((np.array(q0[0]) + la) % 1, (np.array(q0[1]) + lb) % 1):
            assert v == 0


def test_prediction_jacobi_at_i():
    pred = predicted_ratios([[1j]], ([0.5], [0.5]))
    p3 = pred[((0.5,), (0.5,))]   # characteristic (0, 0)
    p2 = pred[((0.0,), (0.5,))]   # characteristic (1/2, 0)
    p4 = pred[((0.5,), (0.0,))]   # characteristic (0, 1/2)
    assert p2 / p3 == pytest.approx(2 ** -0.5, rel=1e-13)
    assert p4 == pytest.approx(p2, rel=1e-13)
    assert abs(theta(0.5, 0, 0, [[1j]])) ** 2 / abs(theta(0, 0, 0, [[1j]])) ** 2 == pytest.approx(p2 / p3)


def test_prediction_single_and_guards():
    q0 = ([0.5], [0.5])
    assert predicted_ratio(([0.0], [0.5]), ([0.0], [0.0]), q0, [[1j]]) == \
        predicted_ratios([[1j]], q0)[((0.0,), (0.5,))]
    with pytest.raises(ValueError):
        predicted_ratio(([0.0], [0.5]), ([0.1], [0.0]), q0, [[1j]])


def test_degenerate_omega_rejected():
    # a diagonal genus-2 Omega has a vanishing even constant: theta[(1/2,1/2);(1/2,1/2)] is even but splits into odd factors
    with pytest.raises(DegenerateOmegaError):
        predicted_ratios(np.diag([1j, 1.3j]), ([0, 0], [0, 0]))
