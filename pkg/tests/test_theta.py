import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flatdimers.theta import arf, even_chars, half_integer_chars, theta, theta_reduce


def random_omega(rng, g):
    A = rng.normal(size=(g, g))
    X = rng.normal(size=(g, g)) * 0.5
    return 0.5 * (X + X.T) + 1j * (A @ A.T * 0.3 + 0.7 * np.eye(g))


def test_theta_constant_at_i():
    # sum exp(-pi m^2) = pi^(1/4) / Gamma(3/4)
    exact = math.pi ** 0.25 / math.gamma(0.75)
    assert theta(0, 0, 0, [[1j]]) == pytest.approx(exact, abs=1e-14)
    direct = sum(math.exp(-math.pi * m * m) for m in range(-10, 11))
    assert abs(theta(0, 0, 0, [[1j]]) - direct) < 1e-12


def test_jacobi_theta2_over_theta3():
    t2 = theta(0.5, 0, 0, [[1j]])
    t3 = theta(0, 0, 0, [[1j]])
    assert abs(t2 / t3 - 2 ** -0.25) < 1e-13


@pytest.mark.parametrize("g", [1, 2, 3])
def test_odd_constants_vanish(g):
    rng = np.random.default_rng(g)
    Om = random_omega(rng, g)
    for ch in half_integer_chars(g):
        v = theta(ch.a, ch.b, 0, Om)
        if ch.arf:
            assert abs(v) < 1e-13
        else:
            assert abs(v) > 1e-6


@pytest.mark.parametrize("g", [1, 2, 3, 4])
def test_even_count(g):
    assert len(even_chars(g)) == 2 ** (g - 1) * (2 ** g + 1)


def test_arf_examples():
    assert arf([0], [0]) == 0
    assert arf([0.5], [0.5]) == 1
    assert arf([0.5, 0], [0.5, 0]) == 1
    with pytest.raises(ValueError):
        arf([0.3], [0])


@pytest.mark.parametrize("g", [1, 2, 3])
def test_three_identities_randomized(g):
    rng = np.random.default_rng(100 + g)
    worst = 0.0
    for _ in range(100):
        Om = random_omega(rng, g)
        a, b = rng.uniform(-1, 1, g), rng.uniform(-1, 1, g)
        z = rng.uniform(-0.5, 0.5, g) + 1j * rng.uniform(-0.3, 0.3, g)
        k = rng.integers(-2, 3, g)
        t0 = theta(a, b, z, Om)
        scale = max(abs(t0), 1e-300)
        # item 1: integer and Omega-periods
        worst = max(worst, abs(theta(a, b, z + k, Om) - np.exp(2j * np.pi * k @ a) * t0) / scale)
        lhs = theta(a, b, z + Om @ k, Om)
        rhs = np.exp(2j * np.pi * k @ b) * np.exp(-1j * np.pi * k @ Om @ k - 2j * np.pi * z @ k) * t0
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
        # item 2: parity for half-integer characteristics
        ah, bh = rng.integers(0, 2, g) / 2, rng.integers(0, 2, g) / 2
        p = theta(ah, bh, z, Om)
        worst = max(worst, abs(theta(ah, bh, -z, Om) - (-1) ** arf(ah, bh) * p) / max(abs(p), 1e-300))
        # item 3: reduction to the characteristic-free theta
        pref, zs = theta_reduce(a, b, z, Om)
        worst = max(worst, abs(pref * theta(0, 0, zs, Om) - t0) / scale)
    assert worst < 1e-12


def test_reduce_trivial():
    pref, zs = theta_reduce([0, 0], [0, 0], [0.1, 0.2j], np.diag([1j, 2j]))
    assert pref == 1
    assert np.allclose(zs, [0.1, 0.2j])


def test_reduce_g1_two_i():
    rng = np.random.default_rng(9)
    for _ in range(10):
        a, b = rng.uniform(-1, 1, 2)
        z = complex(*rng.uniform(-1, 1, 2))
        pref, zs = theta_reduce(a, b, z, [[2j]])
        assert abs(pref * theta(0, 0, zs, [[2j]]) - theta(a, b, z, [[2j]])) < 1e-12


def test_parity_by_composed_reductions():
    # theta[a,b](-z) = theta[-a,-b](z) by m -> -m; integer shifts of -a,-b back to (a,b) give the Arf sign
    Om = np.array([[1.1j + 0.2, 0.3], [0.3, 0.9j - 0.1]])
    z = np.array([0.13 + 0.05j, -0.21 + 0.02j])
    for ch in half_integer_chars(2):
        a, b = np.array(ch.a), np.array(ch.b)
        lhs = theta(-a, -b, z, Om)
        # shifting a by integers n: theta[a+n, b] = exp(-2 pi i n.b) ... here n = 2a, shift of b is free up to e^{2 pi i a.(2b)}
        rhs = theta(a, b, z, Om) * np.exp(-2j * np.pi * a @ (2 * b))
        assert abs(lhs - rhs) < 1e-12
        assert abs(theta(a, b, -z, Om) - (-1) ** ch.arf * theta(a, b, z, Om)) < 1e-12


def test_not_positive_definite():
    with pytest.raises(ValueError):
        theta(0, 0, 0, [[-1j]])


@settings(max_examples=40, deadline=None)
@given(st.floats(0.3, 3), st.floats(-1, 1), st.floats(-1, 1))
def test_theta_constants_real_on_imaginary_axis(y, a, b):
    # tau = iy: theta[a,0](0) has real terms, theta[0,b](0) pairs m with -m
    for v in (theta(a, 0, 0, [[1j * y]]), theta(0, b, 0, [[1j * y]])):
        assert abs(v.imag) < 1e-12 * max(1, abs(v))
