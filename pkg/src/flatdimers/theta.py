"""Riemann theta functions with real characteristics.

theta[a, b](z, Omega) = sum_{m in Z^g} exp(pi i (m+a)^T Omega (m+a) + 2 pi i (z-b)^T (m+a)).

Note the sign in front of b: this normalization differs from the more common
one with (z+b). The sum is truncated to a box around the Gaussian peak whose
radius comes from the smallest eigenvalue of Im Omega and an explicit tail bound.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = ["ThetaChar", "theta", "arf", "theta_reduce", "half_integer_chars", "even_chars",
           "theta_radius"]


@dataclass(frozen=True)
class ThetaChar:
    a: tuple
    b: tuple

    @classmethod
    def of(cls, a, b):
        return cls(tuple(float(x) for x in np.ravel(a)), tuple(float(x) for x in np.ravel(b)))

    @property
    def is_half_integer(self) -> bool:
        v = 2 * np.array(self.a + self.b)
        return bool(np.allclose(v, np.round(v)))

    @property
    def arf(self) -> int:
        return arf(self.a, self.b)


def _as_omega(Omega) -> np.ndarray:
    Om = np.atleast_2d(np.asarray(getattr(Omega, "omega", Omega), dtype=complex))
    if Om.shape[0] != Om.shape[1]:
        raise ValueError("Omega must be square")
    return Om


def theta_radius(Omega, tol: float = 1e-16, center_shift: float = 1.0) -> int:
    """Box radius R with the Gaussian tail outside [-R, R]^g below ``tol`` (relative to 1)."""
    Om = _as_omega(Omega)
    T = 0.5 * (Om.imag + Om.imag.T)
    lam = np.linalg.eigvalsh(T).min()
    if lam <= 0:
        raise ValueError("Im Omega is not positive definite")
    g = len(Om)
    # terms decay like exp(-pi lam r^2); count ~ (2r+1)^g shells
    R = 1
    while True:
        tail = (2 * R + 3) ** g * np.exp(-np.pi * lam * (R + 1 - center_shift) ** 2)
        if R + 1 > center_shift and tail < tol:
            return R
        R += 1


def theta(a, b, z, Omega, tol: float = 1e-16) -> complex:
    """theta[a, b](z, Omega) under the (z - b, + a) convention."""
    Om = _as_omega(Omega)
    g = len(Om)
    a = np.resize(np.asarray(a, dtype=float), g)
    b = np.resize(np.asarray(b, dtype=float), g)
    z = np.resize(np.asarray(z, dtype=complex), g)
    T = Om.imag
    if np.linalg.eigvalsh(0.5 * (T + T.T)).min() <= 0:
        raise ValueError("Im Omega is not positive definite")
    # center the box at the maximum of the Gaussian envelope
    # |term| = exp(-pi (m+a)^T T (m+a) - 2 pi Im(z)^T (m+a)) peaks at m + a = -T^{-1} Im z
    c = -np.linalg.solve(T, z.imag) - a
    c0 = np.round(c)
    R = theta_radius(Om, tol, center_shift=0.5 * np.sqrt(g) + 0.5)
    rng = np.arange(-R, R + 1)
    pts = np.array(list(itertools.product(rng, repeat=g)), dtype=float) + c0
    v = pts + a
    quad = np.einsum("ni,ij,nj->n", v, Om, v)
    lin = v @ (z - b)
    expo = np.pi * 1j * quad + 2j * np.pi * lin
    m = expo.real.max()
    return complex(np.exp(m) * np.sum(np.exp(expo - m)))


def arf(a, b) -> int:
    """Arf invariant sum_i (2 a_i)(2 b_i) mod 2 of a half-integer characteristic."""
    a2 = 2 * np.asarray(a, dtype=float)
    b2 = 2 * np.asarray(b, dtype=float)
    if not (np.allclose(a2, np.round(a2)) and np.allclose(b2, np.round(b2))):
        raise ValueError("arf needs half-integer characteristics")
    return int(np.sum(np.round(a2).astype(int) * np.round(b2).astype(int)) % 2)


def theta_reduce(a, b, z, Omega):
    """(prefactor, shifted z) with theta[a,b](z) = prefactor * theta[0,0](shifted z)."""
    Om = _as_omega(Omega)
    g = len(Om)
    a = np.resize(np.asarray(a, dtype=float), g)
    b = np.resize(np.asarray(b, dtype=float), g)
    z = np.resize(np.asarray(z, dtype=complex), g)
    pref = np.exp(np.pi * 1j * a @ Om @ a + 2j * np.pi * (z - b) @ a)
    return complex(pref), z - b + Om @ a


def half_integer_chars(g: int):
    for bits in itertools.product((0, 1), repeat=2 * g):
        v = np.array(bits) / 2
        yield ThetaChar.of(v[:g], v[g:])


def even_chars(g: int):
    return [c for c in half_integer_chars(g) if c.arf == 0]
