"""Compactified free field: instanton law, Dirichlet action and theta-side predictions.

Classes are period vectors u = (p, q) in R^{2g} (A-periods p, B-periods q) of
harmonic forms. With T = Im Omega the Dirichlet action is

    S0(p, q) = (pi/2) (Omega p - q)^T T^-1 (conj(Omega) p - q).

The lattice side of the bosonization identity sums
exp[pi i q0(N, M) + 2 pi i (a.(M + b1) - b.(N + a1)) - S0(N + a1, M + b1)]
over integer (N, M); the theta side is
(-1)^Arf(q0) theta[a1/2 + a + a0; b1/2 + b + b0](0) conj(theta[a1/2 - a + a0; b1/2 - b + b0](0))
times exp(2 pi i a.(b1 + 2 b0)). Their ratio is a constant Z1 = det(2 Im Omega)^(1/2)
independent of (a, b).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .theta import arf, theta, half_integer_chars, _as_omega

__all__ = ["action_S0", "InstantonLaw", "instanton_law", "lattice_side", "theta_side",
           "bosonization_check", "BosonizationReport", "predicted_ratio", "predicted_ratios",
           "DegenerateOmegaError"]


class DegenerateOmegaError(ValueError):
    pass


def _TT(Omega):
    Om = _as_omega(Omega)
    T = 0.5 * (Om.imag + Om.imag.T)
    if np.linalg.eigvalsh(T).min() <= 0:
        raise ValueError("Im Omega is not positive definite")
    return Om, T


def action_S0(u, Omega) -> float:
    Om, T = _TT(Omega)
    g = len(Om)
    u = np.asarray(u, dtype=float)
    p, q = u[..., :g], u[..., g:]
    v = p @ Om.T - q
    s = 0.5 * np.pi * np.einsum("...i,ij,...j->...", v, np.linalg.inv(T), v.conj())
    return s.real if np.ndim(s) else float(s.real)


def _box(g: int, R: int) -> np.ndarray:
    r = np.arange(-R, R + 1)
    return np.array(list(itertools.product(r, repeat=2 * g)), dtype=np.int64)


@dataclass
class InstantonLaw:
    omega: np.ndarray
    shift: np.ndarray          # (a(alpha_1), b(alpha_1))
    R: int
    classes: np.ndarray        # m + shift
    probs: np.ndarray
    tail_bound: float

    def pmf(self) -> dict:
        base = np.rint(self.classes - self.shift).astype(np.int64)
        return {tuple(int(x) for x in m): float(p) for m, p in zip(base, self.probs)}

    def mean(self) -> np.ndarray:
        return self.probs @ self.classes


def instanton_law(Omega, shift=None, R: int = 10) -> InstantonLaw:
    """P[u = m + shift] proportional to exp(-S0(m + shift)) on the box |m| <= R."""
    Om, T = _TT(Omega)
    g = len(Om)
    shift = np.zeros(2 * g) if shift is None else np.asarray(shift, dtype=float)
    cls = _box(g, R) + shift
    S = action_S0(cls, Om)
    w = np.exp(-(S - S.min()))
    P = w / w.sum()
    # smallest action at the box boundary bounds the neglected mass per term
    edge = np.abs(cls - shift).max(axis=1) == R
    tail = float(P[edge].sum())
    return InstantonLaw(Om, shift, R, cls, P, tail)


def lattice_side(alpha, alpha1, q0, Omega, R: int = 10) -> complex:
    """Truncated instanton sum with the q0 sign and the twist phase of alpha."""
    Om, T = _TT(Omega)
    g = len(Om)
    a, b = (np.asarray(x, dtype=float) for x in alpha)
    a1, b1 = (np.asarray(x, dtype=float) for x in alpha1)
    a0, b0 = (np.asarray(x, dtype=float) for x in q0)
    m = _box(g, R)
    N, M = m[:, :g], m[:, g:]
    u = np.concatenate([N + a1, M + b1], axis=1)
    ph = np.pi * (np.sum(N * M, axis=1) + M @ (2 * a0) + N @ (2 * b0)) \
        + 2 * np.pi * ((M + b1) @ a - (N + a1) @ b)
    return complex(np.sum(np.exp(1j * ph - action_S0(u, Om))))


def theta_side(alpha, alpha1, q0, Omega) -> complex:
    Om = _as_omega(Omega)
    a, b = (np.asarray(x, dtype=float) for x in alpha)
    a1, b1 = (np.asarray(x, dtype=float) for x in alpha1)
    a0, b0 = (np.asarray(x, dtype=float) for x in q0)
    s = 1 - 2 * arf(a0, b0)
    t1 = theta(a1 / 2 + a + a0, b1 / 2 + b + b0, 0, Om)
    t2 = theta(a1 / 2 - a + a0, b1 / 2 - b + b0, 0, Om)
    return complex(s * t1 * np.conj(t2) * np.exp(2j * np.pi * a @ (b1 + 2 * b0)))


@dataclass
class BosonizationReport:
    lattice: complex
    theta: complex
    difference: float          # |ratio of ratios - 1|
    Z1: complex
    Z1_reference: complex
    lattice_ref: complex
    theta_ref: complex


def bosonization_check(alpha, alpha1, q0, Omega, R: int = 10, alpha_ref=None,
                       tail_tol: float = 1e-12) -> BosonizationReport:
    """Compare L(alpha)/Theta(alpha) with the same ratio at ``alpha_ref``.

    Z1 cancels in the ratio of ratios. The default reference twist is a generic
    non-half-integer point so that neither side vanishes for odd q0.
    """
    Om, T = _TT(Omega)
    g = len(Om)
    lam = np.linalg.eigvalsh(T).min()
    # worst case decay along the A-direction: S0(p, 0) >= (pi/2) lam |p|^2
    if np.exp(-0.5 * np.pi * lam * (R + 1) ** 2) * (2 * R + 3) ** (2 * g) > tail_tol:
        raise ValueError(f"truncation R={R} leaves a tail above {tail_tol:g}")
    if alpha_ref is None:
        alpha_ref = (np.full(g, 0.1234), np.full(g, 0.0617))
    L = lattice_side(alpha, alpha1, q0, Om, R)
    Th = theta_side(alpha, alpha1, q0, Om)
    Lr = lattice_side(alpha_ref, alpha1, q0, Om, R)
    Tr = theta_side(alpha_ref, alpha1, q0, Om)
    if abs(Tr) < 1e-300 or abs(Lr) < 1e-300:
        raise ValueError("reference twist gives a vanishing side")
    Z1r = Lr / Tr
    if abs(Th) < 1e-14 * abs(Tr):
        # both sides should vanish together (odd characteristic)
        diff = abs(L) / abs(Lr)
        Z1 = complex(np.nan)
    else:
        Z1 = L / Th
        diff = abs(Z1 / Z1r - 1)
    return BosonizationReport(L, Th, float(diff), complex(Z1), complex(Z1r), Lr, Tr)


def predicted_ratios(Omega, q0) -> dict:
    """Predicted signed ratios (-1)^Arf(q0+l) Z_l / Z for all half-integer l.

    Each is Z1 |theta[a0 + l_a; b0 + l_b](0, Omega)|^2 with Z1 fixed by
    2^-g sum_l prediction = 1, the continuum counterpart of the Kasteleyn formula.
    Odd characteristics give 0.
    """
    Om = _as_omega(Omega)
    g = len(Om)
    a0, b0 = (np.asarray(x, dtype=float) for x in q0)
    vals = {}
    for ch in half_integer_chars(g):
        l = (np.array(ch.a), np.array(ch.b))
        a, b = (a0 + l[0]) % 1, (b0 + l[1]) % 1
        if arf(a, b):
            vals[(ch.a, ch.b)] = 0.0
        else:
            vals[(ch.a, ch.b)] = abs(theta(a, b, 0, Om)) ** 2
    total = sum(vals.values())
    if total <= 1e-300 or min(v for k, v in vals.items() if v) < 1e-14 * total:
        raise DegenerateOmegaError("an even theta constant vanishes")
    Z1 = 2 ** g / total
    return {k: Z1 * v for k, v in vals.items()}


def predicted_ratio(l, alpha1, q0, Omega) -> float:
    """Prediction for one half-integer class l = (l_a, l_b); alpha1 must be 0 here."""
    if np.any(np.asarray(alpha1, dtype=float) != 0):
        raise ValueError("predictions are implemented for alpha_1 = 0 only")
    key = tuple(tuple(float(x) for x in np.ravel(v)) for v in l)
    return predicted_ratios(Omega, q0)[key]
