"""Flows, height periods, the quadratic form q0 and monodromy sectors.

Edges are oriented from white to black. The period of a flow f along a basis
cycle C is sum_e cross(e, C) f(e) - 2 a_G(C). For f = f_D - f^A (dimer flow
minus angle flow) this is an integer, the C-period of the height 1-form of D.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .graph import DimerGraph, DimerCover, enumerate_matchings
from .kasteleyn import (KasteleynMatrix, TwistVector, twist, det, logdet, reference_periods,
                        signed_partition_functions)
from .theta import arf

__all__ = ["Flow", "QuadFormChar", "dimer_flow", "angle_flow", "period_vector", "cover_periods",
           "q0_characteristics", "calibrate", "SectorTable", "sector_distribution",
           "enumerated_sectors", "CalibrationError"]


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Flow:
    graph: DimerGraph
    values: np.ndarray  # f(wb) on edges oriented white -> black

    def divergence(self):
        """(div at whites, div at blacks); outgoing flow counts positive."""
        g = self.graph
        dw = np.bincount(g.edge_w, weights=self.values, minlength=g.n_white)
        db = -np.bincount(g.edge_b, weights=self.values, minlength=g.n_black)
        return dw, db

    def __sub__(self, other: "Flow") -> "Flow":
        return Flow(self.graph, self.values - other.values)


def dimer_flow(g: DimerGraph, D: DimerCover) -> Flow:
    if not D.is_valid(g):
        raise ValueError("invalid dimer cover")
    return Flow(g, D.indicator(g))


def angle_flow(g: DimerGraph) -> Flow:
    return Flow(g, g.edge_angle.copy())


def period_vector(f: Flow, alpha_G: TwistVector) -> np.ndarray:
    """Periods along A_1..A_g, B_1..B_g, corrected by -2 a_G."""
    g = f.graph
    return g.edge_cross.T @ f.values - 2 * alpha_G.vector


def cover_periods(g: DimerGraph, covers, alpha_G: TwistVector) -> np.ndarray:
    """Integer period vectors of f_D - f^A for a list of covers, shape (n, 2g)."""
    E = np.asarray([c.edges for c in covers], dtype=np.int64)
    c = reference_periods(g, alpha_G)
    P = g.edge_cross[E].sum(axis=1) - c
    m = np.rint(P)
    if len(P) and np.max(np.abs(P - m)) > 1e-9:
        raise ValueError("non-integer periods: crossing data or gauge form is inconsistent")
    return m.astype(np.int64)


@dataclass(frozen=True)
class QuadFormChar:
    """Quadratic form q(m) = m_A . m_B + 2 a0 . m_B + 2 b0 . m_A mod 2 on period vectors."""

    a0: tuple
    b0: tuple

    @classmethod
    def of(cls, a0, b0):
        return cls(tuple(float(x) for x in np.ravel(a0)), tuple(float(x) for x in np.ravel(b0)))

    @property
    def genus(self):
        return len(self.a0)

    def __call__(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=np.int64)
        g = self.genus
        mA, mB = m[..., :g], m[..., g:]
        a2 = np.rint(2 * np.array(self.a0)).astype(np.int64)
        b2 = np.rint(2 * np.array(self.b0)).astype(np.int64)
        return (np.sum(mA * mB, axis=-1) + mB @ a2 + mA @ b2) % 2

    @property
    def arf(self) -> int:
        return arf(self.a0, self.b0)

    def shifted(self, l: TwistVector) -> "QuadFormChar":
        return QuadFormChar.of((np.add(self.a0, l.a)) % 1, (np.add(self.b0, l.b)) % 1)

    @property
    def pair(self):
        return np.array(self.a0), np.array(self.b0)


def q0_characteristics(g: DimerGraph) -> QuadFormChar:
    """Characteristics of q0 from winding, cut crossings and the +1 shift (stored at build)."""
    return QuadFormChar.of(*g.q0_chars)


def calibrate(K: KasteleynMatrix, covers=None, n_probe: int = 3, seed: int = 0):
    """Brute-force (a0, b0, eps) with eps det K_phi = sum_D (-1)^{q(C_D)} prod_e phi_e |K_e|.

    Random complex edge multipliers phi make the match unambiguous. Returns the
    list of consistent (QuadFormChar, eps); a well-posed graph has exactly one.
    """
    g = K.graph
    if covers is None:
        covers = list(enumerate_matchings(g))
    m = cover_periods(g, covers, K.alpha_G)
    E = np.asarray([c.edges for c in covers], dtype=np.int64)
    rng = np.random.default_rng(seed)
    absK = np.abs(K.entries)
    probes = []
    for _ in range(n_probe):
        phi = rng.normal(size=g.n_edges) + 1j * rng.normal(size=g.n_edges)
        vals = K.entries * phi
        d = det(K.dense(vals)) if g.n_white else 1.0
        terms = np.prod((phi * absK)[E], axis=1)
        probes.append((d, terms))
    out = []
    gg = g.genus
    for bits in itertools.product((0, 1), repeat=2 * gg):
        q = QuadFormChar.of(np.array(bits[:gg]) / 2, np.array(bits[gg:]) / 2)
        sign = 1 - 2 * q(m)
        eps = []
        for d, terms in probes:
            s = np.sum(sign * terms)
            eps.append(d / s if abs(s) > 1e-300 else np.nan)
        eps = np.array(eps)
        if np.all(np.isfinite(eps)) and np.allclose(eps, eps[0], rtol=1e-8, atol=0) \
                and abs(abs(eps[0]) - 1) < 1e-8:
            out.append((q, complex(eps[0])))
    return out


@dataclass
class SectorTable:
    periods: np.ndarray       # (n, 2g) integer period vectors
    probs: np.ndarray         # probabilities
    q0_values: np.ndarray     # q0 evaluated on each period vector
    M: int
    boundary_mass: float

    def as_dict(self) -> dict:
        return {tuple(int(x) for x in m): float(p) for m, p in zip(self.periods, self.probs)}

    def total_variation(self, other: dict) -> float:
        mine = self.as_dict()
        keys = set(mine) | set(other)
        return 0.5 * sum(abs(mine.get(k, 0.0) - other.get(k, 0.0)) for k in keys)


BATCH_LU_LIMIT = 64


def _twisted_logdets(K: KasteleynMatrix, ta: np.ndarray, tb: np.ndarray):
    """(phases, log|det|) of K twisted by the rows of (ta, tb).

    Small matrices go through numpy's stacked LU in batches; element growth of
    partial pivoting is harmless at these sizes. Larger ones use the QR path.
    """
    g = K.graph
    gg = g.genus
    n = g.n_white
    if n > BATCH_LU_LIMIT:
        out = [logdet(twist(K, TwistVector.of(a, b))) for a, b in zip(ta, tb)]
        return np.array([o[0] for o in out]), np.array([o[1] for o in out])
    base = K.entries
    cA, cB = g.edge_cross[:, :gg], g.edge_cross[:, gg:]
    flat = g.edge_w * n + g.edge_b
    phs, las = [], []
    step = max(1, 200_000 // max(n * n, 1))
    for s in range(0, len(ta), step):
        a, b = ta[s:s + step], tb[s:s + step]
        vals = base * np.exp(2j * np.pi * (a @ cB.T - b @ cA.T))
        M = np.zeros((len(a), n * n), dtype=complex)
        for k in range(len(flat)):
            M[:, flat[k]] += vals[:, k]
        sign, la = np.linalg.slogdet(M.reshape(len(a), n, n))
        phs.append(sign)
        las.append(la)
    return np.concatenate(phs), np.concatenate(las)


def sector_distribution(K: KasteleynMatrix, M: int | None = None, tol: float = 1e-9,
                        q0: QuadFormChar | None = None, max_M: int = 64) -> SectorTable:
    """Exact law of the integer periods by Fourier inversion over twisted determinants.

    With c the reference periods, Z_t = eps^{-1} exp(-2 pi i [a.c_B - b.c_A]) det K_t
    equals sum_D (-1)^{q0(m_D)} w(D) exp(2 pi i [a.m_B - b.m_A]); sampling t on the
    grid {k/(2M+1)}^{2g} and inverting recovers the signed sector weights. The
    pairing reads the A-periods off the b-twists and the B-periods off the a-twists.
    ``M=None`` doubles M from 2 until no mass sits on the boundary of the box.
    """
    g = K.graph
    gg = g.genus
    q0 = q0 or q0_characteristics(g)
    sp = signed_partition_functions(K, q0.pair)
    c = reference_periods(g, K.alpha_G)
    auto = M is None
    M = 2 if auto else M
    while True:
        L = 2 * M + 1
        grid = np.arange(L) / L
        idx = np.array(list(itertools.product(range(L), repeat=2 * gg)), dtype=np.int64)
        ta, tb = grid[idx[:, :gg]], grid[idx[:, gg:]]
        ph, la = _twisted_logdets(K, ta, tb)
        pre = np.exp(-2j * np.pi * (ta @ c[gg:] - tb @ c[:gg]))
        vals = (ph * pre * np.exp(la - sp.log_Z) / sp.eps).reshape((L,) * (2 * gg))
        coef = np.fft.fftn(vals) / L ** (2 * gg)
        # coefficient at frequency k: k_a = m_B, k_b = -m_A
        ks = np.arange(L)
        ks = np.where(ks > M, ks - L, ks)
        pts = np.array(list(itertools.product(ks, repeat=2 * gg)), dtype=np.int64)
        w = coef[tuple((pts % L).T)]
        mB, mA = pts[:, :gg], -pts[:, gg:]
        m = np.concatenate([mA, mB], axis=1)
        qv = q0(m)
        p = (w * (1 - 2 * qv)).real
        if np.max(np.abs(w.imag)) > 1e-6:
            raise ValueError("sector weights are not real; calibration is off")
        on_boundary = np.abs(m).max(axis=1) == M
        bmass = float(np.abs(p[on_boundary]).sum())
        if bmass <= tol and p.min() > -tol:
            break
        if not auto:
            raise ValueError(f"aliasing: mass {bmass:.3g} on the boundary |m| = {M}; increase M")
        if M >= max_M:
            raise ValueError("sector inversion did not converge")
        M *= 2
    keep = np.abs(p) > tol
    order = np.lexsort(m[keep].T[::-1])
    return SectorTable(m[keep][order], p[keep][order], qv[keep][order], M, bmass)


def enumerated_sectors(g: DimerGraph, alpha_G: TwistVector, covers=None) -> dict:
    """Exact sector law by enumeration (weighted by prod |K_e|)."""
    covers = list(enumerate_matchings(g)) if covers is None else covers
    m = cover_periods(g, covers, alpha_G)
    w = np.prod(g.edge_weight[np.asarray([c.edges for c in covers])], axis=1)
    out = {}
    for mi, wi in zip(map(tuple, m.tolist()), w):
        out[mi] = out.get(mi, 0.0) + wi
    Z = w.sum()
    return {k: v / Z for k, v in out.items()}
