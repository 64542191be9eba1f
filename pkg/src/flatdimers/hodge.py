"""Discrete harmonic 1-forms and period matrices of square-tiled surfaces.

Forms live on mesh edges (value on the edge's canonical half-edge). The Hodge
star is the diagonal circumcentric one: dual edge length over primal length,
which is 1 on squares and 1/sqrt(3) on equilateral triangles.

Representatives: alpha_i, beta_i are the crossing cocycles of -B_i and A_i, so
that alpha_i has A-periods delta and B-periods 0 and beta_i the other way
round. Projecting out d(potential) gives the harmonic forms; the energy Gram
matrix E of (alpha, beta) then determines Omega = X + iY through

    E_bb = Y^-1,  E_ab = -X Y^-1,  E_aa = Y + X Y^-1 X.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .mesh import Mesh
from .surface import FlatSurface, homology_basis

__all__ = ["Harmonic1Form", "PeriodMatrix", "star_weights", "harmonic_basis", "period_matrix",
           "mesh_doubling", "HodgeError"]


class HodgeError(RuntimeError):
    pass


@dataclass
class Harmonic1Form:
    mesh: Mesh = field(repr=False)
    values: np.ndarray = field(repr=False)   # per edge, along mesh.edge_he
    closed_residual: float
    coclosed_residual: float
    label: str = ""

    def on_half_edges(self) -> np.ndarray:
        m = self.mesh
        s = np.where(m.edge_he[m.edge_of] == np.arange(m.n_half_edges), 1.0, -1.0)
        return s * self.values[m.edge_of]

    def integrate(self, path) -> float:
        return float(self.on_half_edges()[np.asarray(path, dtype=np.int64)].sum())


@dataclass
class PeriodMatrix:
    omega: np.ndarray
    mesh: int
    symmetry_residual: float
    bilinear_residual: float
    coclosed_residual: float
    cholesky_ok: bool
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def genus(self):
        return len(self.omega)

    def to_dict(self) -> dict:
        return {
            "format": "flatdimers.omega/1",
            "mesh": self.mesh,
            "omega_re": np.round(self.omega.real, 14).tolist(),
            "omega_im": np.round(self.omega.imag, 14).tolist(),
            "symmetry_residual": float(self.symmetry_residual),
            "bilinear_residual": float(self.bilinear_residual),
            "coclosed_residual": float(self.coclosed_residual),
            "im_positive_definite": bool(self.cholesky_ok),
        }

    @staticmethod
    def omega_from_dict(d: dict) -> np.ndarray:
        return np.asarray(d["omega_re"], dtype=float) + 1j * np.asarray(d["omega_im"], dtype=float)


def star_weights(mesh: Mesh) -> np.ndarray:
    """Per-edge circumcentric Hodge star |dual edge| / |edge|."""
    v = mesh.vec
    nx = mesh.next
    if mesh.triangulate:
        # half the cotangent of the angle opposite each half-edge
        u, w = v[mesh.prev], -v[nx]
        cot = (u.real * w.real + u.imag * w.imag) / np.abs(u.real * w.imag - u.imag * w.real)
        wh = 0.5 * cot
    else:
        wh = 0.5 * np.abs(v[nx]) / np.abs(v)
    return wh[mesh.edge_he] + wh[mesh.twin[mesh.edge_he]]


def _incidence(mesh: Mesh) -> sp.csr_matrix:
    e = np.arange(mesh.n_edges)
    h = mesh.edge_he
    rows = np.concatenate([e, e])
    cols = np.concatenate([mesh.origin[mesh.next[h]], mesh.origin[h]])
    vals = np.concatenate([np.ones(len(e)), -np.ones(len(e))])
    return sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_edges, mesh.n_vertices))


def _face_sums(mesh: Mesh, h_vals: np.ndarray) -> np.ndarray:
    return np.bincount(mesh.face, weights=h_vals, minlength=mesh.n_faces)


def harmonic_basis(s: FlatSurface, m: int, rtol: float = 1e-10, basis=None):
    """Harmonic representatives (alpha_1..alpha_g, beta_1..beta_g) on the mesh of size m."""
    if m < 2:
        raise ValueError("mesh must be at least 2")
    basis = basis or homology_basis(s)
    mesh = s.mesh(m)
    g = basis.genus
    co = basis.pushoff_cochains(mesh).astype(float)
    reps = np.concatenate([-co[g:], co[:g]])
    D = _incidence(mesh)
    W = star_weights(mesh)
    L = (D.T @ sp.diags(W) @ D).tocsr()
    # pin vertex 0
    Lr = L[1:, 1:]
    diag = Lr.diagonal()
    pre = sp.diags(1.0 / diag)
    out = []
    for k, c in enumerate(reps):
        ce = c[mesh.edge_he]
        rhs = (D.T @ (W * ce))[1:]
        x, info = cg(Lr, rhs, rtol=rtol, atol=0.0, M=pre, maxiter=20 * mesh.n_vertices)
        if info != 0:
            raise HodgeError(f"conjugate gradient did not converge (info={info})")
        phi = np.concatenate([[0.0], x])
        h = ce - D @ phi
        form = Harmonic1Form(mesh, h, 0.0, 0.0, label=("alpha" if k < g else "beta") + str(k % g + 1))
        form.closed_residual = float(np.abs(_face_sums(mesh, form.on_half_edges())).max())
        div = D.T @ (W * h)
        form.coclosed_residual = float(np.abs(div).max() / max(np.abs(D.T @ (W * ce)).max(), 1e-300))
        out.append(form)
    return out


def _omega_from_forms(forms, mesh: Mesh):
    W = star_weights(mesh)
    H = np.array([f.values for f in forms])
    E = (H * W) @ H.T
    g = len(forms) // 2
    Eaa, Eab, Ebb = E[:g, :g], E[:g, g:], E[g:, g:]
    Y1 = np.linalg.inv(Ebb)
    X = -Eab @ Y1
    # energy of u_i = alpha_i + X_ik beta_k is Im Omega (bilinear relation)
    U = Eaa + X @ Eab.T + Eab @ X.T + X @ Ebb @ X.T
    return X, Y1, U, E


def period_matrix(s: FlatSurface, m: int, richardson: bool = True, rtol: float = 1e-10) -> PeriodMatrix:
    """Omega with diagnostics; with ``richardson`` also solves at 2m and returns 2 Omega(2m) - Omega(m)."""
    basis = homology_basis(s)

    def at(mm):
        forms = harmonic_basis(s, mm, rtol=rtol, basis=basis)
        X, Y, U, E = _omega_from_forms(forms, forms[0].mesh)
        return X, Y, U, E, forms

    X, Y, U, E, forms = at(m)
    Om = X + 1j * Y
    raw = {"omega_m": Om, "energy": E, "bilinear_m": float(np.abs(U - Y).max())}
    sym = float(np.abs(X - X.T).max())
    cocl = max(f.coclosed_residual for f in forms)
    if richardson:
        X2, Y2, U2, _, forms2 = at(2 * m)
        Om2 = X2 + 1j * Y2
        raw["omega_2m"] = Om2
        raw["bilinear_2m"] = float(np.abs(U2 - Y2).max())
        # both estimates of Im Omega converge at first order; compare their extrapolations
        Om = 2 * Om2 - Om
        U, Y = 2 * U2 - U, 2 * Y2 - Y
        sym = max(sym, float(np.abs(X2 - X2.T).max()))
        cocl = max(cocl, max(f.coclosed_residual for f in forms2))
    bil = float(np.abs(U - Y).max())
    Om = 0.5 * (Om + Om.T) if sym < 1e-4 else Om
    try:
        np.linalg.cholesky(0.5 * (Om.imag + Om.imag.T))
        ok = True
    except np.linalg.LinAlgError:
        ok = False
    return PeriodMatrix(Om, m, sym, bil, cocl, ok, raw)


def mesh_doubling(s: FlatSurface, meshes=(4, 8, 16)) -> dict:
    """Omega at successive meshes and the ratios of consecutive differences."""
    basis = homology_basis(s)
    oms = []
    for mm in meshes:
        forms = harmonic_basis(s, mm, basis=basis)
        X, Y, _, _ = _omega_from_forms(forms, forms[0].mesh)
        oms.append(X + 1j * Y)
    diffs = [float(np.abs(b - a).max()) for a, b in zip(oms, oms[1:])]
    ratios = [a / b if b > 0 else np.inf for a, b in zip(diffs, diffs[1:])]
    return {"meshes": list(meshes), "omega": oms, "differences": diffs, "ratios": ratios}
