"""Square-tiled flat surfaces: parsing, topology, homology bases and cuts.

Surface documents are line oriented::

    # comment
    shear 0.5 0.866      (optional; the "north" side vector, default i)
    square <id>
    glue <id>.<N|E|S|W> <id>.<N|E|S|W> [flip]

A plain ``glue`` identifies the two sides with opposite boundary orientation,
which is the orientation compatible choice. ``flip`` identifies them with the
same orientation; such gluings are accepted only if reflecting some squares
makes every gluing plain again, otherwise the surface is non-orientable.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources

import numpy as np

from .mesh import Mesh, ConeVertexError

SIDE_NAMES = "SENW"
OPPOSITE = (2, 3, 0, 1)
_MIRROR = (0, 3, 2, 1)  # horizontal reflection of a square: E <-> W


class SurfaceError(ValueError):
    pass


class SpecSyntaxError(SurfaceError):
    pass


class NonInvolutiveGluing(SurfaceError):
    pass


class UngluedSide(SurfaceError):
    pass


class DisconnectedSurface(SurfaceError):
    pass


class NonOrientableSurface(SurfaceError):
    pass


class UnsupportedSurface(SurfaceError):
    """Parsed fine but outside the supported class (translation, 4pi cones)."""


class NoBasisError(SurfaceError):
    pass


class CutPairingError(SurfaceError):
    pass


__all__ = [
    "FlatSurface", "HomologyBasis", "CutSystem", "parse_surface", "load_surface",
    "homology_basis", "intersection_number", "winding", "cut_system",
    "SurfaceError", "SpecSyntaxError", "NonInvolutiveGluing", "UngluedSide",
    "DisconnectedSurface", "NonOrientableSurface", "UnsupportedSurface",
    "NoBasisError", "CutPairingError", "ConeVertexError",
]


@dataclass(frozen=True, eq=False)
class FlatSurface:
    """Closed surface glued from unit squares (or sheared unit cells).

    ``glue[s][k] = (t, m)`` means side k of square s is glued to side m of t.
    """

    labels: tuple
    glue: tuple
    shear: complex = 1j
    text: str = ""

    @property
    def n_squares(self) -> int:
        return len(self.labels)

    def neighbor(self, s: int, side: int) -> int:
        t, m = self.glue[s][side]
        if m != OPPOSITE[side]:
            raise UnsupportedSurface("gluing is not a translation")
        return t

    @cached_property
    def is_translation(self) -> bool:
        return all(self.glue[s][k][1] == OPPOSITE[k] for s in range(self.n_squares) for k in range(4))

    @cached_property
    def corner_class(self) -> np.ndarray:
        """Vertex id of corner k (SW, SE, NE, NW) of square s, shape (F, 4)."""
        F = self.n_squares
        parent = list(range(4 * F))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for s in range(F):
            for k in range(4):
                t, m = self.glue[s][k]
                # start of side k is corner k, its end is corner k+1
                for a, b in ((4 * s + k, 4 * t + (m + 1) % 4), (4 * s + (k + 1) % 4, 4 * t + m)):
                    ra, rb = find(a), find(b)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
        roots = [find(x) for x in range(4 * F)]
        ids = {}
        out = np.array([ids.setdefault(x, len(ids)) for x in roots])
        return out.reshape(F, 4)

    @property
    def n_vertices(self) -> int:
        return int(self.corner_class.max()) + 1

    @property
    def euler_characteristic(self) -> int:
        # V - E + F with E = 2F
        return self.n_vertices - self.n_squares

    @property
    def genus(self) -> int:
        return (2 - self.euler_characteristic) // 2

    @cached_property
    def cone_points(self) -> list:
        """(vertex id, cone angle in units of pi/2) for every vertex with angle != 2pi."""
        counts = np.bincount(self.corner_class.ravel(), minlength=self.n_vertices)
        return [(v, int(c)) for v, c in enumerate(counts) if c != 4]

    def cone_angles(self):
        return [c * np.pi / 2 for _, c in self.cone_points]

    def gauss_bonnet_defect(self) -> int:
        """sum (angle/2pi - 1) - (2g - 2), in units of 1/4; zero for a valid surface."""
        total = sum(c - 4 for _, c in self.cone_points)
        return total - 4 * (2 * self.genus - 2)

    def setting_violations(self) -> list:
        """Reasons why the surface is outside the supported setting (empty if none)."""
        out = []
        if not self.is_translation:
            out.append("non-trivial holonomy (gluing is not a translation)")
        bad = [(v, c) for v, c in self.cone_points if c != 8]
        if bad:
            out.append(f"cone angles other than 4pi at vertices {[v for v, _ in bad]}")
        if self.genus >= 1 and len(self.cone_points) != max(0, 2 * self.genus - 2):
            out.append("number of cone points differs from 2g-2")
        if self.genus < 1:
            out.append("genus 0")
        return out

    def require_supported(self):
        bad = self.setting_violations()
        if bad:
            raise UnsupportedSurface("; ".join(bad))

    @cached_property
    def base_refinement(self) -> int:
        # half-unit grid lets homology cycles and cuts avoid cone points
        return 2 if self.cone_points else 1

    @cached_property
    def base_mesh(self) -> Mesh:
        return Mesh(self, self.base_refinement)

    def mesh(self, r: int, triangulate: bool | None = None) -> Mesh:
        if r % self.base_refinement:
            raise ValueError(f"refinement {r} must be a multiple of {self.base_refinement}")
        if triangulate is None:
            triangulate = abs(self.shear - 1j) > 1e-12
        return Mesh(self, r, triangulate=triangulate)

    def info(self) -> dict:
        return {
            "squares": self.n_squares,
            "vertices": self.n_vertices,
            "euler_characteristic": self.euler_characteristic,
            "genus": self.genus,
            "cone_points": [{"vertex": v, "angle_over_pi": c / 2} for v, c in self.cone_points],
            "translation": self.is_translation,
            "violations": self.setting_violations(),
        }


def _parse_side(tok: str, index: dict, lineno: int):
    try:
        sq, side = tok.rsplit(".", 1)
    except ValueError:
        raise SpecSyntaxError(f"line {lineno}: expected <square>.<side>, got {tok!r}") from None
    if sq not in index:
        raise SpecSyntaxError(f"line {lineno}: unknown square {sq!r}")
    if side not in ("N", "E", "S", "W"):
        raise SpecSyntaxError(f"line {lineno}: bad side {side!r}")
    return index[sq], SIDE_NAMES.index(side)


def parse_surface(text: str) -> FlatSurface:
    """Parse a surface document; see the module docstring for the syntax."""
    labels, index = [], {}
    raw = {}
    shear = 1j
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "square" and len(tok) == 2:
            if tok[1] in index:
                raise SpecSyntaxError(f"line {lineno}: duplicate square {tok[1]!r}")
            index[tok[1]] = len(labels)
            labels.append(tok[1])
        elif tok[0] == "shear" and len(tok) == 3:
            shear = complex(float(tok[1]), float(tok[2]))
            if shear.imag <= 0:
                raise SpecSyntaxError(f"line {lineno}: shear must have positive imaginary part")
        elif tok[0] == "glue" and len(tok) in (3, 4):
            if len(tok) == 4 and tok[3] != "flip":
                raise SpecSyntaxError(f"line {lineno}: unknown gluing flag {tok[3]!r}")
            a = _parse_side(tok[1], index, lineno)
            b = _parse_side(tok[2], index, lineno)
            flip = len(tok) == 4
            if a == b:
                raise NonInvolutiveGluing(f"line {lineno}: side {tok[1]} glued to itself")
            for x, y in ((a, b), (b, a)):
                if x in raw:
                    raise NonInvolutiveGluing(f"line {lineno}: side {x} glued twice")
                raw[x] = (y, flip)
        else:
            raise SpecSyntaxError(f"line {lineno}: cannot parse {line!r}")
    F = len(labels)
    if F == 0:
        raise SpecSyntaxError("no squares declared")
    for s in range(F):
        for k in range(4):
            if (s, k) not in raw:
                raise UngluedSide(f"side {SIDE_NAMES[k]} of square {labels[s]!r} is not glued")

    # connectivity
    seen, queue = {0}, deque([0])
    while queue:
        s = queue.popleft()
        for k in range(4):
            t = raw[(s, k)][0][0]
            if t not in seen:
                seen.add(t)
                queue.append(t)
    if len(seen) != F:
        raise DisconnectedSurface(f"only {len(seen)} of {F} squares are connected")

    # orientation propagation: reflect squares so that every gluing is plain
    orient = {0: 1}
    queue = deque([0])
    while queue:
        s = queue.popleft()
        for k in range(4):
            (t, _), flip = raw[(s, k)]
            want = orient[s] * (-1 if flip else 1)
            if t not in orient:
                orient[t] = want
                queue.append(t)
            elif orient[t] != want:
                raise NonOrientableSurface("gluing orientations are inconsistent")

    def fix(s, k):
        return _MIRROR[k] if orient[s] < 0 else k

    glue = [[None] * 4 for _ in range(F)]
    for (s, k), ((t, m), _) in raw.items():
        glue[s][fix(s, k)] = (t, fix(t, m))
    return FlatSurface(tuple(labels), tuple(tuple(g) for g in glue), shear, text)


def load_surface(name_or_path: str) -> FlatSurface:
    """Load a bundled surface by name (``pillow_g2``) or a document from a path."""
    try:
        data = resources.files("flatdimers.data").joinpath(f"{name_or_path}.txt")
        if data.is_file():
            return parse_surface(data.read_text())
    except (ModuleNotFoundError, FileNotFoundError):
        pass
    with open(name_or_path) as fh:
        return parse_surface(fh.read())


def bundled_surfaces():
    return sorted(p.name[:-4] for p in resources.files("flatdimers.data").iterdir() if p.name.endswith(".txt"))


# -- cycles -------------------------------------------------------------------

def intersection_number(mesh: Mesh, c1, c2) -> int:
    """Algebraic intersection c1 . c2 of two closed walks.

    c1 is replaced by its left pushoff, which only crosses edges transversally;
    each crossing of an edge traversed by c2 counts +1 when c2 runs along the
    crossed half-edge and -1 when it runs along its twin.
    """
    steps = mesh.pushoff(c1)
    mesh.check_closed(c2)
    chain = mesh.chain(c2)
    return int(chain[np.asarray(steps, dtype=np.int64)].sum()) if steps else 0


def winding(mesh: Mesh, c) -> float:
    """Total turning of a closed walk avoiding cone vertices, in radians."""
    return mesh.turning(c)


def _straight_cycle(mesh: Mesh, h0: int):
    path, h = [h0], h0
    while True:
        h = mesh.next[mesh.twin[mesh.next[h]]]
        if h == h0:
            return path
        path.append(int(h))
        if len(path) > mesh.n_half_edges:
            raise RuntimeError("straight line does not close")


def _candidate_cycles(surface: FlatSurface):
    """Cylinder core curves followed by fundamental cycles of a spanning tree."""
    m = surface.base_mesh
    r = m.r
    cands, seen = [], set()
    for side, (i, j) in ((0, (0, r // 2)), (1, (max(r // 2 - 1, 0), 0))):
        for s in range(surface.n_squares):
            h0 = m.side_half_edge((s * r + j) * r + i, side)
            cyc = _straight_cycle(m, h0)
            key = frozenset(cyc)
            if key not in seen:
                seen.add(key)
                cands.append(cyc)

    cone = set(m.cone_vertices.tolist())
    ok = [v for v in range(m.n_vertices) if v not in cone]
    root = ok[0]
    parent_he = {root: None}
    depth = {root: 0}
    order = deque([root])
    tree = set()
    while order:
        v = order.popleft()
        for h in m.outgoing(v):
            u = int(m.dest(h))
            if u in cone or u in parent_he:
                continue
            parent_he[u] = int(h)
            depth[u] = depth[v] + 1
            tree.add(m.edge_of[h])
            order.append(u)

    def up(v):
        out = []
        while parent_he[v] is not None:
            h = parent_he[v]
            out.append(h)
            v = int(m.origin[h])
        return out

    for e, h in enumerate(m.edge_he):
        h = int(h)
        u, v = int(m.origin[h]), int(m.dest(h))
        if e in tree or u in cone or v in cone:
            continue
        pu, pv = up(u), up(v)
        # strip the common part above the lowest common ancestor
        while pu and pv and pu[-1] == pv[-1]:
            pu.pop()
            pv.pop()
        path = list(reversed(pu)) + [h] + [int(m.twin[x]) for x in pv]
        key = frozenset(path)
        if key not in seen:
            seen.add(key)
            cands.append(path)
    return cands


def _symplectic_reduce(I: np.ndarray):
    """Integer symplectic basis of the lattice spanned by candidates with Gram matrix I.

    Returns C (2g x k) with C I C^T = [[0, 1], [-1, 0]].
    """
    k = I.shape[0]
    V = np.eye(k, dtype=np.int64)
    A, B = [], []
    for _ in range(100000):
        G = V @ I @ V.T
        V = V[np.abs(G).sum(axis=1) > 0]
        if len(V) == 0:
            break
        G = V @ I @ V.T
        absG = np.where(G != 0, np.abs(G), np.iinfo(np.int64).max)
        i, j = np.unravel_index(np.argmin(absG), G.shape)
        d = G[i, j]
        if abs(d) == 1:
            e, f = V[i].copy(), V[j] * d
            A.append(e)
            B.append(f)
            rest = np.delete(V, [i, j], axis=0)
            ve, vf = rest @ I @ e, rest @ I @ f
            V = rest - np.outer(vf, e) + np.outer(ve, f)
            continue
        # reduce the entries of rows i and j modulo d
        qi = np.rint(G[i] / d).astype(np.int64)
        qi[[i, j]] = 0
        if qi.any():
            V = V - np.outer(qi, V[j])
            continue
        qj = np.rint(G[j] / G[j, i]).astype(np.int64)
        qj[[i, j]] = 0
        if qj.any():
            V = V - np.outer(qj, V[i])
            continue
        bad = np.argwhere(G % d != 0)
        if len(bad) == 0:
            raise SurfaceError("intersection form is not unimodular")
        V[i] = V[i] + V[bad[0][0]]
    else:
        raise SurfaceError("symplectic reduction did not terminate")
    return np.array(A + B, dtype=np.int64).reshape(len(A) + len(B), k)


@dataclass(frozen=True, eq=False)
class CutSystem:
    """Disjoint edge paths on the base mesh pairing the cone points."""

    surface: FlatSurface
    paths: tuple = ()
    pairs: tuple = ()

    def chains(self, mesh: Mesh) -> np.ndarray:
        base = self.surface.base_mesh
        out = np.zeros((len(self.paths), mesh.n_half_edges), dtype=np.int64)
        for i, p in enumerate(self.paths):
            out[i] = mesh.chain(mesh.refine(base, p))
        return out

    def verify(self) -> bool:
        m = self.surface.base_mesh
        used = set()
        ends = []
        for p in self.paths:
            verts = [int(m.origin[h]) for h in p] + [int(m.dest(p[-1]))]
            if len(set(verts)) != len(verts) or used & set(verts):
                return False
            for a, b in zip(p, p[1:]):
                if m.dest(a) != m.origin[b]:
                    return False
            used |= set(verts)
            ends += [verts[0], verts[-1]]
            if any(m.is_cone(v) for v in verts[1:-1]):
                return False
        return sorted(ends) == sorted(m.cone_vertices.tolist())


def cut_system(surface: FlatSurface) -> CutSystem:
    """Pair the cone points by disjoint shortest paths on the base mesh."""
    m = surface.base_mesh
    cones = [int(v) for v in m.cone_vertices]
    if not cones:
        return CutSystem(surface)
    if len(cones) % 2:
        raise CutPairingError("odd number of cone points")

    def pairings(items):
        if not items:
            yield []
            return
        a = items[0]
        for i in range(1, len(items)):
            for rest in pairings(items[1:i] + items[i + 1:]):
                yield [(a, items[i])] + rest

    def bfs(src, dst, blocked):
        prev = {src: None}
        q = deque([src])
        while q:
            v = q.popleft()
            if v == dst:
                break
            for h in sorted(m.outgoing(v)):
                u = int(m.dest(h))
                if u in prev or (u in blocked and u != dst):
                    continue
                prev[u] = int(h)
                q.append(u)
        if dst not in prev:
            return None
        path, v = [], dst
        while prev[v] is not None:
            path.append(prev[v])
            v = int(m.origin[prev[v]])
        return path[::-1]

    for pairing in pairings(cones):
        for order in itertools.permutations(range(len(pairing))):
            used = set(cones)
            paths = []
            for idx in order:
                a, b = pairing[idx]
                p = bfs(a, b, used)
                if p is None:
                    break
                paths.append(p)
                used |= {int(m.origin[h]) for h in p}
            else:
                cs = CutSystem(surface, tuple(tuple(p) for p in paths), tuple(pairing[i] for i in order))
                assert cs.verify()
                return cs
    raise CutPairingError("no disjoint pairing of the cone points exists")


@dataclass(frozen=True, eq=False)
class HomologyBasis:
    """Symplectic basis A_1..A_g, B_1..B_g as integer combinations of simple cycles.

    ``candidates`` are closed walks on the base mesh avoiding cone points and
    ``coeffs`` (2g x k) expresses each basis element through them.
    """

    surface: FlatSurface
    candidates: tuple
    coeffs: np.ndarray
    candidate_form: np.ndarray = field(repr=False)

    @property
    def genus(self) -> int:
        return self.coeffs.shape[0] // 2

    def intersection_matrix(self) -> np.ndarray:
        return self.coeffs @ self.candidate_form @ self.coeffs.T

    def paths(self):
        """Basis elements that are single candidate walks (None for genuine combinations)."""
        out = []
        for row in self.coeffs:
            nz = np.flatnonzero(row)
            if len(nz) == 1 and abs(row[nz[0]]) == 1:
                p = list(self.candidates[nz[0]])
                if row[nz[0]] < 0:
                    base = self.surface.base_mesh
                    p = [int(base.twin[h]) for h in reversed(p)]
                out.append(p)
            else:
                out.append(None)
        return out

    def _per_candidate(self, mesh: Mesh, kind: str) -> np.ndarray:
        base = self.surface.base_mesh
        rows = []
        for c in self.candidates:
            p = mesh.refine(base, c)
            rows.append(mesh.chain(p) if kind == "chain" else mesh.cochain(mesh.pushoff(p)))
        return np.array(rows)

    def chains(self, mesh: Mesh) -> np.ndarray:
        """(2g, n_half_edges) antisymmetric chains of the basis on ``mesh``."""
        return self.coeffs @ self._per_candidate(mesh, "chain")

    def pushoff_cochains(self, mesh: Mesh) -> np.ndarray:
        """(2g, n_half_edges) crossing cochains of the left pushoffs.

        Pairing the cochain of X with the chain of Y gives 2 X.Y.
        """
        return self.coeffs @ self._per_candidate(mesh, "cochain")

    def q0_values(self, cuts: CutSystem) -> np.ndarray:
        """q0 on A_1..A_g, B_1..B_g from winding, cut crossings and the +1 shift."""
        m = self.surface.base_mesh
        cut_chain = cuts.chains(m).sum(axis=0) if cuts.paths else np.zeros(m.n_half_edges, dtype=np.int64)
        qc = []
        for c in self.candidates:
            w = m.turning(c) / (2 * np.pi)
            wi = int(round(w))
            assert abs(w - wi) < 1e-9
            steps = np.asarray(m.pushoff(c), dtype=np.int64)
            cross = int(cut_chain[steps].sum()) if len(steps) else 0
            qc.append((wi + cross + 1) % 2)
        qc = np.array(qc)
        I = self.candidate_form
        out = []
        for row in self.coeffs:
            val = int(row @ qc)
            for k, l in itertools.combinations(range(len(row)), 2):
                val += int(row[k] * row[l] * I[k, l])
            out.append(val % 2)
        return np.array(out)


def homology_basis(surface: FlatSurface) -> HomologyBasis:
    """Symplectic basis by integer reduction of candidate cycles' intersection form."""
    if surface.genus < 1:
        raise NoBasisError("no basis: surface has genus 0")
    m = surface.base_mesh
    cands = _candidate_cycles(surface)
    push = [m.pushoff(c) for c in cands]
    chains = np.array([m.chain(c) for c in cands])
    I = np.array([[int(chains[j][np.asarray(p, dtype=np.int64)].sum()) if p else 0
                   for j in range(len(cands))] for p in push], dtype=np.int64)
    if not (I == -I.T).all():
        raise SurfaceError("candidate intersection form is not antisymmetric")
    C = _symplectic_reduce(I)
    g = surface.genus
    if C.shape[0] != 2 * g:
        raise SurfaceError(f"reduction found rank {C.shape[0]}, expected {2 * g}")
    # keep only candidates actually used
    used = np.flatnonzero(np.abs(C).sum(axis=0))
    basis = HomologyBasis(surface, tuple(tuple(cands[i]) for i in used), C[:, used], I[np.ix_(used, used)])
    J = np.block([[np.zeros((g, g), int), np.eye(g, dtype=int)], [-np.eye(g, dtype=int), np.zeros((g, g), int)]])
    assert (basis.intersection_matrix() == J).all()
    return basis
