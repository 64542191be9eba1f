"""Bipartite dimer graphs dual to meshes of flat surfaces.

A dimer graph G is the dual of a mesh G*: its vertices are mesh faces and its
edges are dual to mesh edges. Faces are two-colored (white / black); the face
of cell 0 of square 0 is white. G-edge e is stored with the index of its dual
mesh edge, the half-edge ``he[e]`` of that mesh edge lying in the white face,
and the chart vector of that half-edge, which is the geometric part of the
Kasteleyn entry.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh
from .surface import (FlatSurface, HomologyBasis, CutSystem, parse_surface, load_surface,
                      homology_basis, cut_system)

HEX_SHEAR = complex(0.5, np.sqrt(3) / 2)


@dataclass(eq=False)
class DimerGraph:
    family: str
    n: int
    genus: int
    n_white: int
    n_black: int
    white_pos: np.ndarray        # (nW, 3): square, x, y of the face center
    black_pos: np.ndarray
    edge_w: np.ndarray
    edge_b: np.ndarray
    edge_vec: np.ndarray         # complex chart vector of the dual edge (white side)
    edge_angle: np.ndarray       # angle flow value f^A(wb)
    faces: list                  # cyclic lists of edge ids (one per mesh vertex)
    face_cone: np.ndarray
    rails: list                  # non-contractible straight alternating-cycle candidates
    edge_cross: np.ndarray = None  # (E, 2g) crossings with A_1..A_g, B_1..B_g
    edge_cut: np.ndarray = None    # (E, #cuts) crossings with the cuts
    basis_loops: np.ndarray = None  # (2g, E) signed G-walks of the basis pushoffs
    q0_chars: tuple = None          # (a0, b0) from winding + cuts
    surface_text: str = ""
    mesh: Mesh = field(default=None, repr=False)
    he: np.ndarray = field(default=None, repr=False)

    @property
    def n_edges(self) -> int:
        return len(self.edge_w)

    @property
    def edge_weight(self) -> np.ndarray:
        return np.abs(self.edge_vec)

    @property
    def surface(self) -> FlatSurface:
        return parse_surface(self.surface_text)

    def edges_at_white(self):
        out = [[] for _ in range(self.n_white)]
        for e, w in enumerate(self.edge_w):
            out[w].append(e)
        return out

    def edges_at_black(self):
        out = [[] for _ in range(self.n_black)]
        for e, b in enumerate(self.edge_b):
            out[b].append(e)
        return out

    def face_is_simple(self, k: int) -> bool:
        """True if the face boundary visits distinct vertices and edges."""
        return _cycle_is_simple(self, self.faces[k])

    def euler_characteristic(self) -> int:
        return self.n_white + self.n_black - self.n_edges + len(self.faces)

    # -- serialization --------------------------------------------------------
    def to_dict(self) -> dict:
        def c(z):
            return [[float(x.real), float(x.imag)] for x in z]

        return {
            "format": "flatdimers.graph/1",
            "family": self.family,
            "n": self.n,
            "genus": self.genus,
            "vertices": {
                "white": self.white_pos.tolist(),
                "black": self.black_pos.tolist(),
            },
            "edges": {
                "white": self.edge_w.tolist(),
                "black": self.edge_b.tolist(),
                "vector": c(self.edge_vec),
                "angle_flow": self.edge_angle.tolist(),
                "cross": self.edge_cross.tolist(),
                "cut": self.edge_cut.tolist(),
            },
            "faces": [list(map(int, f)) for f in self.faces],
            "face_cone": self.face_cone.astype(int).tolist(),
            "rails": [list(map(int, r)) for r in self.rails],
            "basis_loops": self.basis_loops.tolist(),
            "q0_chars": [list(map(float, self.q0_chars[0])), list(map(float, self.q0_chars[1]))],
            "surface": self.surface_text,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "DimerGraph":
        if d.get("format") != "flatdimers.graph/1":
            raise ValueError("not a flatdimers graph document")
        E = d["edges"]
        g = d["genus"]
        vec = np.array([complex(a, b) for a, b in E["vector"]])
        ne = len(vec)
        return cls(
            family=d["family"], n=d["n"], genus=g,
            n_white=len(d["vertices"]["white"]), n_black=len(d["vertices"]["black"]),
            white_pos=np.array(d["vertices"]["white"], dtype=float).reshape(-1, 3),
            black_pos=np.array(d["vertices"]["black"], dtype=float).reshape(-1, 3),
            edge_w=np.array(E["white"], dtype=np.int64), edge_b=np.array(E["black"], dtype=np.int64),
            edge_vec=vec, edge_angle=np.array(E["angle_flow"], dtype=float),
            faces=[np.array(f, dtype=np.int64) for f in d["faces"]],
            face_cone=np.array(d["face_cone"], dtype=bool),
            rails=[np.array(r, dtype=np.int64) for r in d["rails"]],
            edge_cross=np.array(E["cross"], dtype=np.int64).reshape(ne, 2 * g),
            edge_cut=np.array(E["cut"], dtype=np.int64).reshape(ne, -1),
            basis_loops=np.array(d["basis_loops"], dtype=np.int64).reshape(2 * g, ne),
            q0_chars=(np.array(d["q0_chars"][0]), np.array(d["q0_chars"][1])),
            surface_text=d["surface"],
        )

    @classmethod
    def from_json(cls, text: str) -> "DimerGraph":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class DimerCover:
    """Perfect matching stored as the edge used by each white vertex."""

    edges: tuple

    def is_valid(self, g: DimerGraph) -> bool:
        e = np.asarray(self.edges, dtype=np.int64)
        if len(e) != g.n_white or g.n_white != g.n_black:
            return False
        if (g.edge_w[e] != np.arange(g.n_white)).any():
            return False
        return len(set(g.edge_b[e].tolist())) == g.n_black

    def indicator(self, g: DimerGraph) -> np.ndarray:
        x = np.zeros(g.n_edges)
        x[list(self.edges)] = 1.0
        return x


def _cycle_is_simple(g: DimerGraph, edges) -> bool:
    edges = list(edges)
    if len(set(edges)) != len(edges):
        return False
    verts = set()
    for e in edges:
        verts.add(("w", int(g.edge_w[e])))
        verts.add(("b", int(g.edge_b[e])))
    return len(verts) == len(edges)


def _two_color(mesh: Mesh) -> np.ndarray:
    color = np.full(mesh.n_faces, -1)
    color[0] = 0
    q = deque([0])
    face_he = [[] for _ in range(mesh.n_faces)]
    for h in range(mesh.n_half_edges):
        face_he[mesh.face[h]].append(h)
    while q:
        f = q.popleft()
        for h in face_he[f]:
            u = mesh.face[mesh.twin[h]]
            if color[u] < 0:
                color[u] = 1 - color[f]
                q.append(u)
            elif color[u] == color[f]:
                raise AssertionError("mesh faces are not two-colorable")
    return color


def _rails(mesh: Mesh, graph: DimerGraph):
    """Straight strips of faces closing up around the surface."""
    out, seen = [], set()
    for x0 in range(mesh.n_half_edges):
        for phase0 in ((0, 1) if mesh.triangulate else (0,)):
            x, phase, edges, faces = x0, phase0, [], []
            ok = True
            for _ in range(mesh.n_half_edges + 1):
                edges.append(int(mesh.edge_of[x]))
                faces.append(int(mesh.face[x]))
                y = mesh.twin[x]
                if mesh.triangulate:
                    x = mesh.next[y] if phase == 0 else mesh.prev[y]
                    phase = 1 - phase
                else:
                    x = mesh.next[mesh.next[y]]
                if x == x0 and phase == phase0:
                    break
            else:
                ok = False
            if not ok or len(edges) % 2:
                continue
            key = frozenset(edges)
            if key in seen:
                continue
            seen.add(key)
            if len(set(faces)) != len(faces) or not _cycle_is_simple(graph, edges):
                continue
            out.append(np.array(edges, dtype=np.int64))
    return out


def _dual_graph(surface: FlatSurface, mesh: Mesh, family: str, n: int) -> DimerGraph:
    color = _two_color(mesh)
    whites = np.flatnonzero(color == 0)
    blacks = np.flatnonzero(color == 1)
    if len(whites) != len(blacks):
        raise ValueError("graph is not dimerable: color classes differ in size")
    idx = np.empty(mesh.n_faces, dtype=np.int64)
    idx[whites] = np.arange(len(whites))
    idx[blacks] = np.arange(len(blacks))

    he = mesh.edge_he.copy()
    flip = color[mesh.face[he]] != 0
    he[flip] = mesh.twin[he[flip]]
    ew = idx[mesh.face[he]]
    eb = idx[mesh.face[mesh.twin[he]]]
    vec = mesh.vec[he]

    centers = np.array([mesh.face_center(f) for f in range(mesh.n_faces)])

    def pos(fs):
        cells = fs // 2 if mesh.triangulate else fs
        sq = mesh.cell_square[cells]
        return np.column_stack([sq, centers[fs].real, centers[fs].imag])

    # angle flow: angle at the black face center subtended by the dual edge / 2pi
    t = mesh.twin[he]
    cb = centers[mesh.face[t]]
    p = _corner_point(mesh, t, centers)
    q = p + mesh.vec[t]
    ang = np.angle((q - cb) / (p - cb)) % (2 * np.pi)
    if (ang < 1e-9).any():
        raise ValueError("degenerate dual edge")

    faces = [np.array([mesh.edge_of[h] for h in mesh.outgoing(v)], dtype=np.int64)
             for v in range(mesh.n_vertices)]
    face_cone = np.array([mesh.is_cone(v) for v in range(mesh.n_vertices)], dtype=bool)
    g = DimerGraph(
        family=family, n=n, genus=surface.genus,
        n_white=len(whites), n_black=len(blacks),
        white_pos=pos(whites), black_pos=pos(blacks),
        edge_w=ew, edge_b=eb, edge_vec=vec, edge_angle=ang / (2 * np.pi),
        faces=faces, face_cone=face_cone, rails=[],
        surface_text=surface.text, mesh=mesh, he=he,
    )
    g.rails = _rails(mesh, g)
    return g


def _corner_point(mesh: Mesh, hs, centers) -> np.ndarray:
    """Chart position of origin(h) expressed in the chart of face(h)."""
    out = np.empty(len(hs), dtype=complex)
    for k, h in enumerate(hs):
        f = mesh.face[h]
        poly = mesh.face_polygon(f)
        # walk from the face's first half-edge to h
        h0 = 6 * (f // 2) + 3 * (f % 2) if mesh.triangulate else 4 * f
        j, x = 0, h0
        while x != h:
            x = mesh.next[x]
            j += 1
        out[k] = poly[j]
    return out


def crossing_data(g: DimerGraph, basis: HomologyBasis, cuts: CutSystem) -> DimerGraph:
    """Fill per-edge crossings with the basis cycles and cuts, basis pushoff loops and q0."""
    mesh = g.mesh
    chains = basis.chains(mesh)
    g.edge_cross = chains[:, g.he].T.copy()
    cc = cuts.chains(mesh) if cuts.paths else np.zeros((0, mesh.n_half_edges), dtype=np.int64)
    g.edge_cut = cc[:, g.he].T.copy().reshape(g.n_edges, len(cuts.paths))
    co = basis.pushoff_cochains(mesh)
    g.basis_loops = co[:, g.he].copy()
    q = basis.q0_values(cuts)
    gg = basis.genus
    g.q0_chars = (q[:gg] / 2.0, q[gg:] / 2.0)
    return g


def build_pillow_square(surface: FlatSurface, n: int, family: str = "square-pillow") -> DimerGraph:
    """Square-lattice dimer graph: the dual of the 2n x 2n refinement of every square."""
    if n < 1:
        raise ValueError("n must be positive")
    surface.require_supported()
    if abs(surface.shear - 1j) > 1e-12:
        raise ValueError("square lattice family needs unsheared squares")
    mesh = surface.mesh(2 * n, triangulate=False)
    g = _dual_graph(surface, mesh, family, n)
    return crossing_data(g, homology_basis(surface), cut_system(surface))


def hex_torus_surface() -> FlatSurface:
    return load_surface("hex_torus")


def build_torus_hex(N: int) -> DimerGraph:
    """Hexagonal dimer graph dual to the triangular lattice N^-1 (Z + e^{i pi/3} Z)."""
    if N < 1:
        raise ValueError("N must be positive")
    s = hex_torus_surface()
    mesh = s.mesh(N, triangulate=True)
    g = _dual_graph(s, mesh, "hex-torus", N)
    return crossing_data(g, homology_basis(s), cut_system(s))


def build_graph(family: str, n: int, surface: FlatSurface | None = None) -> DimerGraph:
    if family == "hex-torus":
        return build_torus_hex(n)
    if family == "square-pillow":
        if surface is None:
            raise ValueError("square-pillow needs a surface")
        return build_pillow_square(surface, n)
    raise ValueError(f"unknown family {family!r}")


# -- enumeration ----------------------------------------------------------------

@dataclass
class Enumeration:
    covers: list
    truncated: bool

    def __iter__(self):
        return iter(self.covers)

    def __len__(self):
        return len(self.covers)


def enumerate_matchings(g: DimerGraph, cap: int | None = None) -> Enumeration:
    """All perfect matchings (parallel edges distinguished), by recursive branching.

    The white vertex with the fewest available edges is matched first, so forced
    edges are taken without branching and dead ends are cut immediately.
    """
    adj = g.edges_at_white()
    nW = g.n_white
    if nW != g.n_black:
        return Enumeration([], False)
    eb = g.edge_b.tolist()
    used_b = [False] * g.n_black
    chosen = [-1] * nW
    out = []
    state = {"trunc": False}

    def rec(left):
        if state["trunc"]:
            return
        if left == 0:
            if cap is not None and len(out) >= cap:
                state["trunc"] = True
                return
            out.append(DimerCover(tuple(chosen)))
            return
        best, best_opts = -1, None
        for w in range(nW):
            if chosen[w] >= 0:
                continue
            opts = [e for e in adj[w] if not used_b[eb[e]]]
            if best_opts is None or len(opts) < len(best_opts):
                best, best_opts = w, opts
                if len(opts) <= 1:
                    break
        if not best_opts:
            return
        for e in best_opts:
            chosen[best] = e
            used_b[eb[e]] = True
            rec(left - 1)
            used_b[eb[e]] = False
            chosen[best] = -1

    rec(nW)
    return Enumeration(out, state["trunc"])
