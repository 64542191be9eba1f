"""Half-edge meshes of square-tiled translation surfaces.

Every unit cell (square or sheared parallelogram) of the surface is cut into an
r x r grid of cells. Cells are either kept as quadrilaterals or split along the
diagonal from (i+1, j) to (i, j+1) into two triangles. The equilateral case of
the split is the triangular lattice used for the hexagonal dimer graph.

Cell index c = (s * r + j) * r + i for square s, column i and row j, so cells
come out sorted by (square, y, x).
"""
from __future__ import annotations

import numpy as np

# side indices of a cell, counterclockwise from the bottom: S, E, N, W
S, E, N, W = 0, 1, 2, 3

_QUAD_SIDE = (0, 1, 2, 3)
# triangles: lower = (bottom 0, diagonal 1, left 2), upper = (right 3, top 4, diagonal 5)
_TRI_SIDE = (0, 3, 4, 2)


class Mesh:
    """Polygonal half-edge mesh of a translation surface at refinement ``r``.

    Arrays indexed by half-edge: ``origin``, ``next``, ``prev``, ``twin``,
    ``face``, ``vec`` (complex displacement in the chart), ``angle`` (interior
    angle of ``face`` at ``origin``).
    """

    def __init__(self, surface, r: int, triangulate: bool = False):
        if not surface.is_translation:
            raise ValueError("mesh construction needs a translation surface")
        if r < 1:
            raise ValueError("refinement must be positive")
        self.surface = surface
        self.r = r
        self.triangulate = triangulate
        F = surface.n_squares
        tau = surface.shear
        h = 1.0 / r
        per = 6 if triangulate else 4
        nC = F * r * r
        nH = nC * per
        self.n_cells = nC
        self.per_cell = per

        # grid points (s, i, j), i, j in [0, r], identified along gluings
        side = r + 1
        parent = np.arange(F * side * side)

        def pid(s, i, j):
            return (s * side + j) * side + i

        def find(x):
            root = x
            while parent[root] != root:
                root = parent[root]
            while parent[x] != root:
                parent[x], x = root, parent[x]
            return root

        def union(x, y):
            rx, ry = find(x), find(y)
            if rx != ry:
                parent[max(rx, ry)] = min(rx, ry)

        for s in range(F):
            t = surface.neighbor(s, E)
            for j in range(side):
                union(pid(s, r, j), pid(t, 0, j))
            t = surface.neighbor(s, N)
            for i in range(side):
                union(pid(s, i, r), pid(t, i, 0))
        roots = np.array([find(x) for x in range(F * side * side)])
        _, first = np.unique(roots, return_index=True)
        order = np.argsort(first)
        relabel = np.empty(roots.max() + 1, dtype=np.int64)
        relabel[np.unique(roots)[order]] = np.arange(len(order))
        vid = relabel[roots]
        self.n_vertices = len(order)

        origin = np.empty(nH, dtype=np.int64)
        nxt = np.empty(nH, dtype=np.int64)
        twin = np.full(nH, -1, dtype=np.int64)
        face = np.empty(nH, dtype=np.int64)
        vec = np.empty(nH, dtype=complex)
        anchor = np.empty(nC, dtype=complex)
        cell_square = np.empty(nC, dtype=np.int64)

        def cell(s, i, j):
            return (s * r + j) * r + i

        for s in range(F):
            for j in range(r):
                for i in range(r):
                    c = cell(s, i, j)
                    b = c * per
                    anchor[c] = (i + j * tau) * h
                    cell_square[c] = s
                    p00, p10 = vid[pid(s, i, j)], vid[pid(s, i + 1, j)]
                    p11, p01 = vid[pid(s, i + 1, j + 1)], vid[pid(s, i, j + 1)]
                    if not triangulate:
                        origin[b:b + 4] = (p00, p10, p11, p01)
                        vec[b:b + 4] = (h, h * tau, -h, -h * tau)
                        nxt[b:b + 4] = (b + 1, b + 2, b + 3, b)
                        face[b:b + 4] = c
                    else:
                        origin[b:b + 6] = (p00, p10, p01, p10, p11, p01)
                        vec[b:b + 6] = (h, h * (tau - 1), -h * tau, h * tau, -h, h * (1 - tau))
                        nxt[b:b + 6] = (b + 1, b + 2, b, b + 4, b + 5, b + 3)
                        face[b:b + 3] = 2 * c
                        face[b + 3:b + 6] = 2 * c + 1
                        twin[b + 1], twin[b + 5] = b + 5, b + 1
        sh = _TRI_SIDE if triangulate else _QUAD_SIDE
        for s in range(F):
            below, right = surface.neighbor(s, S), surface.neighbor(s, E)
            for j in range(r):
                for i in range(r):
                    c = cell(s, i, j)
                    lo = cell(s, i, j - 1) if j > 0 else cell(below, i, r - 1)
                    ri = cell(s, i + 1, j) if i < r - 1 else cell(right, 0, j)
                    a, b = c * per + sh[S], lo * per + sh[N]
                    twin[a], twin[b] = b, a
                    a, b = c * per + sh[E], ri * per + sh[W]
                    twin[a], twin[b] = b, a
        assert (twin >= 0).all() and (twin[twin] == np.arange(nH)).all()

        prev = np.empty(nH, dtype=np.int64)
        prev[nxt] = np.arange(nH)
        self.origin, self.next, self.prev, self.twin = origin, nxt, prev, twin
        self.face, self.vec = face, vec
        self.cell_anchor, self.cell_square = anchor, cell_square
        self.n_faces = int(face.max()) + 1
        self.n_half_edges = nH
        ang = np.angle(-vec[prev] / vec) % (2 * np.pi)
        self.angle = ang
        self.vertex_angle = np.bincount(origin, weights=ang, minlength=self.n_vertices)
        # canonical half-edge per edge is the smaller id
        canon = np.minimum(np.arange(nH), twin)
        self.edge_he = np.unique(canon)
        self.edge_of = np.searchsorted(self.edge_he, canon)
        self.n_edges = len(self.edge_he)
        self._out = None

    # -- basic queries ----------------------------------------------------
    def dest(self, h):
        return self.origin[self.next[h]]

    def is_cone(self, v) -> bool:
        return self.vertex_angle[v] > 2 * np.pi + 1e-9

    @property
    def cone_vertices(self):
        return np.flatnonzero(self.vertex_angle > 2 * np.pi + 1e-9)

    def side_half_edge(self, c: int, side: int) -> int:
        sh = _TRI_SIDE if self.triangulate else _QUAD_SIDE
        return c * self.per_cell + sh[side]

    def cell_of(self, h: int) -> int:
        return h // self.per_cell

    def cell_ij(self, c: int):
        r = self.r
        return c // (r * r), c % r, (c // r) % r

    def outgoing(self, v: int):
        """Outgoing half-edges at ``v`` in counterclockwise order."""
        if self._out is None:
            out = [[] for _ in range(self.n_vertices)]
            for h in range(self.n_half_edges):
                out[self.origin[h]].append(h)
            rot = []
            for v_, hs in enumerate(out):
                h0 = min(hs)
                ring = [h0]
                h = self.twin[self.prev[h0]]
                while h != h0:
                    ring.append(h)
                    h = self.twin[self.prev[h]]
                assert len(ring) == len(hs)
                rot.append(ring)
            self._out = rot
        return self._out[v]

    def face_polygon(self, f: int):
        """Chart coordinates of the corners of face ``f`` (counterclockwise)."""
        if self.triangulate:
            c, upper = divmod(f, 2)
            h0 = 6 * c + 3 * upper
        else:
            c, upper, h0 = f, 0, 4 * f
        # the upper triangle starts at the end of the lower triangle's bottom side
        start = self.cell_anchor[c] + (self.vec[6 * c] if upper else 0)
        pts = [start]
        h = h0
        while True:
            pts.append(pts[-1] + self.vec[h])
            h = self.next[h]
            if h == h0:
                break
        return np.array(pts[:-1])

    def face_center(self, f: int) -> complex:
        """Circumcenter of a cyclic face (triangles, rectangles)."""
        p = self.face_polygon(f)
        a, b, c = p[0], p[1], p[2]
        d = 2 * ((a.real - c.real) * (b.imag - c.imag) - (b.real - c.real) * (a.imag - c.imag))
        ac, bc = abs(a - c) ** 2, abs(b - c) ** 2
        ux = (ac * (b.imag - c.imag) - bc * (a.imag - c.imag)) / d
        uy = (bc * (a.real - c.real) - ac * (b.real - c.real)) / d
        center = c + complex(ux, uy)
        rad = np.abs(p - center)
        if np.ptp(rad) > 1e-9 * rad.max():
            raise ValueError(f"face {f} is not cyclic")
        return center

    # -- paths --------------------------------------------------------------
    def refine(self, base: "Mesh", path):
        """Map a half-edge path of the quadrilateral ``base`` mesh onto this mesh."""
        if base.triangulate or self.r % base.r:
            raise ValueError("refinement must be an integer multiple of a quad base mesh")
        k = self.r // base.r
        out = []
        for h0 in path:
            c0, side = divmod(int(h0), 4)
            s, i0, j0 = base.cell_ij(c0)
            r = self.r
            for t in range(k):
                if side == S:
                    i, j = i0 * k + t, j0 * k
                elif side == E:
                    i, j = i0 * k + k - 1, j0 * k + t
                elif side == N:
                    i, j = i0 * k + k - 1 - t, j0 * k + k - 1
                else:
                    i, j = i0 * k, j0 * k + k - 1 - t
                out.append(self.side_half_edge((s * r + j) * r + i, side))
        return out

    def check_closed(self, path):
        path = list(path)
        if not path:
            raise ValueError("empty cycle")
        for a, b in zip(path, path[1:] + path[:1]):
            if self.dest(a) != self.origin[b]:
                raise ValueError("path is not a closed edge walk")

    def _left_corners(self, path):
        """Yield, per vertex of a closed walk, the half-edges crossed by the left pushoff."""
        path = list(path)
        for a, b in zip(path, path[1:] + path[:1]):
            h = a
            steps = []
            while self.next[h] != b:
                x = self.next[h]
                steps.append(x)
                h = self.twin[x]
                if len(steps) > 4 * self.n_half_edges:
                    raise RuntimeError("pushoff does not close")
            yield a, b, steps

    def pushoff(self, path):
        """Half-edges crossed (from their face to the twin's face) by the left pushoff."""
        self.check_closed(path)
        steps = []
        for _, _, st in self._left_corners(path):
            steps.extend(st)
        return steps

    def turning(self, path) -> float:
        """Total turning angle of a closed walk (radians)."""
        self.check_closed(path)
        total = 0.0
        for a, b, st in self._left_corners(path):
            v = self.origin[b]
            if self.is_cone(v):
                raise ConeVertexError(f"walk passes through cone vertex {v}")
            left = self.angle[self.next[a]] + sum(self.angle[self.next[self.twin[x]]] for x in st)
            total += np.pi - left
        return total

    def chain(self, path) -> np.ndarray:
        """Antisymmetric integer chain of a walk on half-edges."""
        a = np.zeros(self.n_half_edges, dtype=np.int64)
        np.add.at(a, np.asarray(path, dtype=np.int64), 1)
        return a - a[self.twin]

    def cochain(self, steps) -> np.ndarray:
        a = np.zeros(self.n_half_edges, dtype=np.int64)
        np.add.at(a, np.asarray(steps, dtype=np.int64), 1)
        return a - a[self.twin]


class ConeVertexError(ValueError):
    """A closed walk passes through a cone point."""
