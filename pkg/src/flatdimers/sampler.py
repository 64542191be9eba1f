"""Markov chain Monte Carlo on dimer covers.

Three symmetric, self-inverse move types, chosen independently of the state:

* face flip: a face c_0 c_1 ... c_{2k-1} of G whose even- (or odd-) indexed
  edges are all dimers gets its two halves swapped;
* rail flip: the same on a straight non-contractible strip;
* loop move (probability ``loop_prob``): from a uniform white vertex walk the
  alternating digraph (white -> black along a non-dimer edge chosen uniformly,
  black -> white along its dimer) until a white vertex repeats. If the walk
  closes at its start, the cycle is flipped. Every white vertex has out-degree
  deg - 1 whatever the cover, so the proposal probability of a cycle equals
  that of its reversal in the flipped cover.

Metropolis on the edge weights then gives exact detailed balance. Periods are
tracked incrementally: free for face flips, O(cycle length) for loop moves.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching, min_weight_full_bipartite_matching

from .graph import DimerGraph, DimerCover
from .height import cover_periods
from .kasteleyn import TwistVector, build_K

__all__ = ["McmcConfig", "initial_cover", "mcmc_sample", "monodromy_histogram", "sample_histogram",
           "MonodromyHistogram", "NoMatchingError"]


class NoMatchingError(ValueError):
    pass


@dataclass(frozen=True)
class McmcConfig:
    steps: int = 100_000
    burn_in: int = 10_000
    seed: int = 0
    loop_prob: float = 0.2
    thin: int = 1
    chains: int = 1
    walk_cap: int = 0       # max whites on a loop-move walk; 0 means 4 x #whites

    def __post_init__(self):
        if not self.steps > self.burn_in >= 0:
            raise ValueError("need steps > burn_in >= 0")
        if not 0 <= self.loop_prob <= 1:
            raise ValueError("loop_prob must be in [0, 1]")
        if self.thin < 1 or self.chains < 1:
            raise ValueError("thin and chains must be positive")


def initial_cover(g: DimerGraph, seed: int = 0, tries: int = 32) -> DimerCover:
    """A perfect matching with at least one flippable face when possible.

    Frozen covers (no alternating face) can form a closed class under face and
    rail flips, so the chain starts from a minimum-cost matching under random
    edge costs instead of the first one found by augmenting paths.
    """
    A = csr_matrix((np.ones(g.n_edges), (g.edge_w, g.edge_b)), shape=(g.n_white, g.n_black))
    match = maximum_bipartite_matching(A, perm_type="column")
    if g.n_white != g.n_black or (match < 0).any():
        raise NoMatchingError("graph has no perfect matching")
    mv = _Moves(g)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x5EED])))
    best = None
    for _ in range(tries):
        cost = rng.random(g.n_edges) + 1.0
        C = csr_matrix((cost, (g.edge_w, g.edge_b)), shape=(g.n_white, g.n_black))
        rows, cols = min_weight_full_bipartite_matching(C)
        lookup = {}
        for e in np.argsort(cost)[::-1]:
            lookup[(int(g.edge_w[e]), int(g.edge_b[e]))] = int(e)
        edges = [0] * g.n_white
        for w, b in zip(rows, cols):
            edges[w] = lookup[(int(w), int(b))]
        D = DimerCover(tuple(edges))
        best = best or D
        if mv.n_faces == 0 or mv.flippable_faces(D):
            return D
    return best


class _Moves:
    def __init__(self, g: DimerGraph, weights=None):
        w = g.edge_weight if weights is None else np.asarray(weights, dtype=float)
        logw = np.log(w)
        cycles = [f for k, f in enumerate(g.faces) if g.face_is_simple(k) and len(f) % 2 == 0]
        self.n_faces = len(cycles)
        rails = [r for r in g.rails]
        self.n_rails = len(rails)
        cycles = cycles + rails
        self.even = [tuple(int(e) for e in c[0::2]) for c in cycles]
        self.odd = [tuple(int(e) for e in c[1::2]) for c in cycles]
        cross = g.edge_cross
        self.delta = [tuple(int(x) for x in np.rint(cross[list(o)].sum(0) - cross[list(e)].sum(0)))
                      for e, o in zip(self.even, self.odd)]
        dl = [float(logw[list(o)].sum() - logw[list(e)].sum()) for e, o in zip(self.even, self.odd)]
        self.uniform = bool(np.allclose(dl, 0.0, atol=1e-12))
        self.dlogw = dl

    def flippable_faces(self, D: DimerCover) -> int:
        s = set(D.edges)
        return sum(1 for k in range(self.n_faces)
                   if all(e in s for e in self.even[k]) or all(e in s for e in self.odd[k]))


def _chain(g: DimerGraph, cfg: McmcConfig, rng: np.random.Generator, start: DimerCover,
           alpha_G: TwistVector, weights=None, record=None, emit=None, stats=None):
    """Run one chain; ``record(key)`` and ``emit(inD)`` are called once per kept step."""
    mv = _Moves(g, weights)
    nW = g.n_white
    ew, eb = g.edge_w.tolist(), g.edge_b.tolist()
    cross = [tuple(int(x) for x in row) for row in g.edge_cross.tolist()]
    logw = np.log(g.edge_weight if weights is None else np.asarray(weights, dtype=float)).tolist()
    adj = [list(map(int, a)) for a in g.edges_at_white()]
    inD = [False] * g.n_edges
    Dw = list(start.edges)
    Db = [0] * g.n_black
    for e in Dw:
        inD[e] = True
        Db[eb[e]] = e
    per = list(int(x) for x in cover_periods(g, [start], alpha_G)[0])
    key = tuple(per)
    nF, nR = mv.n_faces, mv.n_rails
    p_loop = cfg.loop_prob
    cap = cfg.walk_cap or 4 * nW
    even, odd, delta, dlogw, uniform = mv.even, mv.odd, mv.delta, mv.dlogw, mv.uniform
    st = {"face": 0, "rail": 0, "walk": 0, "walk_tried": 0}
    chunk = 1 << 16
    done = 0
    while done < cfg.steps:
        n = min(chunk, cfg.steps - done)
        u = rng.random(n).tolist()
        fi = rng.integers(0, max(nF + nR, 1), n).tolist()
        wi = rng.integers(0, nW, n).tolist()
        for s in range(n):
            if u[s] < p_loop or nF + nR == 0:
                # loop move: walk the alternating digraph from a uniform white vertex
                st["walk_tried"] += 1
                w0 = wi[s]
                seen = {w0}
                w = w0
                path = []
                closed = False
                while len(path) < cap:
                    opts = adj[w]
                    if len(opts) < 2:
                        break
                    e = opts[int(rng.random() * len(opts))]
                    if e == Dw[w]:
                        continue
                    e2 = Db[eb[e]]
                    path.append((e, e2))
                    w = ew[e2]
                    if w in seen:
                        closed = w == w0
                        break
                    seen.add(w)
                if closed:
                    dl = 0.0 if uniform else sum(logw[a] - logw[b] for a, b in path)
                    if uniform or math.log(rng.random() + 1e-300) < dl:
                        for a, b in path:
                            inD[b] = False
                        for a, b in path:
                            inD[a] = True
                            Dw[ew[a]] = a
                            Db[eb[a]] = a
                        d = [0] * len(per)
                        for a, b in path:
                            ca, cb = cross[a], cross[b]
                            for i in range(len(d)):
                                d[i] += ca[i] - cb[i]
                        if any(d):
                            per = [p + x for p, x in zip(per, d)]
                            key = tuple(per)
                        st["walk"] += 1
            else:
                k = fi[s]
                ev = even[k]
                od = odd[k]
                sgn = 0
                if all(inD[e] for e in ev):
                    sgn = 1
                elif all(inD[e] for e in od):
                    sgn = -1
                if sgn and (uniform or math.log(rng.random() + 1e-300) < sgn * dlogw[k]):
                    old, new = (ev, od) if sgn == 1 else (od, ev)
                    for e in old:
                        inD[e] = False
                    for e in new:
                        inD[e] = True
                        Dw[ew[e]] = e
                        Db[eb[e]] = e
                    if k >= nF:
                        per = [p + sgn * x for p, x in zip(per, delta[k])]
                        key = tuple(per)
                        st["rail"] += 1
                    else:
                        st["face"] += 1
            t = done + s + 1
            if t > cfg.burn_in and (t - cfg.burn_in) % cfg.thin == 0:
                if record is not None:
                    record(key)
                if emit is not None:
                    emit(inD)
        done += n
    if stats is not None:
        stats.update(st)


def _rngs(cfg: McmcConfig):
    ss = np.random.SeedSequence(cfg.seed)
    return [np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(cfg.chains)]


def mcmc_sample(g: DimerGraph, cfg: McmcConfig, alpha_G: TwistVector | None = None, start=None,
                weights=None):
    """List of DimerCovers after burn-in (every ``thin`` steps), chains concatenated.

    ``alpha_G`` defaults to the gauge form solved by ``build_K``.
    """
    alpha_G = alpha_G or build_K(g).alpha_G
    start = start or initial_cover(g, cfg.seed)
    white_of = g.edge_w
    out = []

    def emit(inD):
        edges = [0] * g.n_white
        for e, x in enumerate(inD):
            if x:
                edges[white_of[e]] = e
        out.append(DimerCover(tuple(edges)))

    for rng in _rngs(cfg):
        _chain(g, cfg, rng, start, alpha_G, weights, emit=emit)
    return out


@dataclass
class MonodromyHistogram:
    counts: dict
    n: int

    def pmf(self) -> dict:
        return {k: v / self.n for k, v in sorted(self.counts.items())}

    def total_variation(self, exact: dict) -> float:
        p = self.pmf()
        keys = set(p) | set(exact)
        return 0.5 * sum(abs(p.get(k, 0.0) - exact.get(k, 0.0)) for k in keys)

    def std_error(self, key) -> float:
        q = self.counts.get(key, 0) / self.n
        return math.sqrt(max(q * (1 - q), 1e-300) / self.n)


def monodromy_histogram(stream, g: DimerGraph, alpha_G: TwistVector) -> MonodromyHistogram:
    """Period-vector counts of an explicit stream of covers."""
    covers = list(stream)
    c = Counter(map(tuple, cover_periods(g, covers, alpha_G).tolist())) if covers else Counter()
    return MonodromyHistogram(dict(sorted(c.items())), len(covers))


def sample_histogram(g: DimerGraph, cfg: McmcConfig, alpha_G: TwistVector | None = None,
                     start=None, weights=None) -> MonodromyHistogram:
    """Incremental period tracking without materializing covers; chains merged in order."""
    alpha_G = alpha_G or build_K(g).alpha_G
    start = start or initial_cover(g, cfg.seed)
    total = Counter()
    for rng in _rngs(cfg):
        c = Counter()

        def rec(k):
            c[k] += 1

        _chain(g, cfg, rng, start, alpha_G, weights, record=rec)
        total.update(c)
    n = sum(total.values())
    return MonodromyHistogram(dict(sorted(total.items())), n)
