"""Symbolic coding of the geodesic flow of a graph of groups.

Order 1: a letter is a quotient edge ``e`` with the canonical representative
of a class in ``rho_{e'}(G_{e'}) \\ G_{o(e)} / rho_ebar(G_e)``, where ``e'``
is the preceding edge. Order ``k``: a letter is a path ``(e_0, .., e_k)``
with the canonical tuple of its class under the product of the edge groups.

Windows are finite locally injective edge paths in the tree. The relative
element ``g_j`` between consecutive edges ``f_{j-1} = [u_{j-1} e_{j-1}]`` and
``f_j = [u_j e_j]`` is ``u_j = u_{j-1} e_{j-1} g_j`` in the fundamental
groupoid; its double class does not depend on the chosen paths ``u``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .bass_serre import (Word, edge_reverse, edge_terminus, expand_ball, lift_edge,
                         neighbors)
from .gog import GraphOfGroups, TruncationError
from .grp import double_coset_labels


class TransitionError(ValueError):
    """A letter sequence violates the transition rule at ``index``."""

    def __init__(self, msg, index):
        self.index = index
        super().__init__(f"position {index}: {msg}")


@dataclass(frozen=True)
class Order1Letter:
    edge: object
    rep: int


@dataclass(frozen=True)
class OrderKLetter:
    path: tuple
    reps: tuple

    @property
    def edge(self):
        return self.path[-1]


@dataclass(frozen=True)
class GeodesicWindow:
    """Tree edges ``(vertex word, coset label, quotient edge)`` in order."""
    edges: tuple

    def __len__(self):
        return len(self.edges)

    @property
    def quotient_path(self):
        return tuple(f[2] for f in self.edges)


# per-graph caches

class _Arith:
    """Plain-list views of the maps used in the hot loops."""

    def __init__(self, Q):
        self.Q = Q
        self._c = {}

    def rho(self, e):
        return self.Q.edge_arith(e)[2]

    def rho_bar(self, e):
        return self.Q.edge_arith(self.Q.reverse(e))[2]

    def etab(self, e):
        key = ("etab", e)
        if key not in self._c:
            G = self.Q.edge_group(e)
            self._c[key] = (G.table.tolist(), G.inv.tolist())
        return self._c[key]

    def dlabels(self, e_prev, e):
        """Canonical double-class labels in ``G_{o(e)}`` after ``e_prev``."""
        key = ("dl", e_prev, e)
        if key not in self._c:
            Q = self.Q
            G = Q.vertex_group(Q.origin(e))
            H = Q.edge_image(Q.reverse(e_prev))
            K = Q.edge_image(e)
            self._c[key] = double_coset_labels(G, H, K).tolist()
        return self._c[key]


def arith(g: GraphOfGroups) -> _Arith:
    Q = g.quotient
    if not hasattr(Q, "_shift_arith"):
        Q._shift_arith = _Arith(Q)
    return Q._shift_arith


def coded_edges(g: GraphOfGroups) -> list:
    """Core edges plus the ray edges whose groups are explicit, sorted."""
    Q = g.quotient
    out = list(Q.core_edges)
    for r in sorted(g.rays, key=lambda r: r.id):
        D = Q.explicit_depth(r.id)
        for n in range(D):
            out += [("up", r.id, n), ("dn", r.id, n)]
    return sorted(out, key=Q.sort_key)


def _succ_edges(g, e, allowed):
    Q = g.quotient
    return [f for f in sorted(Q.out_edges(Q.terminus(e)), key=Q.sort_key) if f in allowed]


# class canonicalization

def orbit_canon(g: GraphOfGroups, path, reps):
    """Lexicographically least tuple in the class of ``reps`` in ``G(path)``.

    The action of ``(a_0, .., a_k)`` is
    ``g_j -> rho_{e_{j-1}}(a_{j-1}) g_j rho_{ebar_j}(a_j)^-1``.
    Returns ``(canon, alphas)`` with ``alphas`` realizing the move.
    """
    A = arith(g)
    Q = g.quotient
    layer = list(range(Q.edge_group(path[0]).order))
    backs, out = [], []
    for j in range(1, len(path)):
        e_prev, e = path[j - 1], path[j]
        table, inv = Q.arith(Q.origin(e))
        rp, rb = A.rho(e_prev), A.rho_bar(e)
        x = reps[j - 1]
        best, back = None, {}
        lefts = {table[rp[a]][x]: a for a in reversed(layer)}
        for left, a in sorted(lefts.items()):
            row = table[left]
            for b in range(len(rb)):
                val = row[inv[rb[b]]]
                if best is None or val < best:
                    best, back = val, {b: a}
                elif val == best and b not in back:
                    back[b] = a
        out.append(best)
        backs.append(back)
        layer = sorted(back)
    alphas = [layer[0]]
    for back in reversed(backs):
        alphas.append(back[alphas[-1]])
    return tuple(out), tuple(reversed(alphas))


def act(g: GraphOfGroups, path, alphas, reps) -> tuple:
    A = arith(g)
    Q = g.quotient
    out = []
    for j in range(1, len(path)):
        table, inv = Q.arith(Q.origin(path[j]))
        left = table[A.rho(path[j - 1])[alphas[j - 1]]][reps[j - 1]]
        out.append(table[left][inv[A.rho_bar(path[j])[alphas[j]]]])
    return tuple(out)


def transform(g: GraphOfGroups, path, src, dst):
    """Alphas moving ``src`` to ``dst`` inside ``G(path)``, or ``None``."""
    c1, a = orbit_canon(g, path, src)
    c2, b = orbit_canon(g, path, dst)
    if c1 != c2:
        return None
    A = arith(g)
    out = []
    for e, x, y in zip(path, a, b):
        table, inv = A.etab(e)
        out.append(table[inv[y]][x])
    return tuple(out)


def is_backtrack(g: GraphOfGroups, e_prev, e, rep) -> bool:
    Q = g.quotient
    return e == Q.reverse(e_prev) and arith(g).dlabels(e_prev, e)[rep] == 0


# subshifts

@dataclass
class SubshiftSpec:
    order: int
    alphabet: list
    succ: list                        # succ[i] = sorted successor indices
    index: dict = field(default_factory=dict)
    components: list = field(default_factory=list)   # recurrent classes
    periods: list = field(default_factory=list)

    def allowed(self, a, b) -> bool:
        return self.index[b] in self._succ_sets[self.index[a]]

    @property
    def _succ_sets(self):
        if not hasattr(self, "_ss"):
            self._ss = [set(s) for s in self.succ]
        return self._ss

    def pairs(self) -> list:
        return [(i, j) for i, s in enumerate(self.succ) for j in s]

    def matrix(self) -> np.ndarray:
        n = len(self.alphabet)
        M = np.zeros((n, n), dtype=np.int64)
        for i, j in self.pairs():
            M[i, j] = 1
        return M

    @property
    def period(self) -> int | None:
        return reduce(math.gcd, self.periods) if self.periods else None


def recurrent_structure(n: int, succ: list):
    """Strongly connected classes carrying a cycle, with their periods."""
    if n == 0:
        return [], []
    rows = [i for i, s in enumerate(succ) for _ in s]
    cols = [j for s in succ for j in s]
    G = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    ncomp, lab = connected_components(G, directed=True, connection="strong")
    comps, periods = [], []
    for c in range(ncomp):
        members = [i for i in range(n) if lab[i] == c]
        mset = set(members)
        if len(members) == 1 and members[0] not in succ[members[0]]:
            continue
        comps.append(members)
        periods.append(cycle_gcd(members, mset, succ))
    order = sorted(range(len(comps)), key=lambda k: comps[k][0])
    return [comps[k] for k in order], [periods[k] for k in order]


def cycle_gcd(members, mset, succ) -> int:
    """Period of a strongly connected class via BFS levels."""
    root = members[0]
    level = {root: 0}
    todo = [root]
    for u in todo:
        for v in succ[u]:
            if v in mset and v not in level:
                level[v] = level[u] + 1
                todo.append(v)
    p = 0
    for u in members:
        for v in succ[u]:
            if v in mset:
                p = math.gcd(p, level[u] + 1 - level[v])
    return p


def _finish(k, alphabet, succ):
    comps, periods = recurrent_structure(len(alphabet), succ)
    return SubshiftSpec(k, alphabet, succ, {a: i for i, a in enumerate(alphabet)},
                        comps, periods)


def build_subshift(g: GraphOfGroups, k: int = 1) -> SubshiftSpec:
    """Order-``k`` subshift of finite type over the explicit part of ``g``."""
    if k < 1:
        raise ValueError("order must be positive")
    if k == 1:
        return _build_order1(g)
    return _build_orderk(g, k)


def _build_order1(g):
    Q = g.quotient
    A = arith(g)
    edges = coded_edges(g)
    allowed = set(edges)
    preds = {e: [] for e in edges}
    for e in edges:
        for f in _succ_edges(g, e, allowed):
            preds[f].append(e)
    letters = []
    for e in edges:
        reps = set()
        for p in preds[e]:
            lab = A.dlabels(p, e)
            reps.update(r for r in set(lab) if not (e == Q.reverse(p) and r == 0))
        letters += [Order1Letter(e, r) for r in sorted(reps)]
    pos = {a: i for i, a in enumerate(letters)}
    by_edge = {}
    for a in letters:
        by_edge.setdefault(a.edge, []).append(a)
    succ = []
    for a in letters:
        out = []
        for f in _succ_edges(g, a.edge, allowed):
            lab = A.dlabels(a.edge, f)
            for b in by_edge.get(f, []):
                if lab[b.rep] == b.rep and not is_backtrack(g, a.edge, f, b.rep):
                    out.append(pos[b])
        succ.append(sorted(out))
    return _finish(1, letters, succ)


def k_paths(g, k, edges=None):
    edges = coded_edges(g) if edges is None else edges
    allowed = set(edges)
    paths = [(e,) for e in edges]
    for _ in range(k):
        paths = [p + (f,) for p in paths for f in _succ_edges(g, p[-1], allowed)]
    return paths


def path_classes(g, path, limit=500000):
    """Canonical tuples of all locally injective classes in ``G(path)``."""
    Q = g.quotient
    sizes = [Q.vertex_group(Q.origin(e)).order for e in path[1:]]
    if math.prod(sizes) > limit:
        raise ValueError(f"class enumeration over {math.prod(sizes)} tuples is too large")
    seen = set()
    for reps in itertools.product(*[range(s) for s in sizes]):
        if any(is_backtrack(g, path[j - 1], path[j], reps[j - 1]) for j in range(1, len(path))):
            continue
        seen.add(orbit_canon(g, path, reps)[0])
    return sorted(seen)


def _build_orderk(g, k):
    letters = []
    for p in k_paths(g, k):
        letters += [OrderKLetter(p, c) for c in path_classes(g, p)]
    pos = {a: i for i, a in enumerate(letters)}
    heads = {}
    for a in letters:
        key = (a.path[:-1], orbit_canon(g, a.path[:-1], a.reps[:-1])[0])
        heads.setdefault(key, []).append(pos[a])
    succ = []
    for a in letters:
        key = (a.path[1:], orbit_canon(g, a.path[1:], a.reps[1:])[0])
        succ.append(sorted(heads.get(key, [])))
    return _finish(k, letters, succ)


# windows

def check_window(g: GraphOfGroups, w: GeodesicWindow):
    Q = g.quotient
    for j in range(1, len(w.edges)):
        prev, f = w.edges[j - 1], w.edges[j]
        if edge_terminus(Q, prev) != f[0]:
            raise ValueError(f"window is not a path at position {j}")
        if f == edge_reverse(Q, prev):
            raise ValueError(f"window not locally injective at position {j}")


def relative_elements(g: GraphOfGroups, w: GeodesicWindow) -> list[int]:
    """``g_j`` for ``j = 1 .. len(w) - 1`` read off the tree edges."""
    Q = g.quotient
    check_window(g, w)
    out = []
    for j in range(1, len(w.edges)):
        (x, c, e), f = w.edges[j - 1], w.edges[j]
        if c == 0 and x and x[-1][1] == Q.reverse(e):
            table, inv = Q.arith(Q.origin(f[2]))
            out.append(table[inv[x[-1][0]]][f[1]])
        else:
            out.append(f[1])
    return out


def itinerary(g: GraphOfGroups, w: GeodesicWindow, k: int = 1) -> list:
    """Order-``k`` code of a window.

    ``k = 1`` gives one :class:`Order1Letter` per edge; the first letter has
    no predecessor and its class is set to the identity class. ``k >= 2``
    gives one :class:`OrderKLetter` per edge from position ``k`` on.
    """
    if len(w.edges) < k + 1:
        raise ValueError("window shorter than order + 1")
    gs = relative_elements(g, w)
    es = w.quotient_path
    if k == 1:
        A = arith(g)
        return [Order1Letter(es[0], 0)] + [
            Order1Letter(es[j], A.dlabels(es[j - 1], es[j])[gs[j - 1]])
            for j in range(1, len(es))]
    return [OrderKLetter(es[i - k:i + 1], orbit_canon(g, es[i - k:i + 1], gs[i - k:i])[0])
            for i in range(k, len(es))]


def _walk(g, e0, gs, es, first=None):
    """Window with ``f_0 = [u_0 e_0]`` and relative elements ``gs``."""
    Q = g.quotient
    u = first if first is not None else Word.lift(Q, Q.origin(e0))
    pairs, carry = list(u.pairs), u.carry
    left = Q.edge_arith(e0)[0]
    out = [(tuple(pairs), left[carry], e0)]
    prev = e0
    for x, e in zip(gs, es):
        carry = Word._push_edge(Q, pairs, carry, prev)
        table, _ = Q.arith(Q.origin(e))
        carry = table[carry][x]
        out.append((tuple(pairs), Q.edge_arith(e)[0][carry], e))
        prev = e
    return GeodesicWindow(tuple(out))


def reconstruct(g: GraphOfGroups, seq: list, k: int = 1) -> GeodesicWindow:
    """A window whose itinerary is ``seq``; its first edge is the chosen lift."""
    if not seq:
        raise ValueError("empty sequence")
    if k == 1:
        Q = g.quotient
        A = arith(g)
        es = [a.edge for a in seq]
        for j in range(1, len(seq)):
            e_prev, e = es[j - 1], es[j]
            if Q.origin(e) != Q.terminus(e_prev):
                raise TransitionError("edges do not connect", j)
            if A.dlabels(e_prev, e)[seq[j].rep] != seq[j].rep:
                raise TransitionError("representative is not canonical", j)
            if is_backtrack(g, e_prev, e, seq[j].rep):
                raise TransitionError("backtracking letter", j)
        return _walk(g, es[0], [a.rep for a in seq[1:]], es[1:])
    first = seq[0]
    es = list(first.path)
    gs = list(first.reps)
    for j in range(1, len(seq)):
        a = seq[j]
        if a.path[:-1] != tuple(es[-k:]):
            raise TransitionError("paths do not overlap", j)
        if any(is_backtrack(g, a.path[i - 1], a.path[i], a.reps[i - 1]) for i in range(1, k + 1)):
            raise TransitionError("backtracking letter", j)
        path = a.path[:-1]
        alphas = transform(g, path, a.reps[:-1], tuple(gs[-(k - 1):]))
        if alphas is None:
            raise TransitionError("classes do not overlap", j)
        Q = g.quotient
        table, _ = Q.arith(Q.origin(a.path[-1]))
        gs.append(table[arith(g).rho(path[-1])[alphas[-1]]][a.reps[-1]])
        es.append(a.path[-1])
    return _walk(g, es[0], gs, es[1:])


def canonicalize_mod_gamma(g: GraphOfGroups, w: GeodesicWindow) -> GeodesicWindow:
    """Representative of the orbit of ``w``: the first edge becomes its chosen
    lift and the remaining freedom (the stabilizer of that lift) is spent on
    making the label sequence lexicographically least."""
    Q = g.quotient
    gs = relative_elements(g, w)
    es = w.quotient_path
    e0 = es[0]
    P = Word.lift(Q, Q.origin(e0))
    best = None
    for b in sorted(set(arith(g).rho_bar(e0))):
        cand = _walk(g, e0, gs, es[1:], first=P.times_elem(b))
        labels = tuple(f[1] for f in cand.edges)
        if best is None or labels < best[0]:
            best = (labels, cand)
    return best[1]


def decode_orderk(g: GraphOfGroups, seq: list, k: int, report=None) -> GeodesicWindow:
    """Canonical window for an order-``k`` itinerary of a ``k``-acylindrical graph."""
    from .acyl import acylindricity
    rep = report or acylindricity(g)
    if rep.verdict != "acylindrical" or rep.k_min > k:
        raise ValueError(f"graph is not {k}-acylindrical; decoding would not be injective")
    return canonicalize_mod_gamma(g, reconstruct(g, seq, k))


# time reversal

def _inv_in(g, v, x):
    return g.quotient.arith(v)[1][x]


def time_reverse(g: GraphOfGroups, seq: list) -> list:
    """The involution ``x -> (xbar_{-i-1})_i`` on finite codes."""
    Q = g.quotient
    if not seq:
        return []
    if isinstance(seq[0], Order1Letter):
        A = arith(g)
        es = [Q.reverse(a.edge) for a in reversed(seq)]
        out = [Order1Letter(es[0], 0)]
        for j in range(1, len(seq)):
            a = seq[len(seq) - j]
            x = _inv_in(g, Q.origin(es[j]), a.rep)
            out.append(Order1Letter(es[j], A.dlabels(es[j - 1], es[j])[x]))
        return out
    out = []
    for a in reversed(seq):
        path = tuple(Q.reverse(e) for e in reversed(a.path))
        reps = tuple(_inv_in(g, Q.origin(path[j]), x)
                     for j, x in zip(range(1, len(path)), reversed(a.reps)))
        out.append(OrderKLetter(path, orbit_canon(g, path, reps)[0]))
    return out


def reverse_window(g: GraphOfGroups, w: GeodesicWindow) -> GeodesicWindow:
    Q = g.quotient
    return GeodesicWindow(tuple(edge_reverse(Q, f) for f in reversed(w.edges)))


# sampling

def random_gamma(g: GraphOfGroups, rng, steps: int = 6) -> Word:
    """A random element of the fundamental group (explicit levels only)."""
    Q = g.quotient
    allowed = set(coded_edges(g))
    w = Word.identity(Q)
    for _ in range(steps):
        v = w.end
        w = w.times_elem(int(rng.integers(Q.vertex_group(v).order)))
        outs = [e for e in sorted(Q.out_edges(v), key=Q.sort_key) if e in allowed]
        if outs:
            w = w.times_edge(outs[int(rng.integers(len(outs)))])
    return w * Word.lift(Q, w.end).inverse()


def random_window(g: GraphOfGroups, length: int, rng, translate: bool = True) -> GeodesicWindow:
    """Random locally injective window over the explicit part of the tree."""
    Q = g.quotient
    edges = coded_edges(g)
    allowed = set(edges)
    while True:
        f = lift_edge(Q, edges[int(rng.integers(len(edges)))])
        if translate:
            f = random_gamma(g, rng).act_edge(f)
        out = [f]
        while len(out) < length:
            y = edge_terminus(Q, out[-1])
            back = edge_reverse(Q, out[-1])
            nxt = [h for h in neighbors(Q, y, synthetic=True) if h[2] in allowed and h != back]
            if not nxt:
                break
            out.append(nxt[int(rng.integers(len(nxt)))])
        if len(out) == length:
            return GeodesicWindow(tuple(out))


def random_word(spec: SubshiftSpec, length: int, rng) -> list:
    """Random transition-valid word (restarts on dead ends)."""
    while True:
        i = int(rng.integers(len(spec.alphabet)))
        out = [i]
        while len(out) < length and spec.succ[out[-1]]:
            s = spec.succ[out[-1]]
            out.append(s[int(rng.integers(len(s)))])
        if len(out) == length:
            return [spec.alphabet[i] for i in out]


# JSON helpers

def letter_json(Q, a) -> dict:
    if isinstance(a, Order1Letter):
        return {"edge": Q.name(a.edge), "rep": a.rep}
    return {"path": [Q.name(e) for e in a.path], "reps": list(a.reps)}


def subshift_json(g: GraphOfGroups, spec: SubshiftSpec) -> dict:
    Q = g.quotient
    return {"order": spec.order, "alphabet_size": len(spec.alphabet),
            "alphabet": [letter_json(Q, a) for a in spec.alphabet],
            "transitions": [list(p) for p in spec.pairs()],
            "recurrent_components": [{"letters": c, "period": p}
                                     for c, p in zip(spec.components, spec.periods)],
            "period": spec.period}
