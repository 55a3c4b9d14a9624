"""The Bass-Serre tree of a graph of groups: groupoid words, finite balls,
growth and length invariants.

Tree vertices are reduced words ``((c_1, e_1), ..., (c_m, e_m))`` read from
the basepoint lift: ``e_j`` is a directed quotient edge and ``c_j`` is a
canonical left coset label of ``G_{o(e_j)} / rho_ebar(G_{e_j})``. A word is
reduced when no ``(0, ebar)`` follows ``e``. A tree edge is a triple
``(vertex, c, e)``. Elements of the fundamental groupoid are words with an
extra ``carry`` in the last vertex group; the fundamental group is the set
of such words that start and end at the basepoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .gog import GraphOfGroups, TruncationError


# groupoid words

class Word:
    """Normal form ``c_0 e_1 c_1 ... e_m carry`` in the fundamental groupoid.

    ``pairs`` holds ``(c_{j-1}, e_j)`` with canonical labels; the word is
    immutable once built and compares by value.
    """

    __slots__ = ("Q", "start", "pairs", "carry")

    def __init__(self, Q, start, pairs=(), carry=0):
        self.Q = Q
        self.start = start
        self.pairs = tuple(pairs)
        self.carry = int(carry)

    @property
    def end(self):
        return self.Q.terminus(self.pairs[-1][1]) if self.pairs else self.start

    @classmethod
    def identity(cls, Q, v=None):
        return cls(Q, Q.g.basepoint if v is None else v)

    @classmethod
    def lift(cls, Q, v):
        """Chosen lift of quotient vertex ``v`` as a word with carry 0."""
        return cls(Q, Q.g.basepoint, Q.lift_pairs(v))

    def key(self):
        return (self.start, self.pairs, self.carry)

    def __eq__(self, other):
        return isinstance(other, Word) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        body = " ".join(f"{c}.{self.Q.name(e)}" for c, e in self.pairs)
        return f"Word({self.Q.name(self.start)}: {body} | {self.carry})"

    def is_identity(self) -> bool:
        return not self.pairs and self.carry == 0

    # building blocks, all on mutable (pairs list, carry) state
    @staticmethod
    def _push_elem(Q, v, carry, a):
        table, _ = Q.arith(v)
        return table[carry][a]

    @staticmethod
    def _push_edge(Q, pairs, carry, e):
        left, bar_inv, rho = Q.edge_arith(e)
        c = left[carry]
        table, inv = Q.arith(Q.origin(e))
        b = bar_inv[table[inv[c]][carry]]
        if c == 0 and pairs and pairs[-1][1] == Q.reverse(e):
            c_prev, e_prev = pairs.pop()
            ptable, _ = Q.arith(Q.origin(e_prev))
            return ptable[c_prev][rho[b]]
        pairs.append((c, e))
        return rho[b]

    def times_elem(self, a: int) -> "Word":
        return Word(self.Q, self.start, self.pairs, self._push_elem(self.Q, self.end, self.carry, a))

    def times_edge(self, e) -> "Word":
        if self.Q.origin(e) != self.end:
            raise ValueError("edge does not start at the end of the word")
        pairs = list(self.pairs)
        carry = self._push_edge(self.Q, pairs, self.carry, e)
        return Word(self.Q, self.start, pairs, carry)

    def __mul__(self, other: "Word") -> "Word":
        Q = self.Q
        if other.start != self.end:
            raise ValueError("words are not composable")
        pairs = list(self.pairs)
        carry = self.carry
        v = self.end
        for c, e in other.pairs:
            carry = self._push_elem(Q, v, carry, c)
            carry = self._push_edge(Q, pairs, carry, e)
            v = Q.terminus(e)
        carry = self._push_elem(Q, v, carry, other.carry)
        return Word(Q, self.start, pairs, carry)

    def inverse(self) -> "Word":
        Q = self.Q
        v = self.end
        _, inv = Q.arith(v)
        pairs = []
        carry = inv[self.carry]
        for c, e in reversed(self.pairs):
            r = Q.reverse(e)
            carry = self._push_edge(Q, pairs, carry, r)
            v = Q.terminus(r)
            table, inv = Q.arith(v)
            carry = table[carry][inv[c]]
        return Word(Q, self.end, pairs, carry)

    # action on the tree
    def vertex(self) -> tuple:
        """Tree vertex ``word * (lift of start)``; only meaningful at the basepoint."""
        return self.pairs

    def act_vertex(self, x: tuple) -> tuple:
        """Image of the tree vertex ``x`` under this element of the group."""
        return (self * Word(self.Q, self.Q.g.basepoint, x)).pairs

    def act_edge(self, f: tuple) -> tuple:
        x, c, e = f
        w = self * Word(self.Q, self.Q.g.basepoint, x, c)
        left, _, _ = self.Q.edge_arith(e)
        return (w.pairs, left[w.carry], e)


def vertex_end(Q, x: tuple):
    return Q.terminus(x[-1][1]) if x else Q.g.basepoint


def edge_terminus(Q, f: tuple) -> tuple:
    """Terminal vertex of the tree edge ``f = (x, c, e)`` (label arithmetic only)."""
    x, c, e = f
    if c == 0 and x and x[-1][1] == Q.reverse(e):
        return x[:-1]
    return x + ((c, e),)


def edge_reverse(Q, f: tuple) -> tuple:
    """The tree edge ``f`` traversed backwards."""
    x, c, e = f
    if c == 0 and x and x[-1][1] == Q.reverse(e):
        return (x[:-1], x[-1][0], x[-1][1])
    return (x + ((c, e),), 0, Q.reverse(e))


def tree_distance(x: tuple, y: tuple) -> int:
    n = 0
    for a, b in zip(x, y):
        if a != b:
            break
        n += 1
    return len(x) + len(y) - 2 * n


def lift_edge(Q, e) -> tuple:
    """Chosen lift of the quotient edge ``e``: it leaves the lift of ``o(e)`` with label 0."""
    return (Q.lift_pairs(Q.origin(e)), 0, e)


def neighbors(Q, x: tuple, synthetic: bool = False):
    """Tree edges leaving vertex ``x`` in deterministic order."""
    v = vertex_end(Q, x)
    out = []
    for e in sorted(Q.out_edges(v), key=Q.sort_key):
        if not Q.is_explicit(e) and not synthetic:
            raise TruncationError(f"edge {Q.name(e)} lies beyond the explicit ray levels")
        for c in Q.coset_labels(e):
            out.append((x, c, e))
    return out


# balls

@dataclass
class TreeBall:
    """Closed ball of radius ``radius`` about the basepoint lift (vertex 0).

    ``vertices[k]`` is a reduced vertex word; ``parent``/``depth``/``qvertex``
    are parallel lists. ``edges`` lists directed tree edges as
    ``(origin index, terminus index, quotient edge, coset label)`` in both
    orientations.
    """
    Q: object
    radius: int
    vertices: list = field(default_factory=list)
    parent: list = field(default_factory=list)
    depth: list = field(default_factory=list)
    qvertex: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    index: dict = field(default_factory=dict)

    @property
    def basepoint(self) -> int:
        return 0

    def degree(self, k: int) -> int:
        return sum(1 for _ in self.adjacent(k))

    def adjacent(self, k: int):
        if not hasattr(self, "_adj"):
            adj = [[] for _ in self.vertices]
            for o, t, _, _ in self.edges:
                adj[o].append(t)
            self._adj = adj
        return self._adj[k]

    def sphere(self, n: int) -> list[int]:
        return [k for k, d in enumerate(self.depth) if d == n]

    def sphere_sizes(self) -> list[int]:
        return np.bincount(self.depth, minlength=self.radius + 1).tolist()

    def covering_edge(self, k: int):
        """Quotient edge of the tree edge from ``parent[k]`` to ``k``."""
        return self.vertices[k][-1][1] if self.vertices[k] else None

    def to_json(self) -> dict:
        Q = self.Q
        verts = [{"id": k, "depth": self.depth[k], "quotient": Q.name(self.qvertex[k]),
                  "word": [[Q.name(e), c] for c, e in self.vertices[k]]}
                 for k in range(len(self.vertices))]
        edges = [{"from": o, "to": t, "covers": Q.name(e), "coset": c}
                 for o, t, e, c in self.edges]
        return {"radius": self.radius, "vertex_count": len(self.vertices),
                "vertices": verts, "edges": edges}


def expand_ball(g: GraphOfGroups, R: int, synthetic: bool = False) -> TreeBall:
    """Breadth-first expansion of the tree to radius ``R``.

    Entering a ray level whose groups are not explicit raises
    :class:`TruncationError` unless ``synthetic`` is set, in which case the
    cosets there are labelled ``0 .. index-1`` (shape only, no arithmetic).
    """
    if R < 0:
        raise ValueError("radius must be nonnegative")
    Q = g.quotient
    ball = TreeBall(Q, R)
    ball.vertices.append(())
    ball.parent.append(-1)
    ball.depth.append(0)
    ball.qvertex.append(g.basepoint)
    ball.index[()] = 0
    frontier = [0]
    for d in range(R):
        nxt = []
        for k in frontier:
            x = ball.vertices[k]
            for f in neighbors(Q, x, synthetic):
                y = edge_terminus(Q, f)
                if len(y) < len(x):
                    continue
                j = len(ball.vertices)
                ball.vertices.append(y)
                ball.parent.append(k)
                ball.depth.append(d + 1)
                ball.qvertex.append(Q.terminus(f[2]))
                ball.index[y] = j
                ball.edges.append((k, j, f[2], f[1]))
                ball.edges.append((j, k, Q.reverse(f[2]), 0))
                nxt.append(j)
        frontier = nxt
    return ball


# growth

def nb_matrix(g: GraphOfGroups):
    """Non-backtracking multiplicity matrix over the core directed edges.

    ``M[e, e'] = m(t(e), e') - [e' = ebar]`` when ``o(e') = t(e)``.
    """
    Q = g.quotient
    edges = Q.core_edges
    pos = {e: k for k, e in enumerate(edges)}
    M = np.zeros((len(edges), len(edges)), dtype=np.int64)
    for e in edges:
        for f in Q.out_edges(Q.terminus(e)):
            if f in pos:
                M[pos[e], pos[f]] += Q.mult(f) - (f == Q.reverse(e))
    return edges, M


def _bareiss_det(A) -> int:
    """Exact determinant of an integer matrix (fraction-free elimination)."""
    M = [list(map(int, row)) for row in A]
    n = len(M)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if M[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if M[i][k] != 0), None)
            if swap is None:
                return 0
            M[k], M[swap] = M[swap], M[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1]


def perron(M: np.ndarray, tol: float = 1e-12, max_iter: int = 200000):
    """Spectral radius and nonnegative eigenvector of a nonnegative matrix.

    Power iteration on ``M + I`` from the all-ones vector (the shift removes
    periodicity). Returns ``(lam, vec, residual)`` with ``vec`` summing to 1.
    """
    n = M.shape[0]
    A = M.astype(float) + np.eye(n)
    v = np.ones(n) / n
    lam = 0.0
    for _ in range(max_iter):
        w = A @ v
        w /= w.sum()
        if np.abs(w - v).max() < tol * 1e-3:
            v = w
            break
        v = w
    Mv = M @ v
    lam = float(Mv.sum() / v.sum())
    res = float(np.abs(Mv - lam * v).max())
    if res > tol:
        # slow convergence: polish with a dense eigensolver
        vals, vecs = np.linalg.eig(M.astype(float))
        k = int(np.argmax(vals.real))
        lam = float(vals[k].real)
        v = np.abs(vecs[:, k].real)
        v /= v.sum()
        res = float(np.abs(M @ v - lam * v).max())
    return lam, v, res


@dataclass(frozen=True)
class Entropy:
    """``delta = log(base) / root`` when ``exact``; ``value`` always set."""
    value: float
    exact: bool
    base: int | None = None
    root: int | None = None
    residual: float = 0.0
    finite_tree: bool = False

    def label(self) -> str:
        if self.finite_tree:
            return "0"
        if self.exact:
            return f"log({self.base})" + (f"/{self.root}" if self.root != 1 else "")
        return repr(self.value)


def exact_root(M: np.ndarray, lam: float, max_root: int = 6):
    """Find ``(n, p)`` with ``lam**p == n`` certified by ``det(M^p - n I) = 0``."""
    Mi = [list(map(int, r)) for r in M.tolist()]
    P = np.eye(len(Mi), dtype=object)
    Mo = np.array(Mi, dtype=object)
    for p in range(1, max_root + 1):
        P = P.dot(Mo)
        target = lam ** p
        n = round(target)
        if n >= 1 and abs(target - n) < 1e-8 * max(1.0, target):
            D = P - n * np.eye(len(Mi), dtype=object)
            if _bareiss_det(D.tolist()) == 0:
                return n, p
    return None


def volume_entropy(g: GraphOfGroups) -> Entropy:
    """Growth rate of the tree over the core: log of the Perron root of the
    non-backtracking multiplicity matrix."""
    _, M = nb_matrix(g)
    if M.size == 0 or not M.any():
        return Entropy(0.0, True, 1, 1, 0.0, finite_tree=True)
    lam, _, res = perron(M)
    if lam <= 1.0 + 1e-12:
        return Entropy(0.0, True, 1, 1, res, finite_tree=lam < 1.0 - 1e-9)
    ex = exact_root(M, lam)
    if ex is not None:
        n, p = ex
        return Entropy(math.log(n) / p, True, n, p, res)
    return Entropy(math.log(lam), False, residual=res)


def edge_counts(g: GraphOfGroups, R: int) -> list[dict]:
    """``counts[n][e]``: tree edges at distance ``n`` from the basepoint lift
    (pointing away from it) that cover ``e``, for ``n = 1 .. R``. Exact
    integers; rays contribute through their index sequences."""
    Q = g.quotient
    cur = {}
    for e in Q.out_edges(g.basepoint):
        cur[e] = cur.get(e, 0) + Q.mult(e)
    out = [{}, cur]
    for _ in range(R - 1):
        nxt = {}
        for e, k in cur.items():
            rev = Q.reverse(e)
            for f in Q.out_edges(Q.terminus(e)):
                m = Q.mult(f) - (f == rev)
                if m:
                    nxt[f] = nxt.get(f, 0) + k * m
        cur = nxt
        out.append(cur)
    return out[:R + 1]


def sphere_counts(g: GraphOfGroups, R: int) -> list[int]:
    counts = edge_counts(g, R)
    return [1] + [sum(c.values()) for c in counts[1:]]


def ball_counts(g: GraphOfGroups, R: int) -> list[int]:
    out, tot = [], 0
    for s in sphere_counts(g, R):
        tot += s
        out.append(tot)
    return out


def orbit_sphere_counts(g: GraphOfGroups, R: int) -> list[int]:
    """Number of orbit points of the basepoint lift at each distance ``<= R``."""
    Q = g.quotient
    bp = g.basepoint
    counts = edge_counts(g, R)
    return [1] + [sum(k for e, k in c.items() if Q.terminus(e) == bp) for c in counts[1:]]


def poincare_partial(g: GraphOfGroups, s: float, R: int) -> float:
    """``sum_{gamma : d(x0, gamma x0) <= R} exp(-s d(x0, gamma x0))``.

    Each orbit point is reached by ``|G_x0|`` group elements.
    """
    stab = g.vgroup(g.basepoint).order
    terms = [math.exp(math.log(k) - s * n) for n, k in enumerate(orbit_sphere_counts(g, R)) if k]
    return stab * math.fsum(terms)


# length invariants

def branch_segments(g: GraphOfGroups) -> list[int] | None:
    """Lengths of tree segments between consecutive branch vertices.

    ``None`` when no tree vertex has valence at least 3.
    """
    Q = g.quotient
    verts = list(Q.core_vertices) + [("r", r.id, 1) for r in g.rays]
    branch = [v for v in verts if Q.valence(v) >= 3]
    if not branch:
        return None
    lengths = set()
    limit = 2 * len(Q.core_edges) + 4
    for v in branch:
        for e in Q.out_edges(v):
            if not Q.mult(e):
                continue
            n, cur = 1, e
            while n <= limit:
                w = Q.terminus(cur)
                if Q.valence(w) != 2:
                    break
                rev = Q.reverse(cur)
                nxt = [f for f in Q.out_edges(w) if Q.mult(f) - (f == rev) > 0]
                cur = nxt[0]
                n += 1
            if n <= limit and Q.valence(Q.terminus(cur)) >= 3:
                lengths.add(n)
    return sorted(lengths)


@dataclass
class GrowthReport:
    delta_T: float
    delta_label: str
    ball_counts: list
    lam: int | None
    L_bounds: tuple | None
    L_exact: int | None
    elementary: bool
    sandwich_ok: bool | None

    def to_json(self) -> dict:
        return {"delta_T": self.delta_T, "delta_label": self.delta_label,
                "ball_counts": [str(b) if b > 2 ** 53 else b for b in self.ball_counts],
                "Lambda": self.lam, "L_bounds": list(self.L_bounds) if self.L_bounds else None,
                "L_exact": self.L_exact, "elementary": self.elementary,
                "sandwich_ok": self.sandwich_ok}


def length_invariants(g: GraphOfGroups, subshift, R: int = 12) -> GrowthReport:
    """``Lambda`` from branch-vertex distances and ``L`` from the cycle gcd of
    the order-1 subshift; checks ``Lambda | L | 2 Lambda``."""
    ent = volume_entropy(g) if not g.rays else None
    segs = branch_segments(g)
    lam = reduce(math.gcd, segs) if segs else None
    periods = [p for p in subshift.periods if p]
    L = reduce(math.gcd, periods) if periods else None
    ok = None
    if lam is not None and L is not None:
        ok = L % lam == 0 and (2 * lam) % L == 0
    return GrowthReport(
        delta_T=ent.value if ent else float("nan"),
        delta_label=ent.label() if ent else "see measure",
        ball_counts=ball_counts(g, R), lam=lam,
        L_bounds=(lam, 2 * lam) if lam else None, L_exact=L,
        elementary=lam is None, sandwich_ok=ok)
