"""Markov codings of the discrete geodesic flow with their measures.

Two codings are built:

* the return coding: letters are the group elements moving the basepoint
  lift ``x0`` to a first return of its orbit along a geodesic; measures
  come from products of shadow masses seen from ``x0``;
* the cusp coding of a geometrically finite quotient with trivial core
  vertex groups: letters are quotient edges plus, per ray level, the turning
  letters ``(g, +)`` and ``(g, -)`` that turn back down the ray.

Both take their masses from a :class:`~arbocode.ps.PSDensity`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .bass_serre import (Word, edge_reverse, edge_terminus, lift_edge, neighbors,
                         tree_distance, vertex_end)
from .gog import GraphOfGroups, TruncationError
from .ps import BMBox, PSDensity, bm_box_measure, shadow_mass
from .shift import _finish


class CodingError(ValueError):
    """The input does not satisfy the hypotheses of the requested coding."""


def _log(x) -> float:
    return math.log(float(x))


# return coding

@dataclass
class ReturnCoding:
    g: GraphOfGroups
    ps: PSDensity
    radius: int
    stab_order: int                       # |Gamma_x0|
    S: list                               # Words, sorted
    target: list                          # alpha x0 as vertex words
    back: list                            # mu_x0 of the part behind x0
    fwd: list                             # mu_x0 of the shadow beyond alpha x0
    norm: object                          # total mass before normalization
    nu: list = field(default_factory=list)
    succ: list = field(default_factory=list)
    pi: dict = field(default_factory=dict)
    tail_mass_bound: object = 0

    def word_json(self, a) -> dict:
        Q = self.g.quotient
        w = self.S[a]
        return {"pairs": [[c, Q.name(e)] for c, e in w.pairs], "carry": w.carry}


def _first_returns(g, R):
    """Vertex words ``y`` of first returns within distance ``R``; also
    whether the enumeration is complete (no return longer than ``R``)."""
    Q = g.quotient
    bp = g.basepoint
    out, frontier, complete = [], [()], True
    for d in range(R):
        nxt = []
        for x in frontier:
            try:
                nb = neighbors(Q, x)
            except TruncationError:
                complete = False
                continue
            for f in nb:
                y = edge_terminus(Q, f)
                if len(y) < len(x):
                    continue
                if Q.terminus(f[2]) == bp:
                    out.append(y)
                else:
                    nxt.append(y)
        frontier = nxt
    if frontier:
        complete = False
    return out, complete


def _total_return_mass(g, ps):
    """``sum_f s_f (Z - s_f) / |Gamma_x0|`` over the tree edges at ``x0``."""
    Q = g.quotient
    Z = ps.total(g.basepoint)
    tot = ps.r * 0
    for e in Q.out_edges(g.basepoint):
        s = ps.s(e)
        tot += Q.mult(e) * s * (Z - s)
    return tot / Q.vertex_group(g.basepoint).order


def build_return_coding(g: GraphOfGroups, ps: PSDensity, R: int) -> ReturnCoding:
    Q = g.quotient
    bp = g.basepoint
    if Q.valence(bp) < 2:
        raise CodingError("the basepoint is not in the minimal subtree")
    ys, complete = _first_returns(g, R)
    if not ys:
        raise CodingError(f"no return of the basepoint orbit within radius {R}")
    G = Q.vertex_group(bp)
    n = G.order
    S, target, back, fwd = [], [], [], []
    Z = ps.total(bp)
    for y in sorted(ys, key=lambda y: (len(y), repr(y))):
        f1 = ((), y[0][0], y[0][1])
        last = (y[:-1], y[-1][0], y[-1][1])
        b = shadow_mass(ps, (), edge_reverse(Q, f1))
        fm = shadow_mass(ps, (), last)
        for h in range(n):
            S.append(Word(Q, bp, y, h))
            target.append(y)
            back.append(b)
            fwd.append(fm)
    norm = _total_return_mass(g, ps)
    rc = ReturnCoding(g, ps, R, n, S, target, back, fwd, norm)
    rc._complete = complete
    rc.nu = [b * f / (n * n) / norm for b, f in zip(back, fwd)]
    # transitions: [x0, a x0] u [a x0, a b x0] geodesic
    for a, wa in enumerate(S):
        row = []
        for b, wb in enumerate(S):
            z = (wa * wb).pairs
            if len(z) == len(target[a]) + len(target[b]):
                row.append(b)
                last = (z[:-1], z[-1][0], z[-1][1])
                rc.pi[(a, b)] = shadow_mass(ps, (), last) / (n * fwd[a])
        rc.succ.append(row)
    rc.tail_mass_bound = 1 - sum(rc.nu, ps.r * 0)
    return rc


def path_stabilizer_order(g, y) -> int:
    """``|Gamma_[x0, y]|``: elements of the basepoint group fixing ``y``."""
    Q = g.quotient
    bp = g.basepoint
    return sum(1 for h in range(Q.vertex_group(bp).order)
               if Word(Q, bp, (), h).act_vertex(y) == y)


def check_return_identities(rc: ReturnCoding, max_len: int = 3, limit: int = 3000) -> dict:
    """Stochasticity, stationarity and the cylinder pushforward identity.

    The cylinder side uses a Bowen-Margulis box through ``x0`` whose past
    shadow is the union of the shadows of the other edges at ``x0``.
    """
    g, ps, Q = rc.g, rc.ps, rc.g.quotient
    zero = ps.r * 0
    n = rc.stab_order
    m = len(rc.S)
    exact = ps.exact
    full = [a for a in range(m) if rc._complete or
            len(rc.target[a]) + max(len(y) for y in rc.target) <= rc.radius]
    fullset = set(full)
    row_res = max((abs(float(sum((rc.pi[(a, b)] for b in rc.succ[a]), zero) - 1))
                   for a in full), default=0.0)
    # truncated rows lose exactly the successors beyond the radius
    deficit = [1 - sum((rc.pi[(a, b)] for b in rc.succ[a]), zero) for a in range(m)]
    preds = [[] for _ in range(m)]
    for a in range(m):
        for b in rc.succ[a]:
            preds[b].append(a)
    stat_rows = [b for b in range(m) if all(a in fullset for a in preds[b]) and rc._complete]
    stat_res = max((abs(float(sum((rc.nu[a] * rc.pi[(a, b)] for a in preds[b]), zero) - rc.nu[b]))
                    for b in stat_rows), default=0.0)
    # cylinders
    cyl = [(a,) for a in range(m)]
    level = list(cyl)
    for _ in range(max_len - 1):
        level = [c + (b,) for c in level for b in rc.succ[c[-1]]]
        cyl += level
        if len(cyl) > limit:
            break
    cyl = cyl[:limit]
    mismatches, worst = 0, 0.0
    for c in cyl:
        lhs, rhs = _cylinder_sides(rc, c)
        if lhs != rhs:
            worst = max(worst, abs(float(lhs - rhs)))
            if exact or abs(float(lhs - rhs)) > 1e-12:
                mismatches += 1
    total = sum(rc.nu, zero)
    return {"letters": m, "sum_nu": total if exact else float(total),
            "tail_mass_bound": rc.tail_mass_bound, "complete": rc._complete,
            "row_sum_residual": row_res, "rows_checked": len(full),
            "row_deficit_min": float(min(deficit)), "row_deficit_max": float(max(deficit)),
            "stationarity_residual": stat_res, "columns_checked": len(stat_rows),
            "cylinders_checked": len(cyl), "cylinder_mismatches": mismatches,
            "cylinder_worst": worst, "normalization": rc.norm}


def _cylinder_sides(rc, c):
    g, ps, Q = rc.g, rc.ps, rc.g.quotient
    n = rc.stab_order
    w = rc.S[c[0]]
    for b in c[1:]:
        w = w * rc.S[b]
    z = w.pairs
    stab = path_stabilizer_order(g, z)
    N = Fraction(n ** (len(c) + 1), stab)
    lhs = N * rc.nu[c[0]]
    for a, b in zip(c, c[1:]):
        lhs *= rc.pi[(a, b)]
    # independent side: box through x0
    y1 = rc.target[c[0]]
    first = ((), y1[0][0], y1[0][1])
    minus = [f for f in neighbors(Q, (), synthetic=True) if f != first]
    plus = [(z[:-1], z[-1][0], z[-1][1])]
    rhs = bm_box_measure(ps, BMBox(minus, plus, ())) / (stab * rc.norm)
    if not ps.exact:
        lhs, rhs = float(lhs), float(rhs)
    return lhs, rhs


def return_spec(rc: ReturnCoding):
    return _finish(1, list(range(len(rc.S))), [sorted(s) for s in rc.succ])


# cusp coding

@dataclass
class GFCoding:
    g: GraphOfGroups
    ps: PSDensity
    level: int
    turn: str                                   # "inverse" or "geometric"
    alphabet: list
    index: dict
    succ: list
    nu: list
    pi: dict
    total: object                               # BM mass before normalization
    bar: dict = field(default_factory=dict)

    def letter_name(self, a) -> str:
        Q = self.g.quotient
        kind = a[0]
        if kind == "e":
            return a[1]
        if kind in ("a", "ab"):
            return f"{'a' if kind == 'a' else 'abar'}[{a[1]},{a[2]}]"
        return f"({a[3]},{'+' if kind == '+' else '-'})[{a[1]},{a[2]}]"

    def allowed(self, a, b) -> bool:
        return self.index[b] in self._succ_sets[self.index[a]]

    @property
    def _succ_sets(self):
        if not hasattr(self, "_ss"):
            self._ss = [set(s) for s in self.succ]
        return self._ss

    def full_rows(self) -> list[int]:
        """Letters whose successors all belong to the retained alphabet."""
        out = []
        for k, a in enumerate(self.alphabet):
            if a[0] == "a" and a[2] == self.level:
                continue
            out.append(k)
        return out

    def spec(self):
        return _finish(1, list(range(len(self.alphabet))), [sorted(s) for s in self.succ])


class _RayLabels:
    """Coset labels at ray level ``n``: ``(g, +)`` uses left cosets of
    ``P_n`` in ``P_{n+1}``, ``(g, -)`` right cosets. Past the explicit levels
    an abelian ``Z/q`` model labels the cosets ``1 .. q-1``."""

    def __init__(self, Q, i, n):
        self.Q, self.i, self.n = Q, i, n
        self.explicit = n + 1 <= Q.explicit_depth(i)
        self.q = Q.index(i, n + 1)
        if self.explicit:
            v = ("r", i, n + 1)
            self.table, self.inv = Q.arith(v)
            img = Q.edge_image(("dn", i, n))
            self.left = img.left_rep.tolist()
            self.right = img.right_rep.tolist()

    def plus(self) -> list:
        if not self.explicit:
            return list(range(1, self.q))
        return sorted(set(self.left) - {0})

    def minus(self) -> list:
        if not self.explicit:
            return list(range(1, self.q))
        return sorted(set(self.right) - {0})

    def inv_plus_to_minus(self, g) -> int:
        if not self.explicit:
            return (-g) % self.q
        return self.right[self.inv[g]]

    def inv_minus_to_plus(self, h) -> int:
        if not self.explicit:
            return (-h) % self.q
        return self.left[self.inv[h]]

    def same_plus_to_minus(self, g) -> int:
        return g if not self.explicit else self.right[g]

    def relative(self, c_in, c_out) -> int:
        """``c_in^-1 c_out`` as a group element (or residue)."""
        if not self.explicit:
            return (c_out - c_in) % self.q
        return self.table[self.inv[c_in]][c_out]

    def as_plus(self, x) -> int:
        return x if not self.explicit else self.left[x]

    def as_minus(self, x) -> int:
        return x if not self.explicit else self.right[x]


def _bar_letter(Q, labels, a):
    """The letter read when the edge of ``a`` is crossed backwards."""
    k = a[0]
    if k == "e":
        return ("e", Q.reverse(a[1]))
    if k in ("a", "ab"):
        return ("ab" if k == "a" else "a", a[1], a[2])
    lab = labels.get((a[1], a[2])) or _RayLabels(Q, a[1], a[2])
    if k == "+":
        return ("-", a[1], a[2], lab.inv_plus_to_minus(a[3]))
    return ("+", a[1], a[2], lab.inv_minus_to_plus(a[3]))


def _check_gf_input(g):
    Q = g.quotient
    bad = [v for v in Q.core_vertices if Q.vertex_group(v).order != 1]
    if bad:
        raise CodingError(
            "core vertex groups must be trivial for the cusp coding (nontrivial at "
            + ", ".join(bad) + "); pass to a finite-index subgroup whose core "
            "stabilizers are trivial first")
    for ray in g.rays:
        if not ray.explicit:
            raise CodingError(f"ray {ray.id} records orders only")


def gf_level_for_tail(g: GraphOfGroups, ps: PSDensity, tol: float = 1e-6,
                      max_level: int = 400) -> int:
    """Smallest cusp level whose entropy tail bound is below ``tol``."""
    for L in range(0, max_level):
        if _entropy_tail(g, ps, L) < tol:
            return L
    raise CodingError("entropy tail does not fall below the tolerance")


def build_gf_coding(g: GraphOfGroups, ps: PSDensity, L: int, turn: str = "inverse") -> GFCoding:
    """Cusp coding through ray level ``L``.

    ``turn`` selects the successor of ``(g, +)``: ``"inverse"`` uses
    ``(g^-1, -)`` and ``"geometric"`` uses ``(g, -)``, the letter a geodesic
    actually reads after turning. They agree on rays whose
    level groups have exponent 2.
    """
    if turn not in ("inverse", "geometric"):
        raise ValueError("turn must be 'inverse' or 'geometric'")
    _check_gf_input(g)
    Q = g.quotient
    r = ps.r
    rays = sorted(g.rays, key=lambda ray: ray.id)
    labels = {(ray.id, n): _RayLabels(Q, ray.id, n) for ray in rays for n in range(L + 1)}
    alphabet = [("e", e) for e in Q.core_edges]
    for ray in rays:
        i = ray.id
        for n in range(L + 1):
            lab = labels[(i, n)]
            alphabet.append(("a", i, n))
            alphabet += [("+", i, n, x) for x in lab.plus()]
            alphabet.append(("ab", i, n))
            alphabet += [("-", i, n, x) for x in lab.minus()]
    index = {a: k for k, a in enumerate(alphabet)}

    # masses: P = past, F = future, both seen from the origin of l_0
    W = {ray.id: ps.total(ray.attach) - ps.s(("up", ray.id, 0)) for ray in rays}

    def U(i, n):
        return ps.s(("up", i, n))

    def D(i, n):
        return ps.s(("dn", i, n))

    def future(a):
        k = a[0]
        if k == "e":
            return ps.s(a[1])
        i, n = a[1], a[2]
        if k == "a":
            return r * U(i, n + 1)
        if k == "+":
            return r * D(i, n)
        return r ** (n + 1) * W[i]

    def past(a):
        k = a[0]
        if k == "e":
            e = a[1]
            return ps.total(Q.origin(e)) - ps.s(e)
        i, n = a[1], a[2]
        if k in ("a", "+"):
            return r ** n * W[i]
        return U(i, n + 1) if k == "ab" else D(i, n)

    total = _gf_total(g, ps)
    nu = [past(a) * future(a) / total for a in alphabet]

    # transitions, including the move from one cusp straight into another
    at = {}
    for ray in rays:
        at.setdefault(ray.attach, []).append(ray.id)

    def exits(v, skip=None):
        """Exit letters leaving the core vertex ``v`` (minus ``a_skip,0``)."""
        out = [("e", e) for e in Q.out_edges(v) if isinstance(e, str)]
        out += [("a", j, 0) for j in at.get(v, []) if j != skip]
        return out

    def turns(v, skip=None):
        return [("+", j, 0, x) for j in at.get(v, []) if j != skip
                for x in labels[(j, 0)].plus()]

    succ = []
    for a in alphabet:
        k = a[0]
        out = []
        if k == "e":
            e = a[1]
            v = Q.terminus(e)
            out = [b for b in exits(v) if not (b[0] == "e" and b[1] == Q.reverse(e))]
            out += turns(v)
        elif k == "a":
            i, n = a[1], a[2]
            if n + 1 <= L:
                out = [("a", i, n + 1)] + [("+", i, n + 1, x) for x in labels[(i, n + 1)].plus()]
        elif k == "+":
            i, n, x = a[1], a[2], a[3]
            lab = labels[(i, n)]
            y = lab.inv_plus_to_minus(x) if turn == "inverse" else lab.same_plus_to_minus(x)
            out = [("-", i, n, y)]
        else:
            i, n = a[1], a[2]
            if n >= 1:
                out = [("ab", i, n - 1)]
            else:
                u = g.ray(i).attach
                out = exits(u, skip=i) + turns(u, skip=i)
        succ.append(sorted(index[b] for b in out))

    pi = {}
    for ka, a in enumerate(alphabet):
        k = a[0]
        for kb in succ[ka]:
            b = alphabet[kb]
            if k == "+" or (k in ("ab", "-") and a[2] >= 1):
                val = r * 0 + 1
            elif k in ("ab", "-"):
                val = future(b) / W[a[1]]
            else:
                val = r * future(b) / future(a)
            pi[(ka, kb)] = val

    bar = {a: _bar_letter(Q, labels, a) for a in alphabet}
    gf = GFCoding(g, ps, L, turn, alphabet, index, succ, nu, pi, total, bar)
    gf._labels = labels
    return gf


def _ray_series(ps, i):
    """``sum_{n >= 0} r^n U_n`` for ray ``i`` in closed form."""
    U, D, q = ps.rays[i]
    r = ps.r
    N0 = len(D) - 1
    head = sum((r ** n * U[n] for n in range(N0)), r * 0)
    rho = r * r * q
    c = r * (q - 1) / (1 - rho)
    return head + c * D[N0] * r ** N0 / (1 - rho)


def _gf_total(g, ps):
    Q = g.quotient
    tot = ps.r * 0
    for e in Q.core_edges:
        s = ps.s(e)
        tot += (ps.total(Q.origin(e)) - s) * s
    for ray in g.rays:
        W = ps.total(ray.attach) - ps.s(("up", ray.id, 0))
        tot += 2 * W * _ray_series(ps, ray.id)
    return tot


def _level_mass(g, ps, i, n, total):
    """Mass of all letters of ray ``i`` at level ``n`` (both directions)."""
    ray = g.ray(i)
    W = ps.total(ray.attach) - ps.s(("up", i, 0))
    return float(2 * ps.r ** n * W * ps.s(("up", i, n)) / total)


def _entropy_tail(g, ps, L) -> float:
    """Upper bound for ``-sum nu log nu`` over letters above level ``L``.

    A level carrying mass ``m`` on ``k`` letters contributes at most
    ``m log(k / m)``. Past the explicit levels ``m_n = K rho^j`` with
    ``rho = r^2 q`` and the sum is a closed-form series.
    """
    if not g.rays:
        return 0.0
    total = _gf_total(g, ps)
    out = 0.0
    r = float(ps.r)
    Q = g.quotient
    for ray in g.rays:
        i = ray.id
        U, D, q = ps.rays[i]
        N0 = len(D) - 1
        start = L + 1
        for n in range(start, max(start, N0)):
            m = _level_mass(g, ps, i, n, total)
            k = 2 * Q.index(i, n + 1)
            out += m * math.log(k / m)
        j0 = max(start, N0) - N0
        K = _level_mass(g, ps, i, N0, total)
        rho = r * r * q
        k = 2 * q
        s0 = rho ** j0 / (1 - rho)
        s1 = rho ** j0 * (j0 * (1 - rho) + rho) / (1 - rho) ** 2
        out += K * ((math.log(k) - math.log(K)) * s0 - math.log(rho) * s1)
    return out


def entropy_hP(gf: GFCoding) -> tuple[float, float]:
    """Entropy of the partition: retained value and an upper bound on the rest."""
    val = -sum(float(x) * _log(x) for x in gf.nu if x > 0)
    return val, _entropy_tail(gf.g, gf.ps, gf.level)


def chain_entropy_rate(nu, succ, pi, rows) -> float:
    """``-sum nu_a pi_ab log pi_ab`` over the given rows."""
    out = 0.0
    for a in rows:
        for b in succ[a]:
            p = pi[(a, b)]
            if p > 0:
                out -= float(nu[a]) * float(p) * _log(p)
    return out


def gf_identities(gf: GFCoding) -> dict:
    """Row sums on full rows, stationarity on fully fed columns, positivity."""
    zero = gf.ps.r * 0
    full = gf.full_rows()
    rows = max((abs(float(sum((gf.pi[(a, b)] for b in gf.succ[a]), zero) - 1)) for a in full),
               default=0.0)
    preds = [[] for _ in gf.alphabet]
    for a, s in enumerate(gf.succ):
        for b in s:
            preds[b].append(a)
    fullset = set(full)
    fed = [b for b, p in enumerate(preds) if p and all(a in fullset for a in p)
           and not (gf.alphabet[b][0] == "ab" and gf.alphabet[b][2] == gf.level)]
    stat = max((abs(float(sum((gf.nu[a] * gf.pi[(a, b)] for a in preds[b]), zero) - gf.nu[b]))
                for b in fed), default=0.0)
    mass = sum(gf.nu, zero)
    h, tail = entropy_hP(gf)
    return {"letters": len(gf.alphabet), "row_sum_residual": rows, "rows_checked": len(full),
            "stationarity_residual": stat, "columns_checked": len(fed),
            "positive": all(x > 0 for x in gf.nu), "retained_mass": mass,
            "retained_mass_float": float(mass), "entropy": h, "entropy_tail_bound": tail,
            "admissibility_kappa": kappa_preserves_admissibility(gf)}


def kappa_preserves_admissibility(gf: GFCoding) -> bool:
    """``A[a, b] = 1`` implies ``A[bar b, bar a] = 1`` wherever both are retained."""
    for ka, s in enumerate(gf.succ):
        a = gf.alphabet[ka]
        for kb in s:
            b = gf.alphabet[kb]
            bb, ba = gf.bar[b], gf.bar[a]
            if bb in gf.index and ba in gf.index and not gf.allowed(bb, ba):
                return False
    return True


# reading letters off tree paths

def _ray_level(Q, e):
    return None if isinstance(e, str) else e


def read_letters(gf: GFCoding, path: list) -> list:
    """Letters of the cusp coding along a geodesic path of tree edges.

    Entry ``t`` is ``None`` where the window lacks the context needed to
    decide (the first edge when it descends, the last when it ascends).
    """
    Q = gf.g.quotient
    out = []
    for t, f in enumerate(path):
        e = f[2]
        if isinstance(e, str):
            out.append(("e", e))
            continue
        kind, i, n = e
        lab = gf._labels.get((i, n)) or _RayLabels(Q, i, n)
        if kind == "up":
            if t + 1 >= len(path):
                out.append(None)
                continue
            nxt = path[t + 1][2]
            if nxt == ("up", i, n + 1):
                out.append(("a", i, n))
            else:
                c_in = edge_reverse(Q, f)[1]
                c_out = path[t + 1][1]
                out.append(("+", i, n, lab.as_plus(lab.relative(c_in, c_out))))
        else:
            if t == 0:
                out.append(None)
                continue
            prev = path[t - 1]
            if prev[2] == ("dn", i, n + 1):
                out.append(("ab", i, n))
            else:
                c_in = edge_reverse(Q, prev)[1]
                out.append(("-", i, n, lab.as_minus(lab.relative(c_in, f[1]))))
    return out


def kappa_check(gf: GFCoding, paths: list) -> dict:
    """Reading a reversed path gives the barred letters in reverse order,
    and consecutive letters are admissible."""
    Q = gf.g.quotient
    ok_rev, ok_adm, n_letters = 0, 0, 0
    bad_adm = []
    for p in paths:
        fw = read_letters(gf, p)
        rv = read_letters(gf, [edge_reverse(Q, f) for f in reversed(p)])
        m = len(p)
        good = all(fw[t] is None or rv[m - 1 - t] is None
                   or rv[m - 1 - t] == _bar_letter(Q, gf._labels, fw[t])
                   for t in range(m))
        ok_rev += good
        pairs = [(a, b) for a, b in zip(fw, fw[1:]) if a is not None and b is not None
                 and a in gf.index and b in gf.index]
        adm = all(gf.allowed(a, b) for a, b in pairs)
        ok_adm += adm
        if not adm:
            bad_adm.append([(gf.letter_name(a), gf.letter_name(b)) for a, b in pairs
                            if not gf.allowed(a, b)][0])
        n_letters += m
    return {"paths": len(paths), "reversal_ok": ok_rev, "admissible": ok_adm,
            "first_violation": bad_adm[0] if bad_adm else None}


def random_geodesic(g: GraphOfGroups, length: int, rng, start: tuple = (),
                    exit_rays: bool = True) -> list:
    """Non-backtracking random tree path of the given length from ``start``.

    Ray levels past the explicit groups are never entered. With
    ``exit_rays`` the path is extended until it ends on a core vertex.
    """
    Q = g.quotient
    x, prev = start, None
    path = []
    while len(path) < length or (exit_rays and not isinstance(vertex_end(Q, x), str)):
        opts = []
        for f in neighbors(Q, x, synthetic=True):
            if prev is not None and f == edge_reverse(Q, prev):
                continue
            e = f[2]
            if not isinstance(e, str) and e[0] == "up" and e[2] + 1 >= Q.explicit_depth(e[1]):
                continue
            opts.append(f)
        if exit_rays and len(path) >= length:
            down = [f for f in opts if not isinstance(f[2], str) and f[2][0] == "dn"]
            opts = down or opts
        f = opts[int(rng.integers(len(opts)))]
        path.append(f)
        prev = f
        x = edge_terminus(Q, f)
    return path


def _ell0(Q, a):
    """Chosen lift of the quotient edge underlying the letter ``a``."""
    if a[0] == "e":
        return lift_edge(Q, a[1])
    i, n = a[1], a[2]
    return lift_edge(Q, ("up", i, n) if a[0] in ("a", "+") else ("dn", i, n))


def cylinder_masses(gf: GFCoding, past: list, beta=None):
    """Bowen-Margulis masses of ``F_k`` and ``F'_k`` by enumeration.

    ``past = [a_{-k}, ..., a_0]``. Geodesic windows through a fixed lift of
    ``a_0`` are enumerated in the tree, letters are read off the windows
    and each matching window contributes the product of its past and future
    shadow masses seen from ``o(l_0)``. Returns ``(m(F_k), m(F'_k))``.
    """
    Q = gf.g.quotient
    ps = gf.ps
    k = len(past) - 1
    l0 = _ell0(Q, past[-1])
    u = l0[0]
    backs = [[l0]]
    for _ in range(k + 1):
        nxt = []
        for p in backs:
            v = p[0][0]
            for f in neighbors(Q, v, synthetic=True):
                if f == p[0]:
                    continue
                nxt.append([edge_reverse(Q, f)] + p)
        backs = nxt
    fronts = [[]]
    for _ in range(2):
        nxt = []
        for p in fronts:
            last = p[-1] if p else l0
            y = edge_terminus(Q, last)
            for f in neighbors(Q, y, synthetic=True):
                if f == edge_reverse(Q, last):
                    continue
                nxt.append(p + [f])
        fronts = nxt
    zero = ps.r * 0
    mF, mF2 = zero, zero
    for b in backs:
        pm = shadow_mass(ps, u, edge_reverse(Q, b[0]))
        for fr in fronts:
            path = b + fr
            lets = read_letters(gf, path)
            # times -k .. 1 sit at positions 1 .. k+2
            if lets[1:k + 2] != list(past):
                continue
            w = pm * shadow_mass(ps, u, fr[-1])
            mF += w
            if beta is not None and lets[k + 2] == beta:
                mF2 += w
    return mF, mF2


def markov_ratio_check(gf: GFCoding, past: list, beta, kmax: int = 4) -> dict:
    """``m(F'_k) / m(F_k)`` for ``k = 0 .. kmax`` against ``pi[a_0, beta]``."""
    ratios = []
    for k in range(min(kmax, len(past) - 1) + 1):
        mF, mF2 = cylinder_masses(gf, past[len(past) - 1 - k:], beta)
        ratios.append(mF2 / mF if mF else None)
    target = gf.pi.get((gf.index[past[-1]], gf.index[beta]), 0)
    return {"ratios": ratios, "pi": target,
            "constant": len({str(x) for x in ratios}) == 1,
            "matches_pi": all(x == target for x in ratios)}


# verdicts

@dataclass
class Verdict:
    period: int | None
    mixing: bool
    L_exact: int | None
    bernoulli_claim: str
    classes: list = field(default_factory=list)
    checklist: dict = field(default_factory=dict)
    two_step: dict | None = None
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = {"period": self.period, "mixing": self.mixing, "L_exact": self.L_exact,
               "bernoulli_claim": self.bernoulli_claim, "classes": self.classes,
               "hypotheses": self.checklist, "notes": self.notes}
        if self.two_step is not None:
            out["two_step"] = self.two_step
        return out


def two_step_spec(spec):
    """Letters are admissible pairs ``(a, b)``; ``(a, b) -> (c, d)`` when ``b -> c``,
    so one step of the new shift is two steps of the old one."""
    pairs = spec.pairs()
    idx = {p: k for k, p in enumerate(pairs)}
    by_first = {}
    for p in pairs:
        by_first.setdefault(p[0], []).append(idx[p])
    succ = [sorted(k for c in spec.succ[b] for k in by_first.get(c, [])) for (_, b) in pairs]
    return _finish(2, pairs, succ)


def elliptic_growth(g: GraphOfGroups) -> float:
    """Log growth rate of paths with nontrivial pointwise stabilizer.

    Fixed subtrees of elliptic elements grow at most this fast, so when it
    is below the critical exponent the Patterson-Sullivan measure does not
    charge their boundaries.
    """
    import numpy as np

    from .acyl import _moves, _step
    from .shift import coded_edges
    Q = g.quotient
    edges = set(coded_edges(g))
    states = {}
    todo = []
    for e in edges:
        s = (e, tuple(range(Q.edge_group(e).order)))
        if len(s[1]) > 1:
            states[s] = len(states)
            todo.append(s)
    trans = []
    for s in todo:
        e, H = s
        for f, c in _moves(g, e, edges):
            H2 = _step(g, e, H, f, c)
            if len(H2) > 1:
                t = (f, H2)
                if t not in states:
                    states[t] = len(states)
                    todo.append(t)
                trans.append((states[s], states[t]))
    if not states:
        return -math.inf
    M = np.zeros((len(states), len(states)))
    for a, b in trans:
        M[a, b] += 1
    rho = float(np.max(np.abs(np.linalg.eigvals(M))))
    return math.log(rho) if rho > 1e-12 else -math.inf


def hypothesis_checklist(g: GraphOfGroups, ps: PSDensity | None) -> dict:
    from .gog import lift_valence
    Q = g.quotient
    vals = {v: lift_valence(g, v) for v in Q.core_vertices}
    for ray in g.rays:
        vals[Q.name(("r", ray.id, 1))] = Q.valence(("r", ray.id, 1))
    eg = elliptic_growth(g)
    return {
        "geometrically_finite": True,
        "uniform_minimal_tree": all(v >= 2 for v in vals.values()) and not g.rays,
        "minimal_tree": all(v >= 2 for v in vals.values()),
        "valence_two_vertices": sorted(v for v, d in vals.items() if d == 2),
        "trivial_core_stabilizers": all(Q.vertex_group(v).order == 1 for v in Q.core_vertices),
        "elliptic_growth": eg,
        "elliptic_fixed_sets_null": ps is not None and eg < ps.delta,
        "critical_exponent": None if ps is None else ps.delta,
    }


def verdict(g: GraphOfGroups, spec, ps: PSDensity | None = None, L_exact=None) -> Verdict:
    """Mixing and Bernoulli verdict from the period of a coding's transition graph.

    ``spec`` is any object with ``components``/``periods``/``pairs`` (a
    :class:`~arbocode.shift.SubshiftSpec`, or ``coding.spec()``).
    """
    checks = hypothesis_checklist(g, ps)
    classes = [{"size": len(c), "period": p} for c, p in zip(spec.components, spec.periods)]
    notes = []
    if checks["valence_two_vertices"]:
        notes.append("vertices of valence 2 are present: "
                     + ", ".join(checks["valence_two_vertices"]))
    if not spec.components:
        return Verdict(None, False, L_exact, "not_applicable", classes, checks,
                       notes=notes + ["no recurrent class"])
    if len(spec.components) > 1:
        notes.append(f"{len(spec.components)} recurrent classes; reported per class")
    period = spec.periods[0] if len(set(spec.periods)) == 1 else None
    mixing = period == 1
    if ps is None or not checks["elliptic_fixed_sets_null"]:
        claim = "not_applicable"
        notes.append("the measure may charge fixed sets of elliptic elements "
                     "(or no finite critical exponent)")
    elif len(spec.components) > 1:
        claim = "not_applicable"
    elif mixing:
        claim = "bernoulli_finite_entropy"
    elif period == 2:
        claim = "square_bernoulli_on_even_part"
    else:
        claim = "not_applicable"
        notes.append(f"period {period} is neither 1 nor 2")
    two = None
    if period == 2:
        ts = two_step_spec(spec)
        two = {"letters": len(ts.alphabet), "classes": len(ts.components),
               "periods": ts.periods, "aperiodic": all(p == 1 for p in ts.periods)}
    return Verdict(period, mixing, L_exact, claim, classes, checks, two, notes)
