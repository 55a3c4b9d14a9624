"""Patterson-Sullivan edge-shadow densities, Busemann/visual geometry,
Bowen-Margulis boxes and cusp counting.

For a directed quotient edge ``e`` the shadow mass ``s(e)`` is the measure,
seen from the origin of a lift, of the boundary points beyond that lift.
Conformality gives, with ``r = exp(-delta)``,

    s(e) = r * sum_{e' : o(e') = t(e)} (m(t(e), e') - [e' = ebar]) s(e').

On ray ``i`` write ``U_n = s(a_n)`` (up from level ``n``) and ``D_n = s(abar_n)``
(down to level ``n``). Then ``D_n = r q_n D_{n-1}`` and
``U_n = r (U_{n+1} + (q_{n+1} - 1) D_n)``, with ``D_0 = r (Z_u - U_0)``.
Past the explicit levels the index is constant and both are geometric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bass_serre import tree_distance, vertex_end
from .gog import GraphOfGroups, ray_log_indices


class ExponentError(ValueError):
    """The critical exponent cannot be computed (elementary or unbounded)."""


# ray recursions

def _ray_indices(Q, i) -> list:
    r = Q.rays[i]
    if not r.explicit:
        raise ExponentError(f"ray {i} records orders only; see exponent_lower_bounds")
    return [Q.index(i, n) for n in range(1, Q.explicit_depth(i) + 1)]


def ray_profile(q_list, q_tail, r):
    """``(U, D)`` lists for ``n = 0 .. len(q_list)`` with ``D_0 = 1``.

    Works for floats and Fractions alike; needs ``r*r*q_tail < 1``.
    """
    N0 = len(q_list)
    D = [r * 0 + 1]
    for n in range(1, N0 + 1):
        D.append(r * q_list[n - 1] * D[-1])
    U = [None] * (N0 + 1)
    U[N0] = r * (q_tail - 1) * D[N0] / (1 - r * r * q_tail)
    for n in range(N0 - 1, -1, -1):
        U[n] = r * (U[n + 1] + (q_list[n] - 1) * D[n])
    return U, D


def _beta(Q, i, r):
    """Fraction of the attach-vertex mass that goes up ray ``i``."""
    U, _ = ray_profile(_ray_indices(Q, i), Q.rays[i].tail_index, r)
    kr = U[0] * r
    return kr / (1 + kr)


def _core_matrix(g, r):
    """``r F(r)`` over core edges; also returns the per-vertex ray share."""
    Q = g.quotient
    edges = Q.core_edges
    pos = {e: k for k, e in enumerate(edges)}
    share = {}
    for v in Q.core_vertices:
        b = sum((_beta(Q, ray.id, r) for ray in g.rays if ray.attach == v), r * 0)
        share[v] = b
    n = len(edges)
    exact = isinstance(r, Fraction)
    M = [[r * 0] * n for _ in range(n)] if exact else np.zeros((n, n))
    for e in edges:
        v = Q.terminus(e)
        gam = share[v] / (1 - share[v])
        for f in Q.out_edges(v):
            if f in pos:
                val = Q.mult(f) * (1 + gam) - (f == Q.reverse(e))
                M[pos[e]][pos[f]] += r * val
    return edges, M, share


def _rmax(g):
    caps = [1.0]
    for ray in g.rays:
        caps.append(1.0 / math.sqrt(ray.tail_index))
    return min(caps)


def _phi(g, r):
    """Monotone function of ``r`` whose crossing of 1 defines ``exp(-delta)``."""
    Q = g.quotient
    if not Q.core_edges:
        v = g.basepoint
        return sum(_beta(Q, ray.id, r) for ray in g.rays if ray.attach == v)
    _, M, share = _core_matrix(g, r)
    if any(s >= 1 for s in share.values()):
        return math.inf
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def _exact_phi_zero(g, r: Fraction) -> bool:
    Q = g.quotient
    if not Q.core_edges:
        return _phi(g, r) == 1
    _, M, share = _core_matrix(g, r)
    if any(s >= 1 for s in share.values()):
        return False
    n = len(M)
    A = [[(1 if i == j else 0) - M[i][j] for j in range(n)] for i in range(n)]
    return _frac_det(A) == 0


def _frac_det(A) -> Fraction:
    A = [row[:] for row in A]
    n = len(A)
    det = Fraction(1)
    for k in range(n):
        p = next((i for i in range(k, n) if A[i][k] != 0), None)
        if p is None:
            return Fraction(0)
        if p != k:
            A[k], A[p] = A[p], A[k]
            det = -det
        det *= A[k][k]
        for i in range(k + 1, n):
            f = A[i][k] / A[k][k]
            if f:
                for j in range(k, n):
                    A[i][j] -= f * A[k][j]
    return det


def _frac_null(A):
    """A nonzero null vector of a singular Fraction matrix."""
    A = [row[:] for row in A]
    n = len(A)
    piv_cols, row = [], 0
    for col in range(n):
        p = next((i for i in range(row, n) if A[i][col] != 0), None)
        if p is None:
            continue
        A[row], A[p] = A[p], A[row]
        pv = A[row][col]
        A[row] = [x / pv for x in A[row]]
        for i in range(n):
            if i != row and A[i][col] != 0:
                f = A[i][col]
                A[i] = [a - f * b for a, b in zip(A[i], A[row])]
        piv_cols.append(col)
        row += 1
    free = next(c for c in range(n) if c not in piv_cols)
    x = [Fraction(0)] * n
    x[free] = Fraction(1)
    for i, col in enumerate(piv_cols):
        x[col] = -A[i][free]
    return x


# the density

@dataclass
class PSDensity:
    g: GraphOfGroups
    delta: float
    r: object                      # Fraction when exact, else float
    exact: bool
    shadow: dict                   # core edge -> s(e)
    Z: dict                        # core vertex -> total mass
    rays: dict = field(default_factory=dict)   # id -> (U list, D list, q_tail)

    def _ray(self, i, n):
        U, D, q = self.rays[i]
        N0 = len(D) - 1
        if n <= N0:
            return U[n], D[n]
        Dn = D[N0] * (self.r * q) ** (n - N0)
        return self.r * (q - 1) * Dn / (1 - self.r * self.r * q), Dn

    def s(self, e):
        """Shadow mass of the quotient edge ``e`` (any ray level)."""
        if isinstance(e, str):
            return self.shadow[e]
        kind, i, n = e
        U, D = self._ray(i, n)
        return U if kind == "up" else D

    def total(self, v):
        """``mu_x(boundary)`` for ``x`` over the quotient vertex ``v``."""
        if isinstance(v, str):
            return self.Z[v]
        _, i, n = v
        q = self.g.quotient.index(i, n)
        return self._ray(i, n)[0] + q * self._ray(i, n - 1)[1]

    def residual(self) -> float:
        """Largest violation of the conformal recursion over core edges."""
        Q = self.g.quotient
        worst = 0.0
        for e in Q.core_edges:
            rev = Q.reverse(e)
            rhs = self.r * sum((Q.mult(f) - (f == rev)) * self.s(f)
                               for f in Q.out_edges(Q.terminus(e)))
            worst = max(worst, abs(float(self.s(e) - rhs)))
        for ray in self.g.rays:
            for n in range(0, len(self.rays[ray.id][1]) + 3):
                Q = self.g.quotient
                for e in (("up", ray.id, n), ("dn", ray.id, n)):
                    rev = Q.reverse(e)
                    rhs = self.r * sum((Q.mult(f) - (f == rev)) * self.s(f)
                                       for f in Q.out_edges(Q.terminus(e)))
                    worst = max(worst, abs(float(self.s(e) - rhs)))
        return worst

    def to_json(self) -> dict:
        Q = self.g.quotient
        fmt = (lambda x: x) if self.exact else float
        out = {"delta": self.delta, "r": fmt(self.r), "exact": self.exact,
               "shadows": {Q.name(e): fmt(self.s(e)) for e in Q.core_edges},
               "vertex_mass": {v: fmt(self.Z[v]) for v in Q.core_vertices},
               "residual": self.residual(), "rays": {}}
        for ray in sorted(self.g.rays, key=lambda r: r.id):
            U, D, q = self.rays[ray.id]
            out["rays"][str(ray.id)] = {
                "up": [fmt(x) for x in U], "down": [fmt(x) for x in D], "tail_index": q,
                "down_ratio_tail": fmt(self.r * q), "up_over_down_tail":
                    fmt(self.r * (q - 1) / (1 - self.r * self.r * q))}
        return out


def solve_ps(g: GraphOfGroups, tol: float = 1e-15) -> PSDensity:
    """Critical exponent and shadow masses, normalized to total mass 1 at the basepoint."""
    Q = g.quotient
    for ray in g.rays:
        if not ray.explicit:
            raise ExponentError(f"ray {ray.id} grows too fast for a finite exponent; "
                                "see exponent_lower_bounds")
    if not g.rays:
        from .bass_serre import volume_entropy
        ent = volume_entropy(g)
        if ent.finite_tree or ent.value <= 0:
            raise ExponentError("elementary action: the tree has no exponential growth")
    lo, hi = 0.0, _rmax(g)
    if _phi(g, hi * (1 - 1e-15)) < 1:
        raise ExponentError("no solution below the ray threshold")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _phi(g, mid) < 1:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * hi:
            break
    r = 0.5 * (lo + hi)
    exact = False
    cand = _exact_candidate(g, r)
    if cand is not None:
        r, exact = cand, True
    return _assemble(g, r, exact)


def _exact_candidate(g, r: float):
    """``r`` as an exact rational ``1/n`` or ``1/sqrt``-free small fraction."""
    for den in range(1, 65):
        num = round(r * den)
        if num >= 1 and abs(num / den - r) < 1e-11:
            f = Fraction(num, den)
            if _exact_phi_zero(g, f):
                return f
    return None


def _assemble(g, r, exact) -> PSDensity:
    Q = g.quotient
    edges, M, share = _core_matrix(g, r) if Q.core_edges else ([], [], None)
    if edges:
        n = len(edges)
        if exact:
            A = [[(1 if i == j else 0) - M[i][j] for j in range(n)] for i in range(n)]
            vec = _frac_null(A)
        else:
            A = np.eye(n) - M
            _, _, vt = np.linalg.svd(A)
            vec = np.abs(vt[-1])
        s = {e: vec[k] for k, e in enumerate(edges)}
        if not exact:
            s = {e: float(x) for e, x in s.items()}
    else:
        s = {}
    # vertex masses: core part plus the rays hanging there
    Z = {}
    zero = r * 0
    for v in Q.core_vertices:
        core = sum((Q.mult(f) * s[f] for f in Q.out_edges(v) if f in s), zero)
        b = sum((_beta(Q, ray.id, r) for ray in g.rays if ray.attach == v), zero)
        Z[v] = core / (1 - b) if edges else (zero + 1)
    scale = Z[g.basepoint]
    s = {e: x / scale for e, x in s.items()}
    Z = {v: x / scale for v, x in Z.items()}
    rays = {}
    for ray in g.rays:
        U, D = ray_profile(_ray_indices(Q, ray.id), ray.tail_index, r)
        D0 = r * (Z[ray.attach] - _beta(Q, ray.id, r) * Z[ray.attach])
        rays[ray.id] = ([x * D0 for x in U], [x * D0 for x in D], ray.tail_index)
    delta = -math.log(float(r)) if not exact else math.log(r.denominator / r.numerator)
    return PSDensity(g, delta, r, exact, s, Z, rays)


# masses of shadows in the tree

def shadow_mass(ps: PSDensity, x: tuple, f: tuple):
    """``mu_x`` of the shadow of the tree edge ``f = (y, c, e)``.

    The shadow is the set of boundary points whose ray from ``o(f)`` starts
    with ``f``. Edges pointing towards ``x`` are handled by complement.
    """
    from .bass_serre import edge_terminus
    Q = ps.g.quotient
    y, _, e = f
    t = edge_terminus(Q, f)
    dy, dt = tree_distance(x, y), tree_distance(x, t)
    if dt == dy + 1:
        return ps.r ** dy * ps.s(e)
    # x lies beyond f: complement of the reversed shadow, seen from x
    return ps.total(vertex_end(Q, x)) - ps.r ** dt * ps.s(Q.reverse(e))


def busemann(x: tuple, y: tuple, far: tuple) -> int:
    """``d(x, z) - d(z, y)`` for a far vertex ``z``."""
    return tree_distance(x, far) - tree_distance(far, y)


def busemann_toward(ball, x: tuple, y: tuple, toward: tuple, depths=(0, 1)):
    """Busemann cocycle toward the end beyond the tree edge ``toward``,
    evaluated at the two deepest descendants available in the ball and
    checked to agree."""
    from .bass_serre import edge_terminus
    Q = ball.Q
    t = edge_terminus(Q, toward)
    beyond = [v for v in ball.vertices if len(v) >= len(t) and v[:len(t)] == t
              and len(t) > len(toward[0])]
    if not beyond:
        raise ValueError("ball too small")
    deepest = max(len(v) for v in beyond)
    cands = [v for v in beyond if len(v) == deepest]
    vals = {busemann(x, y, z) for z in cands[:2]}
    far = max(len(x), len(y)) + len(t)
    if deepest < far or len(vals) != 1:
        raise ValueError("ball too small")
    return vals.pop()


def visual_distance(xi: tuple, eta: tuple, base: tuple = ()) -> float:
    """``exp(-u)``, ``u`` the length of the common part of the rays from ``base``."""
    if xi == eta:
        raise ValueError("directions are equal")
    if base:
        raise NotImplementedError("visual distance is measured from the basepoint lift")
    u = 0
    for a, b in zip(xi, eta):
        if a != b:
            break
        u += 1
    if u >= min(len(xi), len(eta)):
        raise ValueError("directions do not diverge within the given words")
    return math.exp(-u)


@dataclass
class BMBox:
    """Geodesics from the shadows ``B_minus`` to ``B_plus`` through ``x``."""
    B_minus: list
    B_plus: list
    x: tuple
    t: int = 0


def _first_step(Q, x, f):
    """The first letter of the path from ``x`` towards the tree edge ``f``."""
    from .bass_serre import edge_terminus
    t = edge_terminus(Q, f)
    far = t if len(t) >= len(f[0]) else f[0]
    n = 0
    for a, b in zip(x, far):
        if a != b:
            break
        n += 1
    if n < len(x):
        return ("up",)
    return ("down", far[n]) if len(far) > n else None


def box_ok(Q, box: BMBox) -> bool:
    """Every geodesic between the two shadows passes through ``x``."""
    from .bass_serre import edge_terminus
    for f in box.B_minus + box.B_plus:
        if tree_distance(box.x, edge_terminus(Q, f)) != tree_distance(box.x, f[0]) + 1:
            return False
    minus = {_first_step(Q, box.x, f) for f in box.B_minus}
    plus = {_first_step(Q, box.x, f) for f in box.B_plus}
    return None not in minus | plus and not (minus & plus)


def bm_box_measure(ps: PSDensity, box: BMBox):
    """``mu_x(B_minus) * mu_x(B_plus)`` (the unit time factor is 1)."""
    Q = ps.g.quotient
    if not box_ok(Q, box):
        raise ValueError("geodesics between the shadows avoid the box vertex")
    zero = ps.r * 0
    m = sum((shadow_mass(ps, box.x, f) for f in box.B_minus), zero)
    p = sum((shadow_mass(ps, box.x, f) for f in box.B_plus), zero)
    return m * p


# cusps and exponents

def cusp_orbit_count(g: GraphOfGroups, i: int, n: int) -> int:
    """Points of the cusp-group orbit of the ray origin within distance ``2n``."""
    Q = g.quotient
    if n > Q.rays[i].levels + 1:
        raise ValueError(f"n = {n} exceeds the declared levels of ray {i}")
    return math.prod(Q.index(i, m) for m in range(1, n + 1))


def cusp_rate_table(g: GraphOfGroups, i: int, delta: float | None = None) -> list[dict]:
    """``log(count) / (2n)`` against ``delta / 2`` for each declared level."""
    Q = g.quotient
    logs = ray_log_indices(g, Q.rays[i])
    out, acc = [], 0.0
    for n in range(1, len(logs) + 1):
        acc += logs[n - 1]
        row = {"n": n, "log_count": acc, "rate": acc / (2 * n)}
        if delta is not None:
            row["half_delta"] = delta / 2
        out.append(row)
    return out


def exponent_lower_bounds(g: GraphOfGroups, i: int) -> dict:
    """Lower bounds for the critical exponent from the growth of ray ``i``.

    For an orders-only ray with ``|P_n| = p**e_n`` the ball of radius ``2n``
    holds at least ``e_{n-1} - 1`` orbit points, which gives the sequence
    ``log(e_{n-1} - 1) / (2n)``; the sharper index bound
    ``log([P_n : P_{n-1}] - 1) / (2n)`` is reported alongside. The exponent
    is flagged infinite when the sequence, from ``n = 2`` on, increases
    strictly with nondecreasing increments over every declared level: an
    eventually constant index would make it decay like ``1/n`` instead.
    """
    Q = g.quotient
    ray = Q.rays[i]
    logs = ray_log_indices(g, ray)
    rows = []
    for n in range(1, len(logs) + 1):
        li = logs[n - 1]
        sharp = (li + math.log1p(-math.exp(-li))) / (2 * n) if li > 0 else -math.inf
        row = {"n": n, "index_bound": sharp}
        if not ray.explicit:
            e = ray.exponents[n - 1]
            row["exponent_bound"] = math.log(e - 1) / (2 * n) if e > 1 else -math.inf
        rows.append(row)
    key = "exponent_bound" if not ray.explicit else "index_bound"
    seq = [r[key] for r in rows if r["n"] >= 2]
    inc = all(b > a for a, b in zip(seq, seq[1:]))
    steps = [b - a for a, b in zip(seq, seq[1:])]
    convex = all(b >= a for a, b in zip(steps, steps[1:]))
    return {"ray": i, "rows": rows, "sequence": key, "strictly_increasing": inc,
            "increments_nondecreasing": convex, "infinite_exponent": inc and convex}
