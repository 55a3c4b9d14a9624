"""Programmatic constructors for the standard example graphs of groups.

The shipped ``data/*.gog`` files are the canonical serializations of these
constructors (see ``demos/build_data.py``).
"""

from __future__ import annotations

import itertools

import numpy as np

from .gog import CuspRay, Edge, GraphOfGroups, check_invariants
from .grp import FiniteGroup, Homomorphism, Subgroup, permutation_group


class Builder:
    """Small helper that assembles a :class:`GraphOfGroups` by name."""

    def __init__(self):
        self.g = GraphOfGroups()

    def group(self, name, G: FiniteGroup):
        self.g.groups[name] = G
        return self

    def subgroup(self, name, of, elements):
        self.g.subgroups[name] = (of, Subgroup(self.g.groups[of], elements))
        return self

    def hom(self, name, src, dst, images):
        S, T = self.g.groups[src], self.g.groups[dst]
        self.g.homs[name] = (src, dst, Homomorphism(S, T, images))
        return self

    def identity_hom(self, group):
        name = f"id_{group}"
        if name not in self.g.homs:
            self.hom(name, group, group, range(self.g.groups[group].order))
        return name

    def vertex(self, name, group):
        self.g.vertices[name] = group
        return self

    def edge(self, name, rev, o, t, group, rho_t, rho_o):
        """Edge ``name: o -> t`` and its reverse; ``rho_t`` maps into ``G_t``."""
        self.g.edges[name] = Edge(name, rev, o, t, group, rho_t)
        self.g.edges[rev] = Edge(rev, name, t, o, group, rho_o)
        return self

    def ray(self, ray: CuspRay):
        self.g.rays.append(ray)
        return self

    def basepoint(self, v):
        self.g.basepoint = v
        return self

    def build(self) -> GraphOfGroups:
        check_invariants(self.g)
        return self.g


def trivial() -> FiniteGroup:
    return FiniteGroup([[0]])


def elementary_abelian(p: int, k: int) -> FiniteGroup:
    """``(Z/p)^k``; element index is the base-p integer of its coordinates,
    so ``range(p**j)`` is the subgroup of the last ``j`` coordinates."""
    n = p ** k
    digits = np.array([[(x // p ** j) % p for j in range(k)] for x in range(n)]).reshape(n, k)
    s = (digits[:, None, :] + digits[None, :, :]) % p
    weights = p ** np.arange(k)
    return FiniteGroup(s @ weights)


def s3() -> FiniteGroup:
    """Symmetric group on 3 points; element 1 is the transposition (0 1)."""
    perms = [(0, 1, 2), (1, 0, 2), (0, 2, 1), (2, 1, 0), (1, 2, 0), (2, 0, 1)]
    return permutation_group(perms)


def _loops(b: Builder, v: str, count: int, group: str = "1", start: int = 1):
    idn = b.identity_hom(group)
    for k in range(start, start + count):
        b.edge(f"e{k}", f"e{k}bar", v, v, group, idn, idn)


def wedge(m: int) -> GraphOfGroups:
    """Wedge of ``m`` circles with trivial groups (free group ``F_m``)."""
    b = Builder().group("1", trivial()).vertex("v", "1")
    _loops(b, "v", m)
    return b.basepoint("v").build()


def subdivided_wedge(m: int, p: int = 2) -> GraphOfGroups:
    """Each loop of the wedge of ``m`` circles replaced by a cycle of ``p`` edges."""
    b = Builder().group("1", trivial()).vertex("v", "1")
    idn = b.identity_hom("1")
    for k in range(1, m + 1):
        names = ["v"] + [f"w{k}_{j}" for j in range(1, p)] + ["v"]
        for w in names[1:-1]:
            b.vertex(w, "1")
        for j in range(p):
            b.edge(f"e{k}_{j}", f"e{k}_{j}bar", names[j], names[j + 1], "1", idn, idn)
    return b.basepoint("v").build()


def z2_loop() -> GraphOfGroups:
    """One loop with vertex group = edge group = Z/2 and identity maps."""
    b = Builder().group("Z2", elementary_abelian(2, 1)).vertex("v", "Z2")
    _loops(b, "v", 1, group="Z2")
    return b.basepoint("v").build()


def z2_decorated() -> GraphOfGroups:
    """Vertex group Z/2 with one trivial-group loop and one Z/2 loop (6-regular tree)."""
    b = Builder().group("1", trivial()).group("Z2", elementary_abelian(2, 1))
    b.vertex("v", "Z2").hom("inc", "1", "Z2", [0])
    b.edge("e1", "e1bar", "v", "v", "1", "inc", "inc")
    idz = b.identity_hom("Z2")
    b.edge("e2", "e2bar", "v", "v", "Z2", idz, idz)
    return b.basepoint("v").build()


def s3_amalgam() -> GraphOfGroups:
    """``S3 *_{Z/2} S3`` along the same transposition: 2-acylindrical, 3-regular tree."""
    b = Builder().group("S3", s3()).group("Z2", elementary_abelian(2, 1))
    b.vertex("A", "S3").vertex("B", "S3").hom("inc", "Z2", "S3", [0, 1])
    b.edge("c", "cbar", "A", "B", "Z2", "inc", "inc")
    return b.basepoint("A").build()


def klein_amalgam() -> GraphOfGroups:
    """``(Z/2)^2 *_{Z/2} (Z/2)^2``; the edge group is central, hence fixes the whole tree."""
    b = Builder().group("V4", elementary_abelian(2, 2)).group("Z2", elementary_abelian(2, 1))
    b.vertex("A", "V4").vertex("B", "V4")
    b.hom("inc1", "Z2", "V4", [0, 1]).hom("inc2", "Z2", "V4", [0, 2])
    b.edge("c", "cbar", "A", "B", "Z2", "inc2", "inc1")
    return b.basepoint("A").build()


def _add_elem_ray(b: Builder, i: int, v: str, q: int, levels: int, vgroup: str = "1"):
    """Ray of ``(Z/q)^n`` groups over a trivial attach vertex group."""
    amb = f"R{i}"
    b.group(amb, elementary_abelian(q, levels + 1))
    chain = []
    for n in range(1, levels + 2):
        name = f"R{i}_{n}"
        b.subgroup(name, amb, range(q ** n))
        chain.append(name)
    b.hom(f"att{i}", vgroup, amb, [0])
    b.ray(CuspRay(i, v, levels, q, tuple(chain), vgroup, f"att{i}"))


def nagao(q: int = 2, loops: int = 1, rays: int = 1, levels: int = 6) -> GraphOfGroups:
    """Trivial core vertex with ``loops`` loops and ``rays`` rays of ``(Z/q)^n``.

    The tree is ``(q+1)``-regular when ``2*loops + rays == q + 1``.
    """
    b = Builder().group("1", trivial()).vertex("u", "1")
    _loops(b, "u", loops)
    for i in range(rays):
        _add_elem_ray(b, i, "u", q, levels)
    return b.basepoint("u").build()


def sl2_congruence(levels: int = 3) -> GraphOfGroups:
    """Quotient of the 3-regular tree by the level-X congruence kernel of
    SL2(F2[X]): a trivial vertex with three rays of ``(Z/2)^n``."""
    return nagao(2, loops=0, rays=3, levels=levels)


def _gl2_f2():
    mats = []
    for a, b_, c, d in itertools.product(range(2), repeat=4):
        if (a * d - b_ * c) % 2:
            mats.append(((a, b_), (c, d)))
    ident = ((1, 0), (0, 1))
    mats.remove(ident)
    mats = [ident] + sorted(mats)
    pos = {m: k for k, m in enumerate(mats)}

    def mul(x, y):
        return tuple(tuple(sum(x[i][k] * y[k][j] for k in range(2)) % 2 for j in range(2))
                     for i in range(2))

    table = [[pos[mul(x, y)] for y in mats] for x in mats]
    return FiniteGroup(table), mats


def pgl2_nagao(levels: int = 4) -> GraphOfGroups:
    """Quotient of the Bruhat-Tits tree of PGL2 over F2((1/X)) by PGL2(F2[X]).

    Vertex ``v0`` carries GL2(F2); level ``n >= 1`` carries the unipotent
    matrices ``[[1, b], [0, 1]]`` with ``deg b <= n``, encoded by the bit mask
    of ``b``. The ray starts at ``v1``.
    """
    G0, mats = _gl2_f2()
    b = Builder().group("GL2", G0)
    upper = mats.index(((1, 1), (0, 1)))
    b.group("B0", elementary_abelian(2, 1)).group("B1", elementary_abelian(2, 2))
    b.vertex("v0", "GL2").vertex("v1", "B1")
    b.hom("B0_GL2", "B0", "GL2", [0, upper]).hom("B0_B1", "B0", "B1", [0, 1])
    b.edge("e0", "e0bar", "v0", "v1", "B0", "B0_B1", "B0_GL2")
    amb = "U"
    b.group(amb, elementary_abelian(2, levels + 3))
    chain = []
    for n in range(2, levels + 3):
        b.subgroup(f"U{n}", amb, range(2 ** (n + 1)))
        chain.append(f"U{n}")
    b.hom("B1_U", "B1", amb, [0, 1, 2, 3])
    b.ray(CuspRay(0, "v1", levels, 2, tuple(chain), "B1", "B1_U"))
    return b.basepoint("v0").build()


def superexp(levels: int = 7) -> GraphOfGroups:
    """Single vertex with group ``(Z/2)^2`` and a ray of ``(Z/2)^(2^(2^n))``.

    Only the orders are recorded: the groups are far too large for tables.
    """
    b = Builder().group("V4", elementary_abelian(2, 2)).vertex("u", "V4")
    exps = tuple(2 ** (2 ** n) for n in range(levels + 2))
    b.ray(CuspRay(0, "u", levels, 2, prime=2, exponents=exps))
    return b.basepoint("u").build()


def two_loops_disjoint_classes() -> GraphOfGroups:
    """Z/2 loop: the order-1 shift splits into two one-way classes."""
    return z2_loop()


CATALOG = {
    "f2": lambda: wedge(2),
    "f3": lambda: wedge(3),
    "line": lambda: wedge(1),
    "f2_sub2": lambda: subdivided_wedge(2, 2),
    "z2loop": z2_loop,
    "z2dec": z2_decorated,
    "s3amalgam": s3_amalgam,
    "kleinamalgam": klein_amalgam,
    "nagao_q2": lambda: nagao(2, 1, 1, 6),
    "nagao_q3": lambda: nagao(3, 1, 2, 4),
    "sl2f2": lambda: sl2_congruence(3),
    "pgl2_f2": lambda: pgl2_nagao(4),
    "superexp": lambda: superexp(7),
}
