"""Finite graphs of finite groups with optional cusp rays: data model, text
format, validation and the unfolded quotient used by the tree code.

Text format (one statement per line, ``#`` starts a comment)::

    group     <name> order <n> table <n*n indices>
    subgroup  <name> of <group> elements <indices>
    hom       <name> : <src> -> <dst> map <n indices>
    vertex    <name> group <group> [truncated]
    edge      <name> reverse <name> from <v> to <w> group <group> rho <hom>
    ray       <i> attach <v> levels <L> chain <subgroups> tail_index <q> attach_group <group> attach_rho <hom>
    ray       <i> attach <v> levels <L> exponents <p> <e_0 .. e_{L+1}> tail_index <q>
    basepoint <v>

A ray hangs off ``attach``. Its level groups are ``P_0 = G_attach`` (embedded
by ``attach_rho``) followed by the ``L + 1`` chain subgroups, all inside one
ambient group. Past the chain every index equals ``tail_index``. The second
ray form records only the orders ``p**e_n`` of the level groups; it supports
counting and growth but no coset arithmetic. A ``truncated`` vertex carries a
finite stage of an infinite locally finite group (see :mod:`arbocode.collapse`);
tree computations refuse such graphs.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .grp import (FiniteGroup, GroupError, Homomorphism, Subgroup,
                  check_monomorphism, coset_reps)


class GOGError(ValueError):
    """Parse or validation failure; ``line`` and ``col`` are 1-based when known."""

    def __init__(self, msg, line=None, col=None, kind="invalid"):
        self.msg = msg
        self.line = line
        self.col = col
        self.kind = kind
        where = f"line {line}" + (f", col {col}" if col else "") + ": " if line else ""
        super().__init__(where + msg)


class TruncationError(ValueError):
    """Raised when a computation needs ray groups beyond the declared chain."""


@dataclass(frozen=True)
class Edge:
    name: str
    reverse: str
    origin: str
    terminus: str
    group: str
    rho: str


@dataclass(frozen=True)
class CuspRay:
    id: int
    attach: str
    levels: int
    tail_index: int
    chain: tuple = ()
    attach_group: str | None = None
    attach_rho: str | None = None
    prime: int | None = None
    exponents: tuple = ()

    @property
    def explicit(self) -> bool:
        return self.prime is None

    @property
    def attach_vertex(self) -> str:
        return self.attach

    @property
    def truncation_level(self) -> int:
        return self.levels


@dataclass
class GraphOfGroups:
    groups: dict = field(default_factory=dict)       # name -> FiniteGroup
    subgroups: dict = field(default_factory=dict)    # name -> (group name, Subgroup)
    homs: dict = field(default_factory=dict)         # name -> (src, dst, Homomorphism)
    vertices: dict = field(default_factory=dict)     # name -> group name
    edges: dict = field(default_factory=dict)        # name -> Edge
    rays: list = field(default_factory=list)
    basepoint: str | None = None
    truncated: set = field(default_factory=set)     # vertices holding a truncated limit

    # convenience views
    def vgroup(self, v: str) -> FiniteGroup:
        return self.groups[self.vertices[v]]

    def egroup(self, e: str) -> FiniteGroup:
        return self.groups[self.edges[e].group]

    def rho(self, e: str) -> Homomorphism:
        return self.homs[self.edges[e].rho][2]

    @property
    def directed_edges(self):
        return [self.edges[k] for k in sorted(self.edges)]

    def ray(self, i: int) -> CuspRay:
        for r in self.rays:
            if r.id == i:
                return r
        raise KeyError(f"no ray {i}")

    def copy(self) -> "GraphOfGroups":
        return GraphOfGroups(dict(self.groups), dict(self.subgroups), dict(self.homs),
                             dict(self.vertices), dict(self.edges), list(self.rays),
                             self.basepoint, set(self.truncated))

    @cached_property
    def quotient(self) -> "Quotient":
        return Quotient(self)

    def __eq__(self, other):
        if not isinstance(other, GraphOfGroups):
            return NotImplemented
        return serialize_gog(self) == serialize_gog(other)

    __hash__ = None


# parsing

_KEYWORDS = ("group", "subgroup", "hom", "vertex", "edge", "ray", "basepoint")


class _Line:
    def __init__(self, text, lineno):
        self.lineno = lineno
        self.toks = []
        col = 1
        i = 0
        while i < len(text):
            if text[i].isspace():
                i += 1
                continue
            j = i
            while j < len(text) and not text[j].isspace():
                j += 1
            self.toks.append((text[i:j], i + 1))
            i = j
        self.pos = 0

    def err(self, msg, kind="syntax"):
        col = self.toks[self.pos][1] if self.pos < len(self.toks) else None
        raise GOGError(msg, self.lineno, col, kind)

    def word(self, what="token"):
        if self.pos >= len(self.toks):
            self.err(f"expected {what}, got end of line")
        tok = self.toks[self.pos][0]
        self.pos += 1
        return tok

    def expect(self, kw):
        tok = self.word(f"'{kw}'")
        if tok != kw:
            self.pos -= 1
            self.err(f"expected '{kw}', got '{tok}'")

    def integer(self, what="integer"):
        tok = self.word(what)
        try:
            return int(tok)
        except ValueError:
            self.pos -= 1
            self.err(f"expected {what}, got '{tok}'")

    def ints_until(self, stop=None):
        out = []
        while self.pos < len(self.toks) and self.toks[self.pos][0] != stop:
            out.append(self.integer())
        return out

    def words_until(self, stop):
        out = []
        while self.pos < len(self.toks) and self.toks[self.pos][0] != stop:
            out.append(self.word())
        return out

    def done(self):
        if self.pos < len(self.toks):
            self.err(f"unexpected trailing token '{self.toks[self.pos][0]}'")


def parse_gog(text: str, validate_all: bool = True) -> GraphOfGroups:
    """Parse GOG text into a validated :class:`GraphOfGroups`."""
    g = GraphOfGroups()
    where = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        ln = _Line(body, lineno)
        kw = ln.word()
        if kw not in _KEYWORDS:
            ln.pos = 0
            ln.err(f"unknown statement '{kw}'")
        try:
            _STATEMENTS[kw](g, ln, where)
        except GroupError as exc:
            raise GOGError(str(exc), lineno, None, "invariant") from None
    if validate_all:
        check_invariants(g, where)
    return g


def _fresh(g, ln, name, table, what):
    if name in table:
        ln.pos -= 1
        ln.err(f"duplicate {what} '{name}'", kind="invariant")


def _ref(ln, table, name, what):
    if name not in table:
        ln.pos -= 1
        ln.err(f"unknown {what} '{name}'", kind="reference")
    return table[name]


def _st_group(g, ln, where):
    name = ln.word("group name")
    _fresh(g, ln, name, g.groups, "group")
    ln.expect("order")
    n = ln.integer("order")
    if n < 1:
        ln.err("order must be positive", kind="invariant")
    ln.expect("table")
    vals = ln.ints_until()
    if len(vals) != n * n:
        ln.err(f"table needs {n * n} entries, got {len(vals)}")
    g.groups[name] = FiniteGroup(np.array(vals).reshape(n, n), name=name)
    where[("group", name)] = ln.lineno


def _st_subgroup(g, ln, where):
    name = ln.word("subgroup name")
    _fresh(g, ln, name, g.subgroups, "subgroup")
    ln.expect("of")
    gname = ln.word("group name")
    G = _ref(ln, g.groups, gname, "group")
    ln.expect("elements")
    els = ln.ints_until()
    if not els:
        ln.err("subgroup needs at least one element")
    if len(set(els)) != len(els):
        ln.err("repeated subgroup element", kind="invariant")
    g.subgroups[name] = (gname, Subgroup(G, els))
    where[("subgroup", name)] = ln.lineno


def _st_hom(g, ln, where):
    name = ln.word("hom name")
    _fresh(g, ln, name, g.homs, "hom")
    ln.expect(":")
    src = ln.word("source group")
    S = _ref(ln, g.groups, src, "group")
    ln.expect("->")
    dst = ln.word("target group")
    T = _ref(ln, g.groups, dst, "group")
    ln.expect("map")
    vals = ln.ints_until()
    if len(vals) != S.order:
        ln.err(f"map needs {S.order} entries, got {len(vals)}")
    g.homs[name] = (src, dst, Homomorphism(S, T, vals))
    where[("hom", name)] = ln.lineno


def _st_vertex(g, ln, where):
    name = ln.word("vertex name")
    _fresh(g, ln, name, g.vertices, "vertex")
    ln.expect("group")
    gname = ln.word("group name")
    _ref(ln, g.groups, gname, "group")
    if ln.pos < len(ln.toks):
        ln.expect("truncated")
        g.truncated.add(name)
    ln.done()
    g.vertices[name] = gname
    where[("vertex", name)] = ln.lineno


def _st_edge(g, ln, where):
    name = ln.word("edge name")
    _fresh(g, ln, name, g.edges, "edge")
    ln.expect("reverse")
    rev = ln.word("reverse edge name")
    ln.expect("from")
    o = ln.word("vertex")
    _ref(ln, g.vertices, o, "vertex")
    ln.expect("to")
    t = ln.word("vertex")
    _ref(ln, g.vertices, t, "vertex")
    ln.expect("group")
    gname = ln.word("group name")
    _ref(ln, g.groups, gname, "group")
    ln.expect("rho")
    h = ln.word("hom name")
    _ref(ln, g.homs, h, "hom")
    ln.done()
    g.edges[name] = Edge(name, rev, o, t, gname, h)
    where[("edge", name)] = ln.lineno


def _st_ray(g, ln, where):
    i = ln.integer("ray id")
    if any(r.id == i for r in g.rays):
        ln.pos -= 1
        ln.err(f"duplicate ray {i}", kind="invariant")
    ln.expect("attach")
    v = ln.word("vertex")
    _ref(ln, g.vertices, v, "vertex")
    ln.expect("levels")
    L = ln.integer("level count")
    if L < 0:
        ln.err("levels must be nonnegative", kind="invariant")
    mode = ln.word("'chain' or 'exponents'")
    if mode == "chain":
        chain = ln.words_until("tail_index")
        for c in chain:
            if c not in g.subgroups:
                ln.pos = next(k for k, t in enumerate(ln.toks) if t[0] == c)
                ln.err(f"unknown subgroup '{c}'", kind="reference")
        ln.expect("tail_index")
        q = ln.integer("tail index")
        ln.expect("attach_group")
        ag = ln.word("group name")
        _ref(ln, g.groups, ag, "group")
        ln.expect("attach_rho")
        ar = ln.word("hom name")
        _ref(ln, g.homs, ar, "hom")
        ln.done()
        ray = CuspRay(i, v, L, q, tuple(chain), ag, ar)
    elif mode == "exponents":
        p = ln.integer("prime")
        exps = ln.ints_until("tail_index")
        ln.expect("tail_index")
        q = ln.integer("tail index")
        ln.done()
        ray = CuspRay(i, v, L, q, prime=p, exponents=tuple(exps))
    else:
        ln.pos -= 1
        ln.err(f"expected 'chain' or 'exponents', got '{mode}'")
    g.rays.append(ray)
    where[("ray", i)] = ln.lineno


def _st_basepoint(g, ln, where):
    if g.basepoint is not None:
        ln.pos = 0
        ln.err("basepoint declared twice", kind="invariant")
    v = ln.word("vertex")
    _ref(ln, g.vertices, v, "vertex")
    ln.done()
    g.basepoint = v
    where[("basepoint",)] = ln.lineno


_STATEMENTS = {"group": _st_group, "subgroup": _st_subgroup, "hom": _st_hom,
               "vertex": _st_vertex, "edge": _st_edge, "ray": _st_ray,
               "basepoint": _st_basepoint}


# invariants

def _fail(msg, where, key):
    raise GOGError(msg, where.get(key) if where else None, None, "invariant")


def check_invariants(g: GraphOfGroups, where=None):
    """Raise :class:`GOGError` on the first violated structural invariant."""
    where = where or {}
    if not g.vertices:
        raise GOGError("no vertices declared", kind="invariant")
    if g.basepoint is None:
        raise GOGError("no basepoint declared", kind="invariant")
    for name, e in g.edges.items():
        key = ("edge", name)
        if e.reverse not in g.edges:
            _fail(f"edge '{name}': reverse '{e.reverse}' is not declared", where, key)
        r = g.edges[e.reverse]
        if e.reverse == name:
            _fail(f"edge '{name}' is its own reverse", where, key)
        if r.reverse != name:
            _fail(f"edge '{name}': reversal is not an involution", where, key)
        if r.origin != e.terminus or r.terminus != e.origin:
            _fail(f"edge '{name}': endpoints do not match its reverse", where, key)
        if r.group != e.group:
            _fail(f"edge '{name}': group differs from its reverse", where, key)
        src, dst, h = g.homs[e.rho]
        if src != e.group:
            _fail(f"edge '{name}': rho source is not the edge group", where, key)
        if dst != g.vertices[e.terminus]:
            _fail(f"edge '{name}': rho target is not the terminal vertex group", where, key)
        if not check_monomorphism(h):
            _fail(f"edge '{name}': rho not injective", where, key)
    if not is_connected(g):
        raise GOGError("graph not connected", kind="invariant")
    for ray in g.rays:
        _check_ray(g, ray, where)


def is_connected(g: GraphOfGroups) -> bool:
    adj = {v: set() for v in g.vertices}
    for e in g.edges.values():
        adj[e.origin].add(e.terminus)
    start = next(iter(sorted(g.vertices)))
    seen = {start}
    todo = [start]
    while todo:
        v = todo.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return len(seen) == len(g.vertices)


def _check_ray(g, ray, where):
    key = ("ray", ray.id)
    if ray.tail_index < 2:
        _fail(f"ray {ray.id}: tail_index must be at least 2", where, key)
    Gu = g.vgroup(ray.attach)
    if not ray.explicit:
        p, ex = ray.prime, ray.exponents
        if p < 2 or any(p % d == 0 for d in range(2, int(math.isqrt(p)) + 1)):
            _fail(f"ray {ray.id}: exponents base must be prime", where, key)
        if len(ex) != ray.levels + 2:
            _fail(f"ray {ray.id}: levels {ray.levels} needs {ray.levels + 2} exponents", where, key)
        if p ** ex[0] != Gu.order:
            _fail(f"ray {ray.id}: first exponent does not match the attach vertex group", where, key)
        if any(b <= a for a, b in zip(ex, ex[1:])):
            _fail(f"ray {ray.id}: ray not strictly increasing", where, key)
        return
    if len(ray.chain) != ray.levels + 1:
        _fail(f"ray {ray.id}: levels {ray.levels} needs {ray.levels + 1} chain subgroups", where, key)
    ambient = {g.subgroups[c][0] for c in ray.chain}
    if len(ambient) != 1:
        _fail(f"ray {ray.id}: chain subgroups must share one ambient group", where, key)
    amb = ambient.pop()
    if ray.attach_group != g.vertices[ray.attach]:
        _fail(f"ray {ray.id}: attach_group must be the attach vertex group", where, key)
    src, dst, h = g.homs[ray.attach_rho]
    if src != ray.attach_group or dst != amb:
        _fail(f"ray {ray.id}: attach_rho must map attach_group into the chain's group", where, key)
    if not check_monomorphism(h):
        _fail(f"ray {ray.id}: attach_rho not injective", where, key)
    levels = [h.image()] + [g.subgroups[c][1] for c in ray.chain]
    for a, b in zip(levels, levels[1:]):
        if not a.element_set < b.element_set:
            _fail(f"ray {ray.id}: ray not strictly increasing", where, key)


# serialization

def serialize_gog(g: GraphOfGroups) -> str:
    """Canonical text: statements grouped by kind, each kind sorted by name."""
    out = []
    for name in sorted(g.groups):
        G = g.groups[name]
        tab = " ".join(map(str, G.table.ravel().tolist()))
        out.append(f"group {name} order {G.order} table {tab}")
    for name in sorted(g.subgroups):
        gname, H = g.subgroups[name]
        out.append(f"subgroup {name} of {gname} elements {' '.join(map(str, H.elements))}")
    for name in sorted(g.homs):
        src, dst, h = g.homs[name]
        out.append(f"hom {name} : {src} -> {dst} map {' '.join(map(str, h.image_of.tolist()))}")
    for name in sorted(g.vertices):
        flag = " truncated" if name in g.truncated else ""
        out.append(f"vertex {name} group {g.vertices[name]}{flag}")
    for name in sorted(g.edges):
        e = g.edges[name]
        out.append(f"edge {name} reverse {e.reverse} from {e.origin} to {e.terminus} "
                   f"group {e.group} rho {e.rho}")
    for r in sorted(g.rays, key=lambda r: r.id):
        if r.explicit:
            out.append(f"ray {r.id} attach {r.attach} levels {r.levels} chain {' '.join(r.chain)} "
                       f"tail_index {r.tail_index} attach_group {r.attach_group} "
                       f"attach_rho {r.attach_rho}")
        else:
            out.append(f"ray {r.id} attach {r.attach} levels {r.levels} exponents {r.prime} "
                       f"{' '.join(map(str, r.exponents))} tail_index {r.tail_index}")
    out.append(f"basepoint {g.basepoint}")
    return "\n".join(out) + "\n"


def load_gog(path) -> GraphOfGroups:
    with open(path, encoding="utf-8") as fh:
        return parse_gog(fh.read())


# validation report

def validate(g: GraphOfGroups) -> dict:
    """Structural report; failures are recorded instead of raised."""
    rep = {"involution": True, "injective": True, "connected": True, "failures": []}
    for name, e in sorted(g.edges.items()):
        r = g.edges.get(e.reverse)
        if r is None or r.reverse != name or r.origin != e.terminus or r.group != e.group:
            rep["involution"] = False
            rep["failures"].append(f"edge '{name}': reversal is not an involution")
        if name in g.edges and not check_monomorphism(g.rho(name)):
            rep["injective"] = False
            rep["failures"].append(f"edge '{name}': rho not injective")
    if not is_connected(g):
        rep["connected"] = False
        rep["failures"].append("graph not connected")
    rays = []
    for ray in sorted(g.rays, key=lambda r: r.id):
        try:
            _check_ray(g, ray, None)
            ok = True
        except GOGError as exc:
            ok = False
            rep["failures"].append(exc.msg)
        rays.append({"id": ray.id, "attach": ray.attach, "levels": ray.levels,
                     "indices": _index_labels(g, ray),
                     "tail_index": ray.tail_index, "explicit": ray.explicit, "ok": ok})
    rep["rays"] = rays
    rep["cusp_segments"] = cusp_segments(g)
    core_trivial = all(g.vgroup(v).order == 1 for v in g.vertices)
    rep["core_vertices"] = len(g.vertices)
    rep["truncated_vertices"] = sorted(g.truncated)
    rep["geometrically_finite"] = True
    rep["cocompact"] = not g.rays
    rep["core_groups_trivial"] = core_trivial
    if core_trivial:
        note = "core groups trivial: every finite-order element fixes a ray vertex"
    else:
        note = "core groups nontrivial: pass to a finite-index subgroup acting freely on the core first"
    rep["torsion_note"] = note
    rep["valid"] = not rep["failures"]
    return rep


_MAX_INDEX_BITS = 4096


def ray_indices(g: GraphOfGroups, ray: CuspRay) -> list[int]:
    """``[P_n : P_{n-1}]`` for ``n = 1 .. L + 1``.

    Orders-only rays whose indices are too large to write down raise
    ``OverflowError``; use :func:`ray_log_indices` for those.
    """
    if not ray.explicit:
        p, ex = ray.prime, ray.exponents
        steps = [b - a for a, b in zip(ex, ex[1:])]
        if max(steps) * math.log2(p) > _MAX_INDEX_BITS:
            raise OverflowError(f"ray {ray.id}: indices too large to enumerate")
        return [p ** k for k in steps]
    h = g.homs[ray.attach_rho][2]
    orders = [h.source.order] + [g.subgroups[c][1].order for c in ray.chain]
    return [b // a for a, b in zip(orders, orders[1:])]


def ray_log_indices(g: GraphOfGroups, ray: CuspRay) -> list[float]:
    """Natural logs of the explicit ray indices, safe for huge orders."""
    if not ray.explicit:
        p, ex = ray.prime, ray.exponents
        return [(b - a) * math.log(p) for a, b in zip(ex, ex[1:])]
    return [math.log(q) for q in ray_indices(g, ray)]


def _index_labels(g, ray) -> list[str]:
    if not ray.explicit:
        p, ex = ray.prime, ray.exponents
        return [f"{p}^{b - a}" for a, b in zip(ex, ex[1:])]
    return [str(q) for q in ray_indices(g, ray)]


def cusp_segments(g: GraphOfGroups) -> list[list[str]]:
    """Maximal edge paths ending at a quotient leaf whose edge-to-origin maps
    are onto at every interior vertex (finite cusp-like segments)."""
    out = []
    deg = {v: 0 for v in g.vertices}
    for e in g.edges.values():
        deg[e.origin] += 1
    for e in sorted(g.edges.values(), key=lambda e: e.name):
        # walk e, then keep going while the next vertex has exactly one way on
        path = [e.name]
        cur = e
        ok = True
        while deg[cur.terminus] == 2:
            nxt = [f for f in g.edges.values() if f.origin == cur.terminus and f.name != cur.reverse]
            f = nxt[0]
            if g.egroup(f.name).order != g.vgroup(f.origin).order:
                ok = False
                break
            path.append(f.name)
            cur = f
            if len(path) > len(g.edges):
                ok = False
                break
        if ok and deg[cur.terminus] == 1 and len(path) > 1:
            head = g.edges[path[0]]
            if deg[head.origin] != 2:
                out.append(path)
    return out


# unfolded quotient

class Quotient:
    """Uniform access to core and ray vertices/edges.

    Vertices are core names or ``("r", i, n)`` for ray level ``n >= 1``.
    Edges are core names, ``("up", i, n)`` from level ``n`` to ``n + 1`` and
    ``("dn", i, n)`` back down. Level 0 of ray ``i`` is its attach vertex.
    """

    def __init__(self, g: GraphOfGroups):
        if g.truncated:
            raise TruncationError(f"vertex '{min(g.truncated)}' holds a truncated direct limit; "
                                  "the tree is not locally finite there")
        self.g = g
        self.rays = {r.id: r for r in g.rays}
        self.core_vertices = sorted(g.vertices)
        self.core_edges = sorted(g.edges)
        self._indices = {}
        self._groups = {}

    # combinatorics
    def origin(self, e):
        if isinstance(e, str):
            return self.g.edges[e].origin
        kind, i, n = e
        return self.level_vertex(i, n if kind == "up" else n + 1)

    def terminus(self, e):
        return self.origin(self.reverse(e))

    def reverse(self, e):
        if isinstance(e, str):
            return self.g.edges[e].reverse
        kind, i, n = e
        return ("dn" if kind == "up" else "up", i, n)

    def level_vertex(self, i, n):
        return self.rays[i].attach if n == 0 else ("r", i, n)

    def out_edges(self, v):
        if isinstance(v, tuple):
            _, i, n = v
            return [("up", i, n), ("dn", i, n - 1)]
        out = [e for e in self.core_edges if self.g.edges[e].origin == v]
        out += [("up", r.id, 0) for r in sorted(self.g.rays, key=lambda r: r.id) if r.attach == v]
        return out

    def index(self, i, n) -> int:
        """``[P_n : P_{n-1}]`` for ``n >= 1``."""
        if i not in self._indices:
            self._indices[i] = ray_indices(self.g, self.rays[i])
        idx = self._indices[i]
        return idx[n - 1] if n - 1 < len(idx) else self.rays[i].tail_index

    def mult(self, e) -> int:
        """Lifts of ``e`` at a tree vertex over ``o(e)``: ``[G_o : rho_ebar(G_e)]``."""
        if isinstance(e, str):
            ed = self.g.edges[e]
            return self.g.vgroup(ed.origin).order // self.g.egroup(e).order
        kind, i, n = e
        return 1 if kind == "up" else self.index(i, n + 1)

    def valence(self, v) -> int:
        return sum(self.mult(e) for e in self.out_edges(v))

    def explicit_depth(self, i) -> int:
        """Highest ray level whose group is known explicitly."""
        r = self.rays[i]
        return r.levels + 1 if r.explicit else 0

    def is_explicit(self, e) -> bool:
        if isinstance(e, str):
            return True
        kind, i, n = e
        return n + 1 <= self.explicit_depth(i)

    # groups
    def _ray_groups(self, i):
        if i in self._groups:
            return self._groups[i]
        r = self.rays[i]
        if not r.explicit:
            raise TruncationError(f"ray {i} carries orders only, no groups")
        g = self.g
        h = g.homs[r.attach_rho][2]
        Gu = g.vgroup(r.attach)
        amb_name = g.subgroups[r.chain[0]][0]
        A = g.groups[amb_name]
        levels = [(Gu, h)]                  # (group, embedding into A)
        for c in r.chain:
            levels.append(g.subgroups[c][1].as_group())
        # rho for up edge a_n: P_n -> P_{n+1} (inclusion through A)
        incl = []
        for n in range(len(levels) - 1):
            (Pn, en), (Pm, em) = levels[n], levels[n + 1]
            pos = {int(a): k for k, a in enumerate(em.image_of.tolist())}
            incl.append(Homomorphism(Pn, Pm, [pos[int(a)] for a in en.image_of], check=False))
        ident = [Homomorphism(P, P, np.arange(P.order), check=False) for P, _ in levels]
        self._groups[i] = (A, levels, incl, ident)
        return self._groups[i]

    def vertex_group(self, v) -> FiniteGroup:
        if isinstance(v, str):
            return self.g.vgroup(v)
        _, i, n = v
        A, levels, _, _ = self._ray_groups(i)
        if n >= len(levels):
            raise TruncationError(f"ray {i} level {n} is beyond the declared chain")
        return levels[n][0]

    def edge_group(self, e) -> FiniteGroup:
        if isinstance(e, str):
            return self.g.egroup(e)
        _, i, n = e
        return self.vertex_group(self.level_vertex(i, n))

    def rho(self, e) -> Homomorphism:
        """``rho_e: G_e -> G_{t(e)}``."""
        if isinstance(e, str):
            return self.g.rho(e)
        kind, i, n = e
        A, levels, incl, ident = self._ray_groups(i)
        if n + 1 >= len(levels):
            raise TruncationError(f"ray {i} level {n + 1} is beyond the declared chain")
        return incl[n] if kind == "up" else ident[n]

    def rho_bar(self, e) -> Homomorphism:
        """``rho_ebar: G_e -> G_{o(e)}``."""
        return self.rho(self.reverse(e))

    def edge_image(self, e) -> Subgroup:
        """``rho_ebar(G_e)`` inside ``G_{o(e)}``."""
        key = ("img", e)
        if key not in self._groups:
            self._groups[key] = self.rho_bar(e).image()
        return self._groups[key]

    def coset_labels(self, e) -> list:
        """Canonical left coset representatives of ``G_o / rho_ebar(G_e)``;
        plain ``range(mult)`` where the groups are not explicit."""
        if self.is_explicit(e):
            key = ("reps", e)
            if key not in self._groups:
                G = self.vertex_group(self.origin(e))
                self._groups[key] = coset_reps(G, self.edge_image(e))
            return self._groups[key]
        return list(range(self.mult(e)))

    def sort_key(self, e):
        if isinstance(e, str):
            return (0, e, 0, 0)
        kind, i, n = e
        return (1, "", i, 2 * n + (kind == "dn"))

    def name(self, x) -> str:
        if isinstance(x, str):
            return x
        if x[0] == "r":
            return f"ray{x[1]}.{x[2]}"
        kind, i, n = x
        return f"ray{i}.{'a' if kind == 'up' else 'b'}{n}"

    def parse_name(self, s):
        if s in self.g.vertices or s in self.g.edges:
            return s
        if s.startswith("ray"):
            head, tail = s[3:].split(".", 1)
            i = int(head)
            if tail[0] in "ab":
                return ("up" if tail[0] == "a" else "dn", i, int(tail[1:]))
            return ("r", i, int(tail))
        raise KeyError(s)

    def spanning_parent(self):
        """BFS tree of the core from the basepoint: vertex -> edge into it."""
        if "span" in self._groups:
            return self._groups["span"]
        bp = self.g.basepoint
        par = {bp: None}
        dq = deque([bp])
        while dq:
            v = dq.popleft()
            for e in self.out_edges(v):
                if not isinstance(e, str):
                    continue
                w = self.terminus(e)
                if w not in par:
                    par[w] = e
                    dq.append(w)
        self._groups["span"] = par
        return par

    def lift_pairs(self, v) -> tuple:
        """Vertex word of the chosen lift of ``v``: the spanning-tree path from
        the basepoint with every coset label 0. Ray vertices go up their ray."""
        if isinstance(v, tuple):
            _, i, n = v
            base = self.lift_pairs(self.rays[i].attach)
            return base + tuple((0, ("up", i, m)) for m in range(n))
        par = self.spanning_parent()
        out = []
        while par[v] is not None:
            e = par[v]
            out.append((0, e))
            v = self.origin(e)
        return tuple(reversed(out))

    # arithmetic caches (plain lists are much faster than numpy for scalars)
    def arith(self, v):
        """``(table, inverse)`` of ``G_v`` as nested Python lists."""
        key = ("arith", v)
        if key not in self._groups:
            G = self.vertex_group(v)
            self._groups[key] = (G.table.tolist(), G.inv.tolist())
        return self._groups[key]

    def edge_arith(self, e):
        """Per-edge data used by groupoid words.

        Returns ``(left_rep, bar_inv, rho)``: canonical left coset labels of
        ``G_o / rho_ebar(G_e)``, the inverse of ``rho_ebar`` on its image and
        the image list of ``rho_e``.
        """
        key = ("earith", e)
        if key not in self._groups:
            img = self.edge_image(e)
            bar = self.rho_bar(e).image_of.tolist()
            bar_inv = {b: a for a, b in enumerate(bar)}
            self._groups[key] = (img.left_rep.tolist(), bar_inv, self.rho(e).image_of.tolist())
        return self._groups[key]


def lift_valence(g: GraphOfGroups, v) -> int:
    """Valence of every tree vertex above ``v`` (core name or ray vertex name)."""
    Q = g.quotient
    if isinstance(v, str) and v not in g.vertices:
        try:
            v = Q.parse_name(v)
        except (KeyError, ValueError):
            raise GOGError(f"unknown vertex '{v}'", kind="reference") from None
    if isinstance(v, tuple) and v[1] not in Q.rays:
        raise GOGError(f"unknown vertex '{v}'", kind="reference")
    return Q.valence(v)
