"""Finite groups given by multiplication tables, with subgroups, homomorphisms
and coset spaces.

Element indices are 0-based and 0 is always the identity. Canonical
representatives are minimal element indices, so every listing below is
deterministic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class GroupError(ValueError):
    """Raised for malformed tables, maps or subgroup data."""


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=np.int64)
    out.setflags(write=False)
    return out


class FiniteGroup:
    """A finite group with elements ``0..order-1`` and a Cayley table.

    ``table[a, b]`` is the index of ``a*b``. The constructor checks that 0 is
    a two-sided identity, that every row and column is a permutation and
    that the product is associative.
    """

    def __init__(self, table, element_names: Sequence[str] | None = None,
                 name: str | None = None, check: bool = True):
        t = np.asarray(table, dtype=np.int64)
        if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] == 0:
            raise GroupError("table must be a non-empty square array")
        n = t.shape[0]
        self.order = int(n)
        self.table = _frozen(t)
        self.name = name
        if element_names is not None and len(element_names) != n:
            raise GroupError("element_names has wrong length")
        self.element_names = None if element_names is None else list(element_names)
        if check:
            self._check()
        inv = np.argmax(self.table == 0, axis=1)
        self.inv = _frozen(inv)

    def _check(self):
        t, n = self.table, self.order
        if t.min() < 0 or t.max() >= n:
            raise GroupError("table entries out of range")
        ar = np.arange(n)
        if not (np.array_equal(t[0], ar) and np.array_equal(t[:, 0], ar)):
            raise GroupError("element 0 is not a two-sided identity")
        srt = np.sort(t, axis=1)
        if not (srt == ar).all() or not (np.sort(t, axis=0) == ar[:, None]).all():
            raise GroupError("table is not a Latin square (missing inverses)")
        # (ab)c == a(bc): exhaustive for small orders, sampled rows above
        if n <= 64:
            rows = ar
        else:
            rows = np.random.default_rng(0).choice(n, size=64, replace=False)
        lhs = t[t[rows][:, :, None], ar[None, None, :]]
        rhs = t[rows[:, None, None], t[None, :, :]]
        if not np.array_equal(lhs, rhs):
            raise GroupError("table is not associative")

    # basic arithmetic
    def mul(self, a: int, b: int) -> int:
        return int(self.table[a, b])

    def inverse(self, a: int) -> int:
        return int(self.inv[a])

    def prod(self, elems: Iterable[int]) -> int:
        x = 0
        for g in elems:
            x = int(self.table[x, g])
        return x

    def conj(self, g: int, a: int) -> int:
        """``g a g^-1``."""
        return int(self.table[self.table[g, a], self.inv[g]])

    def element_order(self, a: int) -> int:
        k, x = 1, a
        while x != 0:
            x = int(self.table[x, a])
            k += 1
        return k

    @cached_property
    def is_abelian(self) -> bool:
        return bool(np.array_equal(self.table, self.table.T))

    def whole(self) -> "Subgroup":
        return Subgroup(self, range(self.order))

    def trivial(self) -> "Subgroup":
        return Subgroup(self, [0])

    def generated(self, gens: Iterable[int]) -> "Subgroup":
        return Subgroup(self, closure(self, gens))

    def __eq__(self, other):
        return isinstance(other, FiniteGroup) and np.array_equal(self.table, other.table)

    def __hash__(self):
        return hash((self.order, self.table.tobytes()))

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"<FiniteGroup{label} order={self.order}>"


def closure(G: FiniteGroup, gens: Iterable[int]) -> list[int]:
    """Elements of the subgroup generated by ``gens`` (sorted)."""
    seen = {0}
    frontier = [0]
    gens = [int(g) for g in gens]
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens:
                y = int(G.table[x, g])
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    return sorted(seen)


class Subgroup:
    """A subgroup of ``parent`` stored as a sorted tuple of element indices."""

    def __init__(self, parent: FiniteGroup, elements: Iterable[int], check: bool = True):
        els = tuple(sorted({int(x) for x in elements}))
        self.parent = parent
        self.elements = els
        self.element_set = frozenset(els)
        if check:
            if not els or els[0] != 0:
                raise GroupError("subgroup must contain the identity")
            if els[-1] >= parent.order or els[0] < 0:
                raise GroupError("subgroup element out of range")
            arr = np.array(els)
            prods = parent.table[np.ix_(arr, arr)]
            if not np.isin(prods, arr).all():
                raise GroupError("subset is not closed under the product")

    @property
    def order(self) -> int:
        return len(self.elements)

    def __contains__(self, g) -> bool:
        return int(g) in self.element_set

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __eq__(self, other):
        return (isinstance(other, Subgroup) and other.parent is self.parent
                and other.elements == self.elements) or (
            isinstance(other, Subgroup) and other.parent == self.parent
            and other.elements == self.elements)

    def __hash__(self):
        return hash(self.elements)

    def __le__(self, other: "Subgroup") -> bool:
        return self.element_set <= other.element_set

    def __lt__(self, other: "Subgroup") -> bool:
        return self.element_set < other.element_set

    def is_trivial(self) -> bool:
        return self.elements == (0,)

    def conjugate(self, g: int) -> "Subgroup":
        """``g H g^-1``."""
        G = self.parent
        return Subgroup(G, (G.conj(g, h) for h in self.elements), check=False)

    def intersect(self, other: "Subgroup") -> "Subgroup":
        return Subgroup(self.parent, self.element_set & other.element_set, check=False)

    @cached_property
    def left_rep(self) -> np.ndarray:
        """``left_rep[g]`` is the canonical representative of ``g H``."""
        arr = np.array(self.elements)
        return _frozen(self.parent.table[:, arr].min(axis=1))

    @cached_property
    def right_rep(self) -> np.ndarray:
        """``right_rep[g]`` is the canonical representative of ``H g``."""
        arr = np.array(self.elements)
        return _frozen(self.parent.table[arr, :].min(axis=0))

    def as_group(self) -> tuple[FiniteGroup, "Homomorphism"]:
        """Re-index the subgroup as a standalone group plus its embedding."""
        els = self.elements
        pos = {g: i for i, g in enumerate(els)}
        t = [[pos[int(self.parent.table[a, b])] for b in els] for a in els]
        H = FiniteGroup(t, check=False)
        return H, Homomorphism(H, self.parent, els, check=False)

    def __repr__(self):
        return f"<Subgroup order={self.order} of {self.parent!r}>"


class Homomorphism:
    """A group homomorphism given by the image of every source element."""

    def __init__(self, source: FiniteGroup, target: FiniteGroup, image_of,
                 check: bool = True):
        img = np.asarray(image_of, dtype=np.int64)
        if img.shape != (source.order,):
            raise GroupError("map must list one image per source element")
        if img.size and (img.min() < 0 or img.max() >= target.order):
            raise GroupError("map image out of range")
        self.source = source
        self.target = target
        self.image_of = _frozen(img)
        if check:
            if img[0] != 0:
                raise GroupError("map does not send identity to identity")
            lhs = img[source.table]
            rhs = target.table[img[:, None], img[None, :]]
            if not np.array_equal(lhs, rhs):
                raise GroupError("map is not a homomorphism")

    def __call__(self, a: int) -> int:
        return int(self.image_of[a])

    def image(self) -> Subgroup:
        return Subgroup(self.target, self.image_of.tolist(), check=False)

    @cached_property
    def _inverse_map(self) -> dict:
        out = {}
        for a, b in enumerate(self.image_of.tolist()):
            out.setdefault(b, a)
        return out

    def preimage_element(self, b: int) -> int:
        """The unique source element mapping to ``b`` (injective maps only)."""
        return self._inverse_map[int(b)]

    def preimage(self, H: Subgroup) -> Subgroup:
        return Subgroup(self.source, np.flatnonzero(np.isin(self.image_of, H.elements)),
                        check=False)

    def kernel(self) -> Subgroup:
        return Subgroup(self.source, np.flatnonzero(self.image_of == 0), check=False)

    def compose(self, other: "Homomorphism") -> "Homomorphism":
        """``self o other``."""
        return Homomorphism(other.source, self.target, self.image_of[other.image_of],
                            check=False)

    def __eq__(self, other):
        return (isinstance(other, Homomorphism) and self.source == other.source
                and self.target == other.target
                and np.array_equal(self.image_of, other.image_of))

    def __hash__(self):
        return hash(self.image_of.tobytes())


def check_monomorphism(h: Homomorphism) -> bool:
    return len(set(h.image_of.tolist())) == h.source.order


def _require_sub(G: FiniteGroup, H: Subgroup):
    if not isinstance(H, Subgroup) or H.parent != G:
        raise GroupError("subgroup does not belong to this group")


@dataclass(frozen=True)
class Coset:
    rep: int
    elements: tuple


@dataclass(frozen=True)
class DoubleCoset:
    rep: int
    elements: tuple


def cosets(G: FiniteGroup, H: Subgroup, side: str = "left") -> list[Coset]:
    """Partition of ``G`` into ``gH`` (left) or ``Hg`` (right) cosets."""
    _require_sub(G, H)
    if side not in ("left", "right"):
        raise GroupError("side must be 'left' or 'right'")
    lab = H.left_rep if side == "left" else H.right_rep
    out = {}
    for g, r in enumerate(lab.tolist()):
        out.setdefault(r, []).append(g)
    return [Coset(r, tuple(out[r])) for r in sorted(out)]


def coset_reps(G: FiniteGroup, H: Subgroup, side: str = "left") -> list[int]:
    _require_sub(G, H)
    lab = H.left_rep if side == "left" else H.right_rep
    return sorted(set(lab.tolist()))


def double_coset_labels(G: FiniteGroup, H: Subgroup, K: Subgroup) -> np.ndarray:
    """``lab[g]`` = minimal element of ``H g K``."""
    h = np.array(H.elements)
    k = np.array(K.elements)
    # all h*g*k for every g: shape (|G|, |H|, |K|)
    hg = G.table[h][:, :].T            # (|G|, |H|) = h*g
    hgk = G.table[hg[:, :, None], k[None, None, :]]
    return _frozen(hgk.reshape(G.order, -1).min(axis=1))


def double_cosets(H: Subgroup, G: FiniteGroup, K: Subgroup) -> list[DoubleCoset]:
    """Partition of ``G`` into ``H g K`` classes, sorted by representative."""
    _require_sub(G, H)
    _require_sub(G, K)
    lab = double_coset_labels(G, H, K)
    out = {}
    for g, r in enumerate(lab.tolist()):
        out.setdefault(r, []).append(g)
    return [DoubleCoset(r, tuple(out[r])) for r in sorted(out)]


def subgroup_index(G: FiniteGroup, H: Subgroup) -> int:
    _require_sub(G, H)
    if G.order % H.order:
        raise GroupError("subgroup order does not divide group order")
    return G.order // H.order


def all_subgroups(G: FiniteGroup) -> list[Subgroup]:
    """Every subgroup, found by closing pairs of cyclic subgroups repeatedly.

    Fine for the small groups used here (order up to a few dozen).
    """
    found = {(0,)}
    cyclic = {tuple(closure(G, [g])) for g in range(G.order)}
    found |= cyclic
    frontier = set(cyclic)
    while frontier:
        nxt = set()
        for A in frontier:
            for C in cyclic:
                if set(C) <= set(A):
                    continue
                S = tuple(closure(G, A + C))
                if S not in found:
                    found.add(S)
                    nxt.add(S)
        frontier = nxt
    return [Subgroup(G, s, check=False) for s in sorted(found, key=lambda s: (len(s), s))]


# constructors

def trivial_group() -> FiniteGroup:
    return FiniteGroup([[0]], name="1")


def cyclic_group(n: int) -> FiniteGroup:
    ar = np.arange(n)
    return FiniteGroup((ar[:, None] + ar[None, :]) % n, name=f"Z{n}")


def direct_product(A: FiniteGroup, B: FiniteGroup) -> FiniteGroup:
    """Elements ``a*|B| + b``; identity stays 0."""
    nb = B.order
    a = np.arange(A.order * nb) // nb
    b = np.arange(A.order * nb) % nb
    t = A.table[a[:, None], a[None, :]] * nb + B.table[b[:, None], b[None, :]]
    return FiniteGroup(t, check=False)


def elementary_abelian(p: int, k: int) -> FiniteGroup:
    """``(Z/p)^k`` with element index = base-p digits (first factor most significant)."""
    G = trivial_group()
    for _ in range(k):
        G = direct_product(G, cyclic_group(p))
    return G


def permutation_group(perms: Sequence[Sequence[int]], names=None) -> FiniteGroup:
    """Group table of an explicit list of permutations closed under composition.

    ``perms[0]`` must be the identity. The product ``a*b`` acts as ``b`` first,
    then ``a`` (function composition).
    """
    perms = [tuple(p) for p in perms]
    pos = {p: i for i, p in enumerate(perms)}
    if perms[0] != tuple(range(len(perms[0]))):
        raise GroupError("first permutation must be the identity")
    t = [[pos[tuple(a[x] for x in b)] for b in perms] for a in perms]
    return FiniteGroup(t, element_names=names)


def symmetric_group(n: int) -> FiniteGroup:
    perms = sorted(itertools.permutations(range(n)))
    return permutation_group(perms)
