import itertools

import pytest
from hypothesis import given, settings, strategies as st

from arbocode.grp import (FiniteGroup, GroupError, Homomorphism, Subgroup, all_subgroups,
                          check_monomorphism, cosets, coset_reps, cyclic_group,
                          direct_product, double_cosets, elementary_abelian,
                          subgroup_index, symmetric_group)

S3 = symmetric_group(3)



PERMS = sorted(itertools.permutations(range(3)))
TRANSPOSITION = PERMS.index((1, 0, 2))
THREE_CYCLE = PERMS.index((1, 2, 0))
GROUPS = {"S3": S3, "S4": symmetric_group(4), "Z12": cyclic_group(12),
          "Z2^3": elementary_abelian(2, 3), "Z2xZ4": direct_product(cyclic_group(2), cyclic_group(4))}


def test_s3_is_nonabelian():
    assert S3.order == 6 and not S3.is_abelian


@pytest.mark.parametrize("table, msg", [
    ([[0, 1], [1, 1]], "Latin"),
    ([[1, 0], [0, 1]], "identity"),
    ([[0, 1, 2], [1, 2, 0], [2, 1, 0]], "Latin"),
    ([[0, 1], [1, 2]], "out of range"),
])
def test_bad_tables(table, msg):
    with pytest.raises(GroupError, match=msg):
        FiniteGroup(table)


def test_check_monomorphism_examples():
    ident = Homomorphism(S3, S3, range(6))
    const = Homomorphism(S3, S3, [0] * 6)
    Z2 = cyclic_group(2)
    inc = Homomorphism(Z2, S3, [0, TRANSPOSITION])
    assert check_monomorphism(ident)
    assert not check_monomorphism(const)
    assert check_monomorphism(inc)


def test_non_homomorphism_rejected():
    with pytest.raises(GroupError, match="not a homomorphism"):
        Homomorphism(cyclic_group(3), cyclic_group(3), [0, 1, 1])


def test_cosets_extremes():
    assert len(cosets(S3, S3.whole())) == 1
    assert len(cosets(S3, S3.trivial())) == 6


def test_s3_transposition_cosets():
    H = S3.generated([TRANSPOSITION])
    cs = cosets(S3, H, "left")
    assert len(cs) == 3 and all(len(c.elements) == 2 for c in cs)
    assert len(cosets(S3, H, "right")) == 3


def test_s3_double_cosets():
    H = S3.generated([TRANSPOSITION])
    dcs = double_cosets(H, S3, H)
    assert sorted(len(d.elements) for d in dcs) == [2, 4]


def test_index_of_rotation_subgroup():
    assert subgroup_index(S3, S3.generated([THREE_CYCLE])) == 2


def test_subgroup_closure_enforced():
    with pytest.raises(GroupError, match="closed"):
        Subgroup(S3, [0, TRANSPOSITION, THREE_CYCLE])


def test_all_subgroups_counts():
    # S3 has 6 subgroups, S4 has 30, Z12 has one per divisor
    assert len(all_subgroups(S3)) == 6
    assert len(all_subgroups(GROUPS["S4"])) == 30
    assert len(all_subgroups(GROUPS["Z12"])) == 6


def test_as_group_embedding():
    H = GROUPS["S4"].generated([1, 5])
    K, emb = H.as_group()
    assert K.order == H.order
    assert check_monomorphism(emb)
    assert emb.image() == H


# property tests over random subgroups

@st.composite
def group_and_subgroups(draw):
    name = draw(st.sampled_from(sorted(GROUPS)))
    G = GROUPS[name]
    gens = lambda: draw(st.lists(st.integers(0, G.order - 1), max_size=2))
    return G, G.generated(gens()), G.generated(gens())


@settings(max_examples=60, deadline=None)
@given(group_and_subgroups())
def test_coset_partition(data):
    G, H, _ = data
    for side in ("left", "right"):
        cs = cosets(G, H, side)
        flat = sorted(x for c in cs for x in c.elements)
        assert flat == list(range(G.order))
        assert len(cs) == subgroup_index(G, H) == len(coset_reps(G, H, side))
        for c in cs:
            # brute-force coset from its representative
            if side == "left":
                expect = {G.mul(c.rep, h) for h in H}
            else:
                expect = {G.mul(h, c.rep) for h in H}
            assert set(c.elements) == expect and c.rep == min(expect)


@settings(max_examples=60, deadline=None)
@given(group_and_subgroups())
def test_double_coset_sizes(data):
    G, H, K = data
    dcs = double_cosets(H, G, K)
    assert sum(len(d.elements) for d in dcs) == G.order
    for d in dcs:
        brute = {G.mul(G.mul(h, d.rep), k) for h in H for k in K}
        assert set(d.elements) == brute
        # |HgK| = |H||K| / |H cap gKg^-1|
        inter = H.intersect(K.conjugate(d.rep))
        assert len(brute) * inter.order == H.order * K.order


@settings(max_examples=40, deadline=None)
@given(group_and_subgroups(), st.integers(0, 23))
def test_conjugate_is_subgroup(data, g):
    G, H, _ = data
    g %= G.order
    C = H.conjugate(g)
    Subgroup(G, C.elements)             # closure check
    assert C.order == H.order
