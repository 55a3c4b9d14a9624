import math
from fractions import Fraction

import numpy as np
import pytest

from arbocode.library import CATALOG
from arbocode.markov import (build_gf_coding, build_return_coding, chain_entropy_rate,
                             check_return_identities, entropy_hP, gf_identities,
                             gf_level_for_tail, kappa_check, markov_ratio_check,
                             random_geodesic, two_step_spec, verdict)
from arbocode.ps import solve_ps
from arbocode.shift import build_subshift


def setup(name):
    g = CATALOG[name]()
    return g, solve_ps(g)


# return coding

def test_return_coding_free_group():
    g, ps = setup("f2")
    rc = build_return_coding(g, ps, 1)
    assert len(rc.S) == 4
    assert all(x == Fraction(1, 4) for x in rc.nu)
    for a in range(4):
        assert len(rc.succ[a]) == 3
        assert all(rc.pi[(a, b)] == Fraction(1, 3) for b in rc.succ[a])
    rep = check_return_identities(rc)
    assert rep["sum_nu"] == 1 and rep["tail_mass_bound"] == 0 and rep["complete"]
    assert rep["row_sum_residual"] == 0 and rep["stationarity_residual"] == 0
    assert rep["cylinder_mismatches"] == 0


def test_return_coding_decorated_loop_by_hand():
    # six neighbours of the basepoint, each reached through a carry of order 2
    g, ps = setup("z2dec")
    rc = build_return_coding(g, ps, 2)
    assert len(rc.S) == 12
    assert all(x == Fraction(1, 12) for x in rc.nu)
    for a in range(12):
        assert len(rc.succ[a]) == 10
        assert all(rc.pi[(a, b)] == Fraction(1, 10) for b in rc.succ[a])
    rep = check_return_identities(rc)
    assert rep["normalization"] == Fraction(5, 12)
    assert rep["sum_nu"] == 1 and rep["cylinder_mismatches"] == 0
    assert rep["stationarity_residual"] == 0


@pytest.mark.parametrize("name,R", [("f2", 3), ("f3", 1), ("s3amalgam", 4)])
def test_return_identities_complete(name, R):
    g, ps = setup(name)
    rep = check_return_identities(build_return_coding(g, ps, R))
    assert rep["complete"] and rep["sum_nu"] == 1
    assert rep["row_sum_residual"] < 1e-12 and rep["stationarity_residual"] < 1e-12
    assert rep["cylinder_mismatches"] == 0


def test_return_tail_shrinks_with_radius():
    g, ps = setup("nagao_q2")
    reps = [check_return_identities(build_return_coding(g, ps, R)) for R in (8, 12)]
    for rep in reps:
        assert not rep["complete"]
        assert rep["sum_nu"] + rep["tail_mass_bound"] == 1
        assert rep["cylinder_mismatches"] == 0
    assert reps[1]["tail_mass_bound"] < reps[0]["tail_mass_bound"]
    assert [r["tail_mass_bound"] for r in reps] == [Fraction(1, 48), Fraction(1, 192)]


# geometrically finite coding

def test_gf_free_group():
    g, ps = setup("f2")
    gf = build_gf_coding(g, ps, 0)
    assert len(gf.alphabet) == 4
    assert all(gf.pi[(a, b)] == Fraction(1, 3) for a in range(4) for b in gf.succ[a])
    rows = gf.full_rows()
    assert chain_entropy_rate(gf.nu, gf.succ, gf.pi, rows) == pytest.approx(math.log(3))
    h, tail = entropy_hP(gf)
    assert h == pytest.approx(math.log(4)) and tail == 0


@pytest.mark.parametrize("name,per_sign", [("sl2f2", 1), ("nagao_q3", 2), ("nagao_q2", 1)])
def test_cusp_letters_per_level(name, per_sign):
    g, ps = setup(name)
    gf = build_gf_coding(g, ps, 3)
    for ray in g.rays:
        for n in range(4):
            for s in "+-":
                k = sum(1 for a in gf.alphabet if a[0] == s and a[1:3] == (ray.id, n))
                assert k == per_sign


@pytest.mark.parametrize("name", ["nagao_q2", "nagao_q3", "sl2f2", "f2_sub2"])
def test_gf_identities(name):
    g, ps = setup(name)
    rep = gf_identities(build_gf_coding(g, ps, 3))
    assert rep["rows_checked"] > 0 and rep["row_sum_residual"] < 1e-12
    assert rep["columns_checked"] > 0 and rep["stationarity_residual"] < 1e-12
    assert rep["positive"] and rep["admissibility_kappa"]


@pytest.mark.parametrize("turn,expect_same", [("inverse", False), ("geometric", True)])
def test_forced_turn_rule(turn, expect_same):
    g, ps = setup("nagao_q3")
    gf = build_gf_coding(g, ps, 3, turn)
    A = gf.alphabet
    q = 3
    for k, a in enumerate(A):
        if a[0] != "+":
            continue
        (b,) = [A[j] for j in gf.succ[k]]
        assert b[0] == "-" and b[1:3] == a[1:3]
        # cosets at level n are labelled by multiples of q^n modulo q^(n+1)
        step = q ** a[2]
        inv = (q ** (a[2] + 1) - a[3]) % q ** (a[2] + 1)
        assert a[3] % step == 0
        assert b[3] == (a[3] if expect_same else inv)


def test_turn_rules_agree_for_involutions():
    g, ps = setup("nagao_q2")
    a = build_gf_coding(g, ps, 4, "inverse")
    b = build_gf_coding(g, ps, 4, "geometric")
    assert a.succ == b.succ and a.pi == b.pi


def test_bar_is_involution():
    g, ps = setup("nagao_q3")
    gf = build_gf_coding(g, ps, 3)
    for a in gf.alphabet:
        assert gf.bar[gf.bar[a]] == a


@pytest.mark.parametrize("name,turn,ok", [
    ("nagao_q2", "inverse", True), ("sl2f2", "inverse", True),
    ("nagao_q3", "inverse", False), ("nagao_q3", "geometric", True)])
def test_letters_along_geodesics(name, turn, ok):
    g, ps = setup(name)
    gf = build_gf_coding(g, ps, 5, turn)
    rng = np.random.default_rng(0)
    paths = [random_geodesic(g, 30, rng) for _ in range(60)]
    rep = kappa_check(gf, paths)
    assert rep["reversal_ok"] == 60
    assert (rep["admissible"] == 60) == ok


@pytest.mark.parametrize("level", [0, 1, 2])
def test_reversal_past_the_coding_level(level):
    # paths climb to the explicit depth, above the retained letters
    g, ps = setup("nagao_q3")
    gf = build_gf_coding(g, ps, level, "geometric")
    rng = np.random.default_rng(5)
    rep = kappa_check(gf, [random_geodesic(g, 30, rng) for _ in range(30)])
    assert rep["reversal_ok"] == 30 and rep["admissible"] == 30


def test_entropy_level_for_tail():
    g, ps = setup("nagao_q2")
    L = gf_level_for_tail(g, ps)
    h, tail = entropy_hP(build_gf_coding(g, ps, L))
    assert tail < 1e-6
    h2, tail2 = entropy_hP(build_gf_coding(g, ps, L + 2))
    assert tail2 < tail
    assert abs(h2 - h) < 1e-6
    assert h <= h2 + 1e-12 <= h + tail + 1e-12


@pytest.mark.parametrize("name", ["nagao_q2", "sl2f2"])
def test_chain_entropy_below_partition_entropy(name):
    g, ps = setup(name)
    gf = build_gf_coding(g, ps, 4)
    h, tail = entropy_hP(gf)
    assert chain_entropy_rate(gf.nu, gf.succ, gf.pi, gf.full_rows()) <= h + tail


def _admissible_words(gf, length, max_level):
    A = gf.alphabet
    low = [a[0] == "e" or a[2] <= max_level for a in A]
    words = [[k] for k in range(len(A)) if low[k]]
    for _ in range(length - 1):
        words = [w + [b] for w in words for b in gf.succ[w[-1]] if low[b]]
    return [[A[k] for k in w] for w in words]


def test_cylinder_ratios_equal_transition_probabilities():
    g, ps = setup("nagao_q2")
    gf = build_gf_coding(g, ps, 5)
    words = _admissible_words(gf, 6, 1)
    assert len(words) > 100
    for w in words[::4]:
        rep = markov_ratio_check(gf, w[:5], w[5])
        assert rep["constant"] and rep["matches_pi"], [gf.letter_name(a) for a in w]


# verdicts

def test_verdict_free_group():
    g, ps = setup("f2")
    v = verdict(g, build_gf_coding(g, ps, 0).spec(), ps)
    assert v.period == 1 and v.mixing
    assert v.bernoulli_claim == "bernoulli_finite_entropy"


def test_verdict_subdivided_period_two():
    g, ps = setup("f2_sub2")
    v = verdict(g, build_gf_coding(g, ps, 0).spec(), ps)
    assert v.period == 2 and not v.mixing
    assert v.bernoulli_claim == "square_bernoulli_on_even_part"
    assert v.two_step == {"letters": 16, "classes": 2, "periods": [1, 1], "aperiodic": True}
    assert any("valence 2" in n for n in v.notes)


def test_verdict_several_classes():
    g = CATALOG["z2loop"]()
    v = verdict(g, build_subshift(g, 1), None)
    assert len(v.classes) == 2
    assert v.bernoulli_claim == "not_applicable"


def test_two_step_doubles_the_walk():
    g, ps = setup("f2_sub2")
    spec = build_gf_coding(g, ps, 0).spec()
    ts = two_step_spec(spec)
    M = np.zeros((len(spec.alphabet),) * 2, dtype=np.int64)
    for a, s in enumerate(spec.succ):
        M[a, s] = 1
    # paths of length 2m in the old graph equal paths of length m in the new one
    T = np.zeros((len(ts.alphabet),) * 2, dtype=np.int64)
    for a, s in enumerate(ts.succ):
        T[a, s] = 1
    for m in (1, 2, 3):
        old = int(np.linalg.matrix_power(M, 2 * m + 1).sum())
        new = int(np.linalg.matrix_power(T, m).sum())
        assert old == new
