import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arbocode import library
from arbocode.bass_serre import (Word, ball_counts, expand_ball, length_invariants, nb_matrix,
                                 orbit_sphere_counts, poincare_partial, sphere_counts,
                                 tree_distance, volume_entropy)
from arbocode.gog import TruncationError
from arbocode.shift import build_subshift, random_gamma


def test_ball_examples():
    assert len(expand_ball(library.wedge(2), 2).vertices) == 1 + 4 + 12
    assert len(expand_ball(library.z2_loop(), 3).vertices) == 7
    assert len(expand_ball(library.wedge(2), 0).vertices) == 1


@pytest.mark.parametrize("m", [2, 3, 4])
def test_wedge_sphere_sizes(m):
    q = 2 * m - 1
    ball = expand_ball(library.wedge(m), 5)
    assert ball.sphere_sizes() == [1] + [2 * m * q ** (n - 1) for n in range(1, 6)]
    assert sphere_counts(library.wedge(m), 5) == ball.sphere_sizes()


@pytest.mark.parametrize("name", ["z2dec", "s3amalgam", "kleinamalgam", "f2_sub2", "nagao_q2",
                                  "pgl2_f2", "sl2f2"])
def test_counting_matches_ball(name, load):
    g = load(name)
    assert sphere_counts(g, 5) == expand_ball(g, 5, synthetic=True).sphere_sizes()


def test_ball_is_a_tree(load):
    ball = expand_ball(load("s3amalgam"), 5)
    assert len(ball.edges) == 2 * (len(ball.vertices) - 1)
    assert len(set(ball.vertices)) == len(ball.vertices)


def test_ball_refuses_unknown_ray_levels(load):
    g = load("nagao_q2")
    with pytest.raises(TruncationError):
        expand_ball(g, 9)
    assert len(expand_ball(g, 9, synthetic=True).vertices) == ball_counts(g, 9)[-1]


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_entropy_of_wedges(m):
    ent = volume_entropy(library.wedge(m))
    assert ent.exact
    assert ent.value == pytest.approx(math.log(2 * m - 1), abs=1e-15)


@pytest.mark.parametrize("p", [2, 3])
def test_entropy_of_subdivision(p):
    ent = volume_entropy(library.subdivided_wedge(2, p))
    assert ent.exact and (ent.base, ent.root) == (3, p)
    assert ent.value == pytest.approx(math.log(3) / p, abs=1e-12)


def test_line_has_zero_entropy():
    assert volume_entropy(library.wedge(1)).value == 0.0


def test_non_backtracking_matrix_wedge():
    edges, M = nb_matrix(library.wedge(2))
    assert M.shape == (4, 4)
    assert (M.sum(axis=1) == 3).all()
    for k, e in enumerate(edges):
        assert M[k, edges.index(library.wedge(2).edges[e].reverse)] == 0


@pytest.mark.parametrize("name", ["z2dec", "s3amalgam", "f3"])
def test_entropy_matches_counting_slope(name, load):
    g = load(name)
    b = np.log(np.array(ball_counts(g, 40), dtype=float))
    R = np.arange(20, 41)
    slope = np.polyfit(R, b[20:], 1)[0]
    assert abs(slope - volume_entropy(g).value) < 1e-3


def test_sphere_counts_within_constants(load):
    g = load("s3amalgam")
    d = volume_entropy(g).value
    s = np.array(sphere_counts(g, 30)[1:], dtype=float)
    ratio = s / np.exp(d * np.arange(1, 31))
    assert ratio.max() / ratio.min() < 10


def test_poincare_large_s_is_stabilizer_order(load):
    for name in ("f2", "z2dec"):
        g = load(name)
        assert poincare_partial(g, 60.0, 10) == pytest.approx(g.vgroup(g.basepoint).order)


def test_poincare_diverges_at_critical_exponent():
    g = library.wedge(2)
    vals = [poincare_partial(g, math.log(3), R) for R in (10, 20, 30, 40)]
    steps = np.diff(vals)
    # sphere n contributes 4 * 3^(n-1) / 3^n = 4/3
    assert np.allclose(steps, 10 * 4 / 3)


def test_poincare_converges_above_critical_exponent():
    g = library.wedge(2)
    s = math.log(3) + 1
    assert abs(poincare_partial(g, s, 40) - poincare_partial(g, s, 39)) < 1e-6
    assert all(a <= b for a, b in zip(*[[poincare_partial(g, s, R) for R in r]
                                        for r in (range(1, 20), range(2, 21))]))


def test_orbit_counts_free_group():
    # free action: every tree vertex is an orbit point
    g = library.wedge(2)
    assert orbit_sphere_counts(g, 6) == sphere_counts(g, 6)


def test_length_invariants_examples():
    f2 = library.wedge(2)
    rep = length_invariants(f2, build_subshift(f2, 1))
    assert (rep.lam, rep.L_exact, rep.sandwich_ok) == (1, 1, True)
    sub = library.subdivided_wedge(2, 2)
    rep = length_invariants(sub, build_subshift(sub, 1))
    assert (rep.lam, rep.L_exact, rep.sandwich_ok) == (2, 2, True)
    line = library.wedge(1)
    assert length_invariants(line, build_subshift(line, 1)).elementary


def test_length_invariants_relabelling(load):
    # renaming edges changes the alphabet order but not the cycle gcd
    from arbocode.gog import parse_gog, serialize_gog
    text = serialize_gog(load("s3amalgam"))
    for a, b in (("c", "zz_c"), ("cbar", "aa_cbar")):
        text = text.replace(f" {a} ", f" {b} ")
    g2 = parse_gog(text)
    assert g2.edges.keys() == {"zz_c", "aa_cbar"}
    L1 = length_invariants(load("s3amalgam"), build_subshift(load("s3amalgam"), 1)).L_exact
    L2 = length_invariants(g2, build_subshift(g2, 1)).L_exact
    assert L1 == L2


# the fundamental group acting on the tree

SEEDED = ["s3amalgam", "z2dec", "kleinamalgam", "f2_sub2"]


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(SEEDED), st.integers(0, 2 ** 32 - 1))
def test_word_group_laws(name, seed):
    from conftest import gog
    g = gog(name)
    rng = np.random.default_rng(seed)
    a, b, c = (random_gamma(g, rng) for _ in range(3))
    one = Word.identity(g.quotient)
    assert a * a.inverse() == one == a.inverse() * a
    assert (a * b) * c == a * (b * c)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(SEEDED), st.integers(0, 2 ** 32 - 1))
def test_action_is_an_isometry(name, seed):
    from conftest import gog
    g = gog(name)
    rng = np.random.default_rng(seed)
    a, b = random_gamma(g, rng), random_gamma(g, rng)
    verts = expand_ball(g, 3).vertices
    xs = [verts[int(i)] for i in rng.integers(len(verts), size=6)]
    for x in xs:
        assert (a * b).act_vertex(x) == a.act_vertex(b.act_vertex(x))
        for y in xs:
            assert tree_distance(a.act_vertex(x), a.act_vertex(y)) == tree_distance(x, y)
