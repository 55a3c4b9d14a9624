import numpy as np
import pytest

from arbocode.bass_serre import edge_reverse, edge_terminus, expand_ball, neighbors, vertex_end
from arbocode.collapse import (check_window, collapse_cusps, collapse_quotient, crush,
                               excursions, ray_level, sample_windows, star_shape,
                               suspension_check, window_vertices)
from arbocode.gog import parse_gog
from arbocode.library import CATALOG
from arbocode.shift import random_gamma

CUSPED = ["nagao_q2", "nagao_q3", "sl2f2", "pgl2_f2"]


def collapsed(name):
    g = CATALOG[name]()
    return g, collapse_cusps(g)


def test_identity_collapse_warns():
    g = CATALOG["f2"]()
    with pytest.warns(UserWarning, match="identity collapse"):
        cs = collapse_cusps(g)
    assert cs.graph == g and not cs.limit_vertex


@pytest.mark.parametrize("name,branches,star", [
    ("nagao_q2", 1, True), ("nagao_q3", 2, True), ("sl2f2", 3, True), ("pgl2_f2", None, False)])
def test_star_shape(name, branches, star):
    g, cs = collapsed(name)
    rep = star_shape(cs)
    assert rep["is_star"] == star
    assert rep["branches"] == len(g.rays)
    if branches is not None:
        assert rep["branches"] == branches
    assert rep["core_unchanged"] and rep["one_edge_per_branch"]
    assert rep["attaching_maps_injective"] and rep["edge_groups_finite"]


@pytest.mark.parametrize("name", CUSPED)
def test_limit_vertices_hold_top_stage(name):
    g, cs = collapsed(name)
    Q = g.quotient
    for r in g.rays:
        v = cs.limit_vertex[r.id]
        assert v in cs.graph.truncated
        assert cs.graph.vgroup(v).order == g.subgroups[r.chain[-1]][1].order
        e = cs.branch_edge[r.id]
        assert cs.graph.egroup(e).order == Q.vertex_group(r.attach).order


@pytest.mark.parametrize("name", CUSPED)
def test_collapse_idempotent_and_serializable(name):
    g, cs = collapsed(name)
    again = collapse_cusps(cs.graph)
    assert again.graph == cs.graph and not again.warnings
    back = parse_gog(cs.text())
    assert back == cs.graph
    assert back.truncated == cs.graph.truncated


def _walk(Q, x, prev, want):
    """Next tree edge from ``x`` matching ``want``, never backtracking."""
    for f in neighbors(Q, x, synthetic=True):
        if prev is not None and f == edge_reverse(Q, prev):
            continue
        if want(f[2]):
            return f
    raise AssertionError("no edge")


def _excursion_path(g, d):
    # core edge, d steps up the ray, d steps down a different branch, core edge
    Q = g.quotient
    path, x, prev = [], (), None
    plan = ([lambda e: isinstance(e, str)]
            + [lambda e, n=n: e == ("up", 0, n) for n in range(d)]
            + [lambda e, n=n: e == ("dn", 0, n) for n in reversed(range(d))]
            + [lambda e: isinstance(e, str)])
    for want in plan:
        f = _walk(Q, x, prev, want)
        path.append(f)
        prev, x = f, edge_terminus(Q, f)
    return path


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_excursion_return_time(d):
    g, cs = collapsed("nagao_q2")
    Q = g.quotient
    path = _excursion_path(g, d)
    xs = window_vertices(Q, path)
    assert excursions(Q, xs) == [(2, 2 * d, d)]
    rep = check_window(cs, path)
    taus = dict(rep["taus"])
    # entering level 1 takes one step; the rest of the excursion takes 2d - 1
    assert taus[1] == 1 and taus[2] == 2 * d - 1
    assert rep["excursions"] == [(d, 2 * d)]
    assert rep["commute_fail"] == 0 and rep["compact_segments"]


def test_window_avoiding_rays():
    g, cs = collapsed("nagao_q2")
    Q = g.quotient
    path, x, prev = [], (), None
    for _ in range(12):
        f = _walk(Q, x, prev, lambda e: isinstance(e, str))
        path.append(f)
        prev, x = f, edge_terminus(Q, f)
    rep = check_window(cs, path)
    assert all(t == 1 for _, t in rep["taus"]) and len(rep["taus"]) == 12
    xs = window_vertices(Q, path)
    assert [crush(Q, y) for y in xs] == [("v", y) for y in xs]


@pytest.mark.parametrize("name", CUSPED)
def test_suspension_on_sampled_windows(name):
    g, cs = collapsed(name)
    rep = suspension_check(g, cs, sample_windows(g, 100, 30, seed=1))
    assert rep["pass"], rep
    assert rep["commute_fail"] == 0 and rep["commute_pass"] > 0
    assert rep["excursions"] > 0


def _horoball_ball(g):
    Q = g.quotient
    depth = min(Q.explicit_depth(i) for i in Q.rays)
    out = []
    for x in expand_ball(g, depth + 2, synthetic=True).vertices:
        # keep vertices whose path from the basepoint stays within declared levels
        lvs = [ray_level(Q, x[:k]) for k in range(len(x) + 1)]
        if all(lv is None or lv[1] <= Q.explicit_depth(lv[0]) for lv in lvs):
            out.append(x)
    return out


def _act(w, y):
    return ("v", w.act_vertex(y[1])) if y[0] == "v" else ("lim", y[1], w.act_vertex(y[2]))


@pytest.mark.parametrize("name", ["nagao_q2", "nagao_q3", "sl2f2"])
def test_crush_is_equivariant(name):
    g = CATALOG[name]()
    Q = g.quotient
    xs = _horoball_ball(g)
    rng = np.random.default_rng(3)
    for _ in range(5):
        w = random_gamma(g, rng)
        for x in xs[::7]:
            assert crush(Q, w.act_vertex(x)) == _act(w, crush(Q, x))


@pytest.mark.parametrize("name", CUSPED)
def test_crush_covers_quotient_collapse(name):
    g, cs = collapsed(name)
    Q = g.quotient
    for x in _horoball_ball(g):
        y = crush(Q, x)
        below = vertex_end(Q, x) if y[0] == "v" else cs.limit_vertex[y[1]]
        assert collapse_quotient(cs, vertex_end(Q, x)) == below


def test_crush_separates_horoballs():
    g = CATALOG["nagao_q2"]()
    Q = g.quotient
    tops = {crush(Q, x) for x in _horoball_ball(g) if ray_level(Q, x)}
    # every horoball component reached from the basepoint ball has one image
    roots = {x for x in _horoball_ball(g) if ray_level(Q, x) == (0, 1)}
    assert len(tops) == len({crush(Q, x) for x in roots})
