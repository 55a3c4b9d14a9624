import pytest

from arbocode import library
from arbocode.acyl import acylindricity, depth_bound, path_stabilizer, verify_witness
from arbocode.bass_serre import edge_reverse, edge_terminus, expand_ball, neighbors

from conftest import gog


def injective_paths(g, length, radius):
    """Every locally injective path of ``length`` tree edges starting within
    distance 1 of the basepoint lift (enough to meet every edge orbit)."""
    Q = g.quotient
    ball = expand_ball(g, radius)
    starts = [(x, c, e) for x in ball.vertices if len(x) <= 1 for (_, c, e) in neighbors(Q, x)]
    paths = [[f] for f in starts]
    for _ in range(length - 1):
        paths = [p + [h] for p in paths for h in neighbors(Q, edge_terminus(Q, p[-1]))
                 if h != edge_reverse(Q, p[-1])]
    return paths


def test_trivial_edge_groups_are_1_acylindrical():
    for g in (library.wedge(2), library.wedge(3), library.subdivided_wedge(2, 2)):
        rep = acylindricity(g)
        assert (rep.verdict, rep.k_min, rep.witness) == ("acylindrical", 1, None)


def test_z2_loop_witness():
    g = library.z2_loop()
    rep = acylindricity(g)
    assert rep.verdict == "not_acylindrical" and rep.k_min is None
    w = rep.witness
    # h is the vertex-group involution, g is the loop generator
    assert not w.h.pairs and w.h.carry == 1
    assert [e for _, e in w.g.pairs] == ["e1"]
    checks = verify_witness(g, w, 2 * rep.bound_used)
    assert all(checks.values())


@pytest.mark.parametrize("name", ["z2loop", "z2dec", "kleinamalgam"])
def test_witnesses_verify(name):
    g = gog(name)
    rep = acylindricity(g)
    assert rep.verdict == "not_acylindrical"
    w = rep.witness
    assert all(verify_witness(g, w, 4).values())
    assert w.h * w.g == w.g * w.h


def test_depth_bound_formula():
    # N' directed edges, N - 1 the largest edge group order
    for name in ("z2loop", "z2dec", "s3amalgam", "kleinamalgam"):
        g = gog(name)
        Nprime = len(g.edges)
        N = max(g.egroup(e).order for e in g.edges) + 1
        assert depth_bound(g) == Nprime * (N + 1)
    assert depth_bound(gog("z2loop")) == 8


@pytest.mark.parametrize("name", ["s3amalgam", "f2", "f2_sub2"])
def test_k_min_sound_and_sharp(name):
    # brute-force stabilizers of explicit tree paths
    g = gog(name)
    k = acylindricity(g).k_min
    for p in injective_paths(g, k, k + 2):
        assert len(path_stabilizer(g, p)) == 1
    if k > 1:
        assert any(len(path_stabilizer(g, p)) > 1 for p in injective_paths(g, k - 1, k + 1))


def test_s3_amalgam_k_min():
    assert acylindricity(gog("s3amalgam")).k_min == 2


@pytest.mark.parametrize("name", ["z2loop", "kleinamalgam"])
def test_non_acylindrical_has_long_fixed_paths(name):
    g = gog(name)
    assert any(len(path_stabilizer(g, p)) > 1 for p in injective_paths(g, 6, 7))


def test_ray_inputs_flag_truncation():
    rep = acylindricity(gog("nagao_q2"), witness=False)
    assert rep.truncated_rays
