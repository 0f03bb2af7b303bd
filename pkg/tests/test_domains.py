import numpy as np
import pytest
from hypothesis import given, strategies as st

from corona_tst.domains import (DomainError, ball_domain, cantor_squares, domain_from_spec, four_corner_cantor,
                                half_space, koch_snowflake, koch_vertices, lipschitz_graph_domain, polygon_domain,
                                square_domain)


def _fixtures():
    return [
        ("disk", ball_domain(), 1e-2),
        ("square", square_domain(2.0, (-1.0, -1.0)), 1e-2),
        ("snowflake2", koch_snowflake(2), 5e-3),
        ("graph", lipschitz_graph_domain([[-1.0, 0.0], [-0.3, 0.4], [0.4, -0.3], [1.0, 0.0]]), 1e-2),
        ("cantor2", four_corner_cantor(2)[1], 2e-3),
    ]


@pytest.mark.parametrize("name,dom,h", _fixtures(), ids=[f[0] for f in _fixtures()])
def test_oracle_matches_brute_force(name, dom, h):
    S = dom.boundary_samples(h)
    rng = np.random.default_rng(0)
    lo, hi = S.points.min(0) - 0.2, S.points.max(0) + 0.2
    if name == "graph":
        # the graph continues past the sampled window; stay well inside it
        lo, hi = np.array([-0.5, -0.5]), np.array([0.5, 0.5])
    q = lo + (hi - lo) * rng.random((1000, 2))
    brute = S.tree.query(q)[0]
    assert np.all(np.abs(dom.dist_boundary(q) - brute) <= 2 * h)


@pytest.mark.parametrize("name,dom,h", _fixtures(), ids=[f[0] for f in _fixtures()])
def test_samples_lie_on_boundary(name, dom, h):
    S = dom.boundary_samples(h)
    assert np.all(dom.dist_boundary(S.points) <= h)


def test_disk_inside_and_distance():
    d = ball_domain()
    pts = np.array([[0.0, 0.0], [0.5, 0.0], [2.0, 0.0]])
    assert list(d.inside(pts)) == [True, True, False]
    assert np.allclose(d.dist_boundary(pts), [1.0, 0.5, 1.0])


def test_half_plane_distance():
    d = half_space()
    assert np.allclose(d.dist_boundary(np.array([[3.0, 0.25]])), 0.25)
    assert not d.inside(np.array([[0.0, -1.0]]))[0]


def test_square_distance_at_centre():
    assert square_domain(2.0, (-1.0, -1.0)).dist_boundary(np.zeros((1, 2)))[0] == pytest.approx(1.0)


def test_snowflake_perimeter_and_vertex_count():
    # each iteration multiplies the edge count by 4 and the perimeter by 4/3
    v0 = koch_vertices(0)
    edge = np.linalg.norm(v0[1] - v0[0])
    for k in range(4):
        v = koch_vertices(k)
        assert len(v) == 3 * 4 ** k
        per = np.sum(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1))
        assert per == pytest.approx(3 * edge * (4 / 3) ** k, rel=1e-12)


def test_self_intersecting_polygon_rejected():
    with pytest.raises(DomainError):
        polygon_domain([[0, 0], [1, 1], [1, 0], [0, 1]])


@pytest.mark.parametrize("j", [1, 2, 3])
def test_cantor_squares_count_and_side(j):
    centers, side, words = cantor_squares(j)
    assert len(centers) == 4 ** j
    assert side == pytest.approx(4.0 ** -j)
    # squares are pairwise disjoint
    gaps = np.abs(centers[:, None, :] - centers[None]).max(axis=2)
    np.fill_diagonal(gaps, np.inf)
    assert gaps.min() >= side - 1e-12


@given(st.integers(0, 3))
def test_spec_round_trip(k):
    dom = koch_snowflake(k)
    again = domain_from_spec(dom.spec)
    q = np.array([[0.1, 0.2], [0.0, 0.0], [0.4, -0.3]])
    assert np.array_equal(dom.dist_boundary(q), again.dist_boundary(q))


def test_unknown_kind():
    with pytest.raises(DomainError):
        domain_from_spec({"kind": "torus"})
