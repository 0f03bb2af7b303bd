"""Worked examples checked against values computed independently of the
package: closed forms, hand runs and frozen brute-force results."""
import math

import numpy as np
import pytest
from scipy.spatial.distance import pdist, squareform

from corona_tst.acceptance import cantor_lattice, disk_arc, halfplane_interval
from corona_tst.beta import _BilateralObjective, baup_test, beta_content, beta_inf, bilateral_beta
from corona_tst.beta import blwg_sum, beta_table, BetaParams, linear_deviation
from corona_tst.corona import find_corkscrew, frostman_regularize
from corona_tst.cubes import build_lattice, build_nets, stopping_region
from corona_tst.domains import ball_domain, corner_set, four_corner_cantor, half_space, polyline_set
from corona_tst.domains import lipschitz_graph_domain, segment_set
from corona_tst.geometry import Ball, Plane, SampledSet, hausdorff_content, normalized_distance
from corona_tst.geometry import plane_distance_stats
from corona_tst.green import whitney_cubes
from corona_tst.harmonic import WosConfig, check_bourgain, check_doubling, hruscev_bound, wos_measure

# Frozen by scripts/line_grid_oracle.py (360 angles x 200 offsets).
GRID_CIRCLE = 0.854676
GRID_CORNER = 0.186419
GRID_HALFLINE = 0.708543
GRID_CANTOR1 = 0.712132

# Exhaustive dyadic-cover minimum (depth 6, true set diameters) for K_2 in
# B(0, √2/2); equals the diameter of K_2 itself.
K2_CONTENT = 0.9722718241315028


def _line(y: float, h: float = 1e-3, half: float = 2.0) -> SampledSet:
    xs = np.arange(-half, half + h / 2, h)
    return SampledSet(np.c_[xs, np.full_like(xs, y)], h, 1)


def _x_axis() -> Plane:
    return Plane.from_directions([0.0, 0.0], [[1.0, 0.0]])


# --- content and distances ---------------------------------------------------

def test_k2_content_against_exhaustive_covers():
    S, _ = four_corner_cantor(2)
    v = hausdorff_content(S, Ball(np.zeros(2), math.sqrt(2) / 2), 1)
    assert v == pytest.approx(K2_CONTENT, rel=0.02)


def test_normalized_distance_between_parallel_lines():
    B = Ball(np.zeros(2), 1.0)
    assert normalized_distance(_line(0.0), _line(0.1), B).value == pytest.approx(0.1, abs=1e-9)


def test_normalized_distance_between_axes():
    xs = np.arange(-2, 2 + 5e-4, 1e-3)
    y_axis = SampledSet(np.c_[np.zeros_like(xs), xs], 1e-3, 1)
    assert normalized_distance(_line(0.0), y_axis, Ball(np.zeros(2), 1.0)).value == pytest.approx(1.0, abs=1e-3)


@pytest.fixture(scope="module")
def parallel():
    h = 1e-3
    xs = np.arange(-0.5, 0.5 + h / 2, h)
    pts = np.r_[np.c_[xs, np.full_like(xs, 0.2)], np.c_[xs, np.full_like(xs, -0.2)]]
    return SampledSet(pts, h, 1)


def test_parallel_segments_profile(parallel):
    # one set covers both segments: content = diameter √(1 + 0.4²)
    st = plane_distance_stats(parallel, Ball(np.zeros(2), 1.0), _x_axis())
    below, above = st.profile[st.t < 0.195], st.profile[st.t > 0.205]
    assert np.allclose(below, math.sqrt(1.16), atol=3e-3)
    assert np.all(above == 0)


def test_parallel_segments_beta_closed_form(parallel):
    # β² = ∫_0^0.2 √1.16 · t dt
    exact = math.sqrt(math.sqrt(1.16) * 0.2 ** 2 / 2)
    assert beta_content(parallel, Ball(np.zeros(2), 1.0), _x_axis()) == pytest.approx(exact, rel=0.03)


# --- nets and cubes -------------------------------------------------------------

def test_greedy_net_hand_run():
    S = SampledSet(np.c_[[0.0, 0.3, 0.6, 1.0], np.zeros(4)], 0.01, 1)
    nets = build_nets(S, 0.5, 1)
    assert [S.points[nets[1], 0].tolist()] == [[0.0, 0.6]]


def test_circle_nets_are_maximal_independent_sets():
    phi = np.linspace(0, 2 * np.pi, 1000, endpoint=False)
    S = SampledSet(np.c_[np.cos(phi), np.sin(phi)], 2 * np.pi / 1000, 1)
    nets = build_nets(S, 0.5, 4)
    D = squareform(pdist(S.points))
    sizes = []
    for k, net in enumerate(nets):
        sep = 0.5 ** k * 2.0
        sub = D[np.ix_(net, net)]
        assert np.all(sub[np.triu_indices(len(net), 1)] > sep)
        assert np.all(D[:, net].min(axis=1) <= sep)
        sizes.append(len(net))
    growth = np.array(sizes[2:]) / np.array(sizes[1:-1])
    assert np.all((growth > 1.5) & (growth < 2.5))


def test_segment_lattice_is_interval_partition():
    lat = build_lattice(segment_set(2e-3), 0.5, 4)
    assert lat.c0_eff >= 0.2
    x = lat.source.points[:, 0]
    for lev in lat.levels:
        spans = sorted((x[q.members].min(), x[q.members].max(), len(q.members)) for q in lev)
        for lo, hi, n in spans:
            assert n == np.count_nonzero((x >= lo) & (x <= hi))
        for (_, hi, _), (lo, _, _) in zip(spans, spans[1:]):
            assert hi < lo


def test_cantor_cubes_follow_generation_squares():
    S, dom, lat = cantor_lattice(3)
    leaf_words = dom.words[S.labels]
    for lev in lat.levels:
        for q in lev:
            m = q.level // 2
            prefixes = {tuple(w[:m]) for w in leaf_words[q.members]}
            assert len(prefixes) == 1


def test_stop_on_one_grandchild(disk_lattice):
    _, _, lat = disk_lattice
    root = (0, 0)
    parent = next(c for c in lat.cube(root).children if lat.cube(c).children)
    g = lat.cube(parent).children[0]
    reg = stopping_region(lat, root, lambda c: c == g)
    assert reg.stop == [parent]
    for sib in lat.cube(root).children:
        if sib != parent:
            assert set(lat.descendants(sib)) <= reg.cubes
    assert not set(lat.cube(parent).children) & reg.cubes


# --- β numbers against the brute-force line grid -----------------------------

@pytest.mark.parametrize("name", ["circle", "corner"])
def test_beta_inf_within_five_percent_of_line_grid(name):
    if name == "circle":
        S, B, v = ball_domain().boundary_samples(2e-3), Ball(np.zeros(2), 1.1), GRID_CIRCLE
    else:
        S, B, v = corner_set(2e-3), Ball(np.zeros(2), 1.0), GRID_CORNER
    assert 0 < v <= 1
    assert beta_inf(S, B, 1).value <= 1.05 * v


def test_half_line_bilateral_beta():
    S = polyline_set([(0.0, 0.0), (1.0, 0.0)], 2e-3)
    B = Ball(np.zeros(2), 1.0)
    obj = _BilateralObjective(S, B)
    for th in np.linspace(0, np.pi, 37, endpoint=False):
        assert obj(Plane.from_directions([0.0, 0.0], [[np.cos(th), np.sin(th)]])) >= 0.5 - 1e-9
    assert bilateral_beta(S, B).value <= 1.05 * GRID_HALFLINE


def test_cantor1_bilateral_beta():
    S, _ = four_corner_cantor(1)
    lo, hi = S.points.min(axis=0), S.points.max(axis=0)
    B = Ball((lo + hi) / 2, S.diameter / 2)
    assert bilateral_beta(S, B).value <= 1.05 * GRID_CANTOR1


def test_cantor1_needs_more_than_two_lines():
    S, _ = four_corner_cantor(1)
    lo, hi = S.points.min(axis=0), S.points.max(axis=0)
    assert not baup_test(S, Ball((lo + hi) / 2, S.diameter / 2), 0.05, max_planes=2).passes


def test_circle_deviation_stable_under_refinement():
    S = ball_domain().boundary_samples(2e-3)
    tot = [linear_deviation(build_lattice(S, 0.5, k), S, (0, 0)).total for k in (4, 6)]
    assert tot[1] == pytest.approx(tot[0], rel=0.10)


def test_corner_blwg_counts_cubes_at_the_corner():
    # the non-flat points of the polyline are its corner and its two ends
    S = corner_set(2e-3)
    lat = build_lattice(S, 0.5, 5)
    recs = beta_table(lat, S, (0, 0), BetaParams())
    eps = 0.05
    kinks = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    for cid, r in recs.items():
        q = lat.cube(cid)
        reach = np.min(np.linalg.norm(kinks - q.center, axis=1)) / q.side
        if reach <= 1.9:
            assert r.bbeta >= eps, cid
        elif reach >= 2.1:
            assert r.bbeta < eps, cid
    expected = sum(lat.cube(c).side for c, r in recs.items() if r.bbeta >= eps)
    assert blwg_sum(lat, recs, (0, 0), eps) == pytest.approx(expected)


# --- harmonic measure ----------------------------------------------------------

@pytest.mark.parametrize("theta", [np.pi / 6, np.pi / 3])
def test_disk_arc_from_centre(theta):
    dom = ball_domain()
    half = theta / 2
    target = ("arc", Ball(np.array([1.0, 0.0]), 2 * math.sin(half / 2) + 1e-12))
    est = wos_measure(dom, np.zeros(2), [target], WosConfig(walkers=20_000, shell=1e-5))
    truth = disk_arc(np.zeros(2), 0.0, half)
    assert truth == pytest.approx(theta / (2 * np.pi))
    assert abs(est.mass("arc") - truth) <= 3 * est.stderr("arc") + 1e-3


def test_bourgain_on_the_half_plane():
    rep = check_bourgain(half_space(), Ball(np.zeros(2), 0.5), 8, WosConfig(walkers=2000, shell=1e-5))
    assert rep.minimum >= 0.5 - 3 * rep.stderr
    exact = [halfplane_interval(x, -1.0, 1.0) for x in rep.poles]
    assert np.all(np.abs(rep.values - exact) <= 4 * rep.stderrs + 5e-3)


def test_bourgain_on_a_small_disk_ball():
    B = Ball(np.array([1.0, 0.0]), 0.1)
    rep = check_bourgain(ball_domain(), B, 8, WosConfig(walkers=2000, shell=1e-5))
    assert rep.minimum > 0.3


def test_half_plane_doubling():
    balls = [Ball(np.array([x, 0.0]), r) for x, r in [(0, 0.1), (0.5, 0.2), (-1, 0.05), (1.5, 0.3)]]
    rep = check_doubling(half_space(), balls, 0.25, WosConfig(walkers=4000, shell=1e-5))
    assert rep.max_ratio <= 4


def test_hruscev_bound_below_flat_measure():
    # E = right half of Q0 = [-1, 1] on the line, pole above the centre
    x = np.array([0.0, 1.0])
    ratio = halfplane_interval(x, 0.0, 1.0) / halfplane_interval(x, -1.0, 1.0)
    assert ratio == pytest.approx(0.5)
    assert hruscev_bound(2.0, 1.0, 0.0, 1.0) <= ratio


def test_corkscrew_in_cantor_complement():
    S, dom = four_corner_cantor(1)
    B = Ball(dom.boxes[0, :2], 0.2)
    c = 0.05
    p = find_corkscrew(dom, B, c)
    assert p is not None
    assert dom.dist_boundary(p[None])[0] >= 2 * c * B.radius


# --- Frostman cascade -----------------------------------------------------------

def test_one_level_cascade_by_hand(disk_lattice):
    _, _, lat = disk_lattice
    parent = next(c for c in lat.ids() if len(lat.cube(c).children) >= 3)
    kids = lat.cube(parent).children
    # each child sits exactly at its own cap, the parent is over it
    w = {c: 2 * lat.cube(c).side for c in kids}
    total = sum(w.values())
    ell = lat.cube(parent).side
    assert total > 2 * ell
    nu = frostman_regularize(lat, w, (0, 0))
    assert parent in nu.fc
    for c in kids:
        assert nu.weights[c] == pytest.approx(w[c] * ell / total, rel=1e-12)
    assert nu.mass(lat, parent) == pytest.approx(ell, rel=1e-12)


# --- Whitney cubes --------------------------------------------------------------

def test_half_plane_whitney_sides_track_height():
    cells = whitney_cubes(half_space(window=2.0), (np.array([-1.0, 0.0]), 2.0), N=4, min_side=1e-2)
    N = 4
    for c in cells:
        y = c.center[1]
        assert y / N / 4 <= c.side <= 2 * y / N


def test_disk_whitney_area():
    ms = 1e-2
    cells = whitney_cubes(ball_domain(), N=4, min_side=ms)
    area = sum(c.volume for c in cells)
    # collar of points closer than N·√2/2·min_side to the circle stays uncovered
    collar = 4 * math.sqrt(2) / 2 * ms * 2
    assert area >= 0.9 * math.pi * (1 - collar) ** 2


# --- domains ---------------------------------------------------------------------

def _box_distance(p, centre, side):
    gap = np.maximum(np.abs(p - centre) - side / 2, 0.0)
    return float(np.linalg.norm(gap))


def test_cantor1_distance_at_origin():
    _, dom = four_corner_cantor(1)
    brute = min(_box_distance(np.zeros(2), b[:2] + (b[2:] - b[:2]) / 2, b[2] - b[0]) for b in dom.boxes)
    assert dom.dist_boundary(np.zeros((1, 2)))[0] == pytest.approx(brute, abs=1e-12)
    assert brute == pytest.approx(math.sqrt(2) * (0.25 - 0.125))


def test_abs_graph_distance():
    dom = lipschitz_graph_domain([(-1.0, 0.5), (0.0, 0.0), (1.0, 0.5)])
    rng = np.random.default_rng(4)
    q = rng.uniform(-0.5, 0.5, (200, 2))
    s = np.linspace(-1, 1, 200_001)
    curve = np.c_[s, 0.5 * np.abs(s)]
    brute = np.array([np.min(np.linalg.norm(curve - p, axis=1)) for p in q])
    assert np.allclose(dom.dist_boundary(q), brute, atol=1e-5)
