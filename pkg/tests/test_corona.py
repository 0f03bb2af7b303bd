import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from corona_tst.beta import BetaParams, beta_table
from corona_tst.corona import (REASONS, CorkscrewFailure, CoronaParams, cdhm_upper, corona_decompose,
                               find_corkscrew, frostman_check, frostman_regularize, verify_tree_densities)
from corona_tst.cubes import build_lattice, check_region
from corona_tst.domains import ball_domain, half_space, koch_snowflake, square_domain
from corona_tst.geometry import Ball
from corona_tst.harmonic import WosConfig

CFG = WosConfig(walkers=1500, shell=1e-5)


def _run(dom, h, k, params=CoronaParams()):
    S = dom.boundary_samples(h)
    lat = build_lattice(S, 0.5, k)
    betas = beta_table(lat, S, (0, 0), BetaParams(M=params.M, C0=params.M))
    return lat, betas, corona_decompose(dom, lat, (0, 0), params, CFG, betas=betas)


@pytest.fixture(scope="module", params=["disk", "square", "snowflake"])
def decomposition(request):
    dom = {"disk": ball_domain(), "square": square_domain(2.0, (-1.0, -1.0)),
           "snowflake": koch_snowflake(2)}[request.param]
    return (dom, *_run(dom, 2e-3, 5, CoronaParams(epsilon=0.2)))


def test_trees_partition_lattice(decomposition):
    _, lat, _, res = decomposition
    seen = [c for t in res.trees for c in t.region.cubes]
    assert len(seen) == len(set(seen))
    assert set(seen) == set(lat.descendants((0, 0)))


def test_regions_are_valid(decomposition):
    _, lat, _, res = decomposition
    for t in res.trees:
        if len(t.region.cubes) > 1:
            check_region(lat, t.region)


def test_each_stop_cube_has_one_known_reason(decomposition):
    _, lat, _, res = decomposition
    for t in res.trees:
        assert set(t.stop_reasons) == set(t.region.minimal)
        assert set(t.stop_reasons.values()) <= set(REASONS)
        stops = [c for c, r in t.stop_reasons.items() if r != "BTM"]
        for a in stops:
            assert not any(b != a and lat.contains(a, b) for b in stops)


def test_children_of_stop_cubes_are_tops(decomposition):
    _, lat, _, res = decomposition
    tops = set(res.tops)
    for t in res.trees:
        for c, r in t.stop_reasons.items():
            if r != "BTM":
                assert set(lat.cube(c).children) <= tops


def test_beta_stop_bracketing(decomposition):
    _, lat, betas, res = decomposition
    eps2 = res.params.epsilon ** 2
    for t in res.trees:
        for s, r in t.stop_reasons.items():
            if r != "Bbeta":
                continue
            chain = [s] + [a for a in lat.ancestors(s) if a in t.region.cubes]
            above = math.fsum(betas[c].beta ** 2 for c in chain)
            assert above < 2 * eps2  # the stop cube itself was kept
            kids = [c for c in lat.cube(s).children if above + betas[c].beta ** 2 >= 2 * eps2]
            assert kids and all(above + betas[c].beta ** 2 > eps2 for c in kids)


def test_packing_is_sum_of_tops(decomposition):
    _, lat, _, res = decomposition
    assert res.packing == math.fsum(lat.cube(t).side for t in res.tops)
    assert res.btm_packing == math.fsum(lat.cube(c).side for c in res.btm_cubes())


def test_verification_modes(decomposition):
    dom, lat, _, res = decomposition
    for mode in ("per-tree-pole", "fixed-pole"):
        rep = verify_tree_densities(res, dom, lat, CFG, mode=mode, samples=40)
        assert rep.fraction >= 0.9
    up, ok = cdhm_upper(res)
    assert ok and up == res.packing
    with pytest.raises(ValueError):
        verify_tree_densities(res, dom, lat, CFG, mode="bogus")


def test_half_plane_is_one_tree():
    lat, _, res = _run(half_space(), 1e-2, 5)
    assert len(res.trees) == 1 and res.packing == lat.cube((0, 0)).side


def test_epsilon_zero_plus_makes_everything_bad():
    dom = ball_domain()
    lat, _, res = _run(dom, 2e-3, 4, CoronaParams(epsilon=1e-9))
    assert all(len(t.region.cubes) == 1 for t in res.trees)
    assert len(res.trees) == len(lat)


def test_params_validation():
    for bad in (dict(lam=0.5), dict(A=0.5), dict(tau=1.5), dict(epsilon=1.0), dict(M=2.0)):
        with pytest.raises(ValueError):
            CoronaParams(**bad)


def test_corkscrew_search():
    dom = ball_domain()
    x = find_corkscrew(dom, Ball([1.0, 0.0], 0.5), 0.05)
    assert x is not None and dom.dist_boundary(x[None])[0] >= 0.05
    assert find_corkscrew(dom, Ball([3.0, 0.0], 0.5), 0.05) is None


def test_missing_poles_raise():
    # a thin slab has no interior point at depth ℓ/8 off the tangent plane
    from corona_tst.domains import polygon_domain

    slab = polygon_domain([[-1, -1e-3], [1, -1e-3], [1, 1e-3], [-1, 1e-3]])
    with pytest.raises(CorkscrewFailure):
        _run(slab, 2e-3, 3, CoronaParams(epsilon=0.9))


@given(st.integers(0, 2 ** 32 - 1), st.floats(1e-6, 10.0))
def test_frostman_cascade_caps_every_cube(seed, scale):
    lat = build_lattice(ball_domain().boundary_samples(1e-2), 0.5, 4)
    rng = np.random.default_rng(seed)
    bottom = [q.id for q in lat.levels[-1]]
    w = {c: float(v) for c, v in zip(bottom, scale * rng.exponential(size=len(bottom)))}
    nu = frostman_regularize(lat, w, (0, 0))
    checked, ok = frostman_check(lat, nu, (0, 0))
    assert ok == checked
    assert all(v >= 0 for v in nu.weights.values())
    # the cascade only ever lowers weights
    assert all(nu.weights[c] <= w[c] * (1 + 1e-12) for c in w)


def test_frostman_rejects_bad_weights():
    lat = build_lattice(ball_domain().boundary_samples(1e-2), 0.5, 2)
    c = lat.levels[-1][0].id
    with pytest.raises(ValueError):
        frostman_regularize(lat, {c: -1.0}, (0, 0))
