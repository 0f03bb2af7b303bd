import numpy as np
import pytest
from hypothesis import given, strategies as st

from corona_tst.batakis import (IndeterminateClassification, _code, _prefix_counts, batakis_domain, replay,
                                stage_depth, word_center)
from corona_tst.domains import cantor_squares, domain_from_spec
from corona_tst.harmonic import WosConfig

CFG = WosConfig(walkers=4000, shell=1e-5, max_steps=5000)


@pytest.fixture(scope="module")
def built():
    return batakis_domain(1, 0.3, 1.05, 2, CFG, policy="stop", max_doublings=0)


def test_stage_depth():
    assert [stage_depth(3, n) for n in range(4)] == [0, 3, 9, 18]


@pytest.mark.parametrize("j", [1, 2, 3])
def test_word_centers_match_cantor_squares(j):
    centers, _, words = cantor_squares(j)
    mine = np.array([word_center(tuple(w)) for w in words])
    assert np.allclose(mine, centers, atol=1e-14)


@given(st.lists(st.integers(0, 3), min_size=1, max_size=6), st.integers(0, 6))
def test_prefix_counts_sum_leaves(word, m):
    D = len(word)
    m = min(m, D)
    rng = np.random.default_rng(len(word))
    codes = np.arange(4 ** D)
    leaf = rng.integers(0, 5, size=4 ** D)
    pc = _prefix_counts(leaf, codes, D, m)
    assert sum(pc.values()) == leaf.sum()
    assert pc.get(_code(tuple(word[:m])), 0) == leaf[codes // 4 ** (D - m) == _code(tuple(word[:m]))].sum()


def test_decay_holds_at_every_stage(built):
    _, spec = built
    assert spec.stages
    assert all(holds for *_, holds in spec.decay_table())


def test_partial_sum_chain(built):
    S, B, series = built[1].beta_partial_sums()
    assert S <= B <= series


def test_children_split_into_stop_and_top(built):
    _, spec = built
    for s in spec.stages:
        assert sorted(s.stop + s.top) == sorted(s.children)
        assert sum(s.counts) <= s.parent_count
        for J in s.top:
            assert J[: len(s.parent)] == s.parent


def test_domain_round_trips_through_spec(built):
    dom, spec = built
    again = domain_from_spec(spec.to_json())
    q = np.random.default_rng(1).random((200, 2)) * 2 - 1
    assert np.array_equal(dom.dist_boundary(q), again.dist_boundary(q))
    cen, sides, _ = spec.squares()
    assert np.all(sides[: len(spec.stop_words())] == spec.eta * 4.0 ** -np.array([len(w) for w in spec.stop_words()]))


def test_replay_reproduces_lists(built):
    _, spec = built
    again = replay(spec)
    assert [(s.stop, s.top) for s in again.stages] == [(s.stop, s.top) for s in spec.stages]


def test_indeterminate_policy():
    # τ near 0 puts the threshold at the mean child share, so some child is undecidable
    with pytest.raises(IndeterminateClassification):
        batakis_domain(1, 0.01, 1.05, 1, WosConfig(walkers=500, max_steps=5000), max_doublings=0)


@pytest.mark.parametrize("kw", [dict(eta=1.0), dict(eta=1.3), dict(tau=0.0), dict(N=0), dict(policy="ignore"),
                                dict(N=3, max_n=2)])
def test_argument_validation(kw):
    args = dict(N=1, tau=0.1, eta=1.05, max_n=1, cfg=WosConfig(walkers=10))
    args.update(kw)
    with pytest.raises(ValueError):
        batakis_domain(**args)
