import numpy as np
import pytest
from hypothesis import given, strategies as st

from corona_tst.domains import corner_set, segment_set
from corona_tst.geometry import Ball, Plane, SampledSet, hausdorff_content, normalized_distance

from conftest import rotation

H = 1e-3


def test_ball_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        Ball([0, 0], 0.0)


def test_plane_requires_orthonormal_basis():
    with pytest.raises(ValueError):
        Plane([0, 0], [[1.0, 1.0]])
    L = Plane.from_directions([0, 0], [[1.0, 1.0]])
    assert np.allclose(L.basis @ L.basis.T, 1.0, atol=1e-12)


def test_plane_distance_and_projection():
    L = Plane([0.0, 1.0], [[1.0, 0.0]])
    pts = np.array([[3.0, 4.0], [-2.0, 1.0]])
    assert np.allclose(L.distance(pts), [3.0, 0.0])
    assert np.allclose(L.project(pts), [[3.0, 1.0], [-2.0, 1.0]])
    assert np.allclose(L.normals() @ L.basis.T, 0.0)


def test_sampled_set_rejects_nonfinite():
    with pytest.raises(ValueError):
        SampledSet(np.array([[0.0, np.nan]]), 1e-2, 1)


def test_segment_content_is_its_length():
    # H^1_inf of a segment is its length; the estimator adds at most one spacing
    seg = segment_set(H)
    val = hausdorff_content(seg, Ball([0.5, 0.0], 1.0), 1)
    assert 1.0 <= val <= 1.0 + 2 * H


def test_corner_content_is_its_diameter():
    # connected set: H^1_inf equals the diameter, here sqrt(2)
    val = hausdorff_content(corner_set(H), Ball([0.0, 0.0], 1.0), 1)
    assert np.sqrt(2) <= val <= np.sqrt(2) + 2 * H


def test_content_bounded_by_ball_diameter():
    val = hausdorff_content(corner_set(H), Ball([0.5, 0.5], 0.2), 1)
    assert val <= 0.4 + 1e-12


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_content_monotone_in_the_set(a, b):
    lo, hi = sorted((a, b))
    seg = segment_set(H)
    sub = seg.subset(np.nonzero((seg.points[:, 0] >= lo) & (seg.points[:, 0] <= hi))[0])
    B = Ball([0.5, 0.0], 0.8)
    assert hausdorff_content(sub, B, 1) <= hausdorff_content(seg, B, 1)


@given(st.sampled_from([0.5, 2.0, 4.0, 0.25]))
def test_content_scales_exactly_for_dyadic_factors(lam):
    S = corner_set(1e-2)
    B = Ball([0.3, 0.2], 0.9)
    big = S.transformed(np.eye(2), np.zeros(2), lam)
    a = hausdorff_content(S, B, 1)
    b = hausdorff_content(big, Ball(B.center * lam, B.radius * lam), 1)
    assert b == pytest.approx(lam * a, rel=1e-12)


@given(st.floats(0, 2 * np.pi), st.floats(-3, 3), st.floats(-3, 3))
def test_normalized_distance_symmetric_and_rigid(theta, sx, sy):
    E, F = corner_set(1e-2), segment_set(1e-2)
    B = Ball([0.3, 0.1], 0.7)
    v = normalized_distance(E, F, B).value
    assert normalized_distance(F, E, B).value == pytest.approx(v, abs=1e-10)
    R, t = rotation(theta), np.array([sx, sy])
    Bm = Ball(R @ B.center + t, B.radius)
    w = normalized_distance(E.transformed(R, t), F.transformed(R, t), Bm).value
    assert w == pytest.approx(v, abs=1e-10)


@given(st.floats(0.05, 1.0))
def test_normalized_distance_at_most_two(r):
    E, F = corner_set(1e-2), segment_set(1e-2)
    B = Ball([0.1, 0.05], r)
    nd = normalized_distance(E, F, B)
    # both sets meet B and, after restricting to 2B, the bound follows from diameters
    assert nd.value <= 2.0 + 1e-12


def test_samples_round_trip_csv(tmp_path):
    S = corner_set(1e-2)
    side = S.save(tmp_path / "corner.csv")
    assert side.suffix == ".json"
    back = SampledSet.load(tmp_path / "corner.csv")
    assert np.array_equal(back.points, S.points)
    assert back.resolution == S.resolution and back.target_dim == S.target_dim
    assert back.distance_oracle(np.array([[0.5, 0.5]]))[0] == pytest.approx(0.5)
