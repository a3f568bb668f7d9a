import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sawmbir.geometry import (
    DEFAULT_GEOMETRY, GeometryError, Mask, compute_mask, detector_hits, full_scan_views,
    half_scan_view_count, half_scan_views, make_geometry, span_of,
)


def test_default_geometry_is_desk_scale():
    g = make_geometry()
    assert g.volume_dims == (64, 64, 64)
    assert g.voxel_size == (2.0, 2.0, 2.0)
    assert g.num_views == 72
    assert (g.detector_cols, g.detector_rows) == (48, 24)
    assert g.source_to_iso_distance == 300 and g.source_to_detector_distance == 480
    assert g.sinogram_shape == (72, 24, 48)
    assert g.shape_zyx == (64, 64, 64)


def test_default_half_scan_has_48_views():
    g = make_geometry()
    assert math.isclose(g.fan_angle, 2 * math.atan(240 / 480))
    assert half_scan_view_count(g) == 48
    assert half_scan_views(g).indices == tuple(range(48))


@pytest.mark.parametrize("key,value", [
    ("detector_cols", 0), ("num_views", 1), ("col_spacing", -1.0),
    ("source_to_detector", 200.0), ("voxel_size", (2, 0, 2)),
])
def test_invalid_geometry_names_the_field(key, value):
    with pytest.raises(GeometryError) as info:
        make_geometry(**{key: value})
    stem = key.split("_")[0]
    assert stem in str(info.value)


def test_unknown_geometry_key_rejected():
    with pytest.raises(GeometryError, match="fov_mm"):
        make_geometry(fov_mm=100)


def test_trajectory_is_orthonormal(small_geometry):
    g = small_geometry
    src, det, uax = g.trajectory()
    R, D = g.source_to_iso_distance, g.source_to_detector_distance
    np.testing.assert_allclose(np.linalg.norm(src, axis=1), R)
    np.testing.assert_allclose(np.linalg.norm(det - src, axis=1), D)
    np.testing.assert_allclose(np.einsum("ij,ij->i", uax, det - src), 0, atol=1e-9)
    np.testing.assert_allclose(np.linalg.norm(uax, axis=1), 1)


@given(n=st.integers(24, 400), cols=st.integers(4, 64), spacing=st.floats(1.0, 12.0))
def test_half_scan_is_the_shortest_run_covering_pi_plus_fan(n, cols, spacing):
    g = make_geometry(num_views=n, detector_cols=cols, col_spacing=spacing)
    need = math.pi + g.fan_angle
    count = half_scan_view_count(g)
    if count > n:
        with pytest.raises(GeometryError, match="num_views"):
            half_scan_views(g)
        return
    half = half_scan_views(g)
    assert span_of(g, half) >= need - 1e-9
    # one view fewer would not span pi + fan
    assert (count - 2) * g.view_spacing < need


@given(start=st.integers(0, 71))
def test_half_scan_wraps_around(start):
    g = make_geometry()
    half = half_scan_views(g, start)
    assert len(half) == 48
    assert half.indices[0] == start
    assert all((b - a) % 72 == 1 for a, b in zip(half.indices, half.indices[1:]))
    assert half.indicator(72).sum() == 48


def test_half_scan_start_out_of_range():
    with pytest.raises(GeometryError, match="start_index"):
        half_scan_views(make_geometry(), 72)


def _hits_oracle(g, views):
    """Per (voxel, view) line-plane intersection with the flat detector."""
    xs, ys, zs = g.axis_coords()
    src, det, uax = g.trajectory()
    out = np.ones(g.shape_zyx, dtype=bool)
    for v in views:
        normal = (det[v] - src[v]) / np.linalg.norm(det[v] - src[v])
        for k, z in enumerate(zs):
            for j, y in enumerate(ys):
                for i, x in enumerate(xs):
                    p = np.array([x, y, z])
                    denom = (p - src[v]) @ normal
                    if denom <= 0:
                        out[k, j, i] = False
                        continue
                    t = ((det[v] - src[v]) @ normal) / denom
                    hit = src[v] + t * (p - src[v])
                    u = (hit - det[v]) @ uax[v]
                    w = hit[2]
                    if abs(u) > g.detector_width / 2 or abs(w) > g.detector_height / 2:
                        out[k, j, i] = False
    return out


def test_detector_hits_match_brute_force(small_geometry):
    g = small_geometry
    views = half_scan_views(g, 5).indices[::3]
    np.testing.assert_array_equal(detector_hits(g, views), _hits_oracle(g, views))


def test_mask_is_binary_and_covers_central_slices(small_geometry):
    g = small_geometry
    m = compute_mask(g, half_scan_views(g)).values
    assert set(np.unique(m)) <= {0.0, 1.0}
    nz = g.shape_zyx[0]
    # cone coverage shrinks away from the mid-plane
    per_slice = m.sum(axis=(1, 2))
    assert per_slice[nz // 2] == per_slice.max() > 0
    assert per_slice[0] < per_slice[nz // 2]
    np.testing.assert_array_equal(per_slice, per_slice[::-1])


def test_full_scan_coverage_is_subset_of_half_mask(small_geometry):
    g = small_geometry
    full = detector_hits(g, full_scan_views(g).indices)
    half = compute_mask(g, half_scan_views(g)).values > 0
    assert np.all(half[full])


@given(width=st.floats(0.5, 30.0))
def test_feathered_mask_stays_inside_binary_mask(width):
    g = make_geometry(volume_dims=(16, 16, 16), voxel_size=(6, 6, 6), num_views=24,
                      detector_cols=24, detector_rows=12)
    half = half_scan_views(g)
    binary = compute_mask(g, half).values
    feathered = compute_mask(g, half, width)
    assert feathered.feather_width == width
    assert np.all(feathered.values <= binary)
    assert np.all((feathered.values == 1.0) <= (binary == 1.0))
    assert feathered.values.min() >= 0 and feathered.values.max() <= 1


def test_mask_validation():
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        Mask(np.full((2, 2, 2), 1.5))
    with pytest.raises(ValueError, match="3-D"):
        Mask(np.zeros((2, 2)))
    with pytest.raises(ValueError, match="half-scan"):
        compute_mask(make_geometry(), full_scan_views(make_geometry()))


def test_default_keys_roundtrip():
    g = make_geometry(dict(DEFAULT_GEOMETRY))
    assert g == make_geometry()
