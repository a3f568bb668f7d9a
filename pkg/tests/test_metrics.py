import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from sawmbir.metrics import insert_centroid_and_width, per_slice_rmse, region_means
from sawmbir.projector import Volume


def test_hand_case_two_by_two_by_one():
    a = Volume(np.array([[[1.0, 2.0], [3.0, 0.0]]]))
    b = Volume(np.array([[[1.0, 0.0], [0.0, 5.0]]]))
    # reference a excludes its zero voxel: errors 0, 2, 3 over 3 voxels
    prof = per_slice_rmse(a, b)
    assert prof.values[0] == pytest.approx(np.sqrt(13 / 3))
    assert prof.exclusion_applied and prof.empty_slices == ()
    # with every voxel included: errors 0, 2, 3, 5
    everything = Volume(np.ones((1, 2, 2)))
    assert per_slice_rmse(a, b, everything).values[0] == pytest.approx(np.sqrt(38 / 4))


@given(data=st.data(), nz=st.integers(1, 6))
def test_symmetric_under_a_fixed_reference(data, nz):
    el = st.floats(-5, 5, allow_nan=False)
    a = data.draw(arrays(np.float64, (nz, 3, 3), elements=el))
    b = data.draw(arrays(np.float64, (nz, 3, 3), elements=el))
    ref = Volume(np.ones((nz, 3, 3)))
    ab = per_slice_rmse(Volume(a), Volume(b), ref).values
    ba = per_slice_rmse(Volume(b), Volume(a), ref).values
    np.testing.assert_array_equal(ab, ba)
    assert np.all(ab >= 0)
    assert not per_slice_rmse(Volume(a), Volume(a), ref).values.any()


def test_empty_slices_reported():
    a = np.ones((3, 2, 2))
    a[1] = 0
    prof = per_slice_rmse(Volume(a), Volume(a + 1))
    assert prof.empty_slices == (1,)
    np.testing.assert_array_equal(prof.values, [1.0, 0.0, 1.0])


def test_shape_mismatch():
    with pytest.raises(ValueError, match="dims"):
        per_slice_rmse(Volume(np.ones((2, 2, 2))), Volume(np.ones((3, 2, 2))))


def test_region_means_split():
    from sawmbir.metrics import SliceRmseProfile
    prof = SliceRmseProfile(np.arange(12, dtype=float))
    r = region_means(prof)
    assert r["center_third"] == pytest.approx(np.mean([4, 5, 6, 7]))
    assert r["edge_sixths"] == pytest.approx(np.mean([0, 1, 10, 11]))
    assert r["all"] == pytest.approx(5.5)


def test_centroid_and_width_of_a_box():
    x = np.zeros((9, 9, 9))
    x[3:6, 4, 2:7] = 1.0  # 5 wide in x, 1 in y, 3 in z
    roi = (slice(0, 9), slice(0, 9), slice(0, 9))
    (cx, cy, cz), (wx, wy, wz) = insert_centroid_and_width(Volume(x, (2.0, 2.0, 2.0)), roi)
    assert (cx, cy, cz) == pytest.approx((0.0, 0.0, 0.0))
    # half-maximum crossings sit half a sample outside the plateau ends
    assert wx == pytest.approx(2.0 * 5)
    assert wz == pytest.approx(2.0 * 3)
    assert wy == pytest.approx(2.0 * 1)


@given(shift=st.integers(-3, 3))
def test_centroid_follows_a_shift(shift):
    x = np.zeros((5, 5, 15))
    x[2, 2, 7 + shift] = 1.0
    (cx, _, _), _ = insert_centroid_and_width(Volume(x, (1.5, 1.5, 1.5)), (slice(None),) * 3)
    assert cx == pytest.approx(1.5 * shift)


def test_flat_roi_rejected():
    with pytest.raises(ValueError, match="degenerate"):
        insert_centroid_and_width(Volume(np.ones((3, 3, 3))), (slice(None),) * 3)
