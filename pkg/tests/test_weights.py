import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from sawmbir.geometry import full_scan_views, half_scan_views, make_geometry
from sawmbir.projector import Sinogram
from sawmbir.weights import (
    Weights, column_fan_angles, parker_weight, statistical_weights, view_transition_weights,
)


def test_statistical_weight_models(rng):
    y = Sinogram(rng.random((4, 3, 5)) * 3)
    np.testing.assert_array_equal(statistical_weights(y, "uniform").values, 1.0)
    np.testing.assert_allclose(statistical_weights(y, "photon").values, np.exp(-y.values))
    with pytest.raises(ValueError, match="weighting"):
        statistical_weights(y, "bogus")


def test_weights_reject_negative():
    with pytest.raises(ValueError, match="nonnegative"):
        Weights(-np.ones(3))


GM = 0.3


@given(beta=st.floats(0, math.pi + 2 * GM), gamma=st.floats(-GM + 1e-6, GM - 1e-6))
def test_parker_conjugate_pairs_sum_to_one(beta, gamma):
    w = parker_weight(beta, gamma, GM)
    span = math.pi + 2 * GM
    fwd = beta + math.pi + 2 * gamma
    back = beta - math.pi + 2 * gamma
    partners = [b for b in (fwd, back) if 0 <= b <= span]
    if partners:
        total = w + sum(parker_weight(b, -gamma, GM) for b in partners)
        assert total == pytest.approx(1.0, abs=1e-9)
    else:
        assert w == pytest.approx(1.0)


def test_parker_is_zero_outside_span_and_bounded():
    beta = np.linspace(-1, 5, 400)
    gamma = np.linspace(-GM, GM, 31)
    w = parker_weight(beta[:, None], gamma[None, :], GM)
    assert w.min() >= 0 and w.max() <= 1
    outside = (beta < 0) | (beta > math.pi + 2 * GM)
    assert not w[outside].any()


@given(gamma=st.floats(-GM + 1e-3, GM - 1e-3))
def test_parker_is_continuous_at_segment_joins(gamma):
    eps = 1e-10
    for b in (0.0, 2 * (GM - gamma), math.pi - 2 * gamma, math.pi + 2 * GM):
        left = parker_weight(b - eps, gamma, GM)
        right = parker_weight(b + eps, gamma, GM)
        assert abs(left - right) < 1e-6


def _conjugate(g, theta, u):
    """Source angle and detector u of the same line seen from the other side."""
    R, D = g.source_to_iso_distance, g.source_to_detector_distance
    c, s = math.cos(theta), math.sin(theta)
    S = np.array([R * c, R * s])
    P = np.array([-(D - R) * c, -(D - R) * s]) + u * np.array([-s, c])
    d = P - S
    # second intersection of S + t d with the source circle
    t = -2 * (S @ d) / (d @ d)
    E = S + t * d
    theta2 = math.atan2(E[1], E[0])
    c2, s2 = math.cos(theta2), math.sin(theta2)
    # where the old source lands on the new detector
    axis = -np.array([c2, s2])
    depth = (S - E) @ axis
    u2 = D * ((S - E) @ np.array([-s2, c2])) / depth
    return theta2, u2


@given(frac=st.floats(0, 1), ufrac=st.floats(-0.99, 0.99))
def test_column_fan_angle_sign_matches_geometric_conjugate(frac, ufrac):
    g = make_geometry()
    span = (47) * g.view_spacing
    gm = 0.5 * (span - math.pi)
    beta = frac * span
    u = ufrac * g.detector_width / 2
    gamma = float(-math.atan(u / g.source_to_detector_distance))
    theta2, u2 = _conjugate(g, beta, u)
    gamma2 = float(-math.atan(u2 / g.source_to_detector_distance))
    assert gamma2 == pytest.approx(-gamma, abs=1e-9)
    beta2 = theta2 % (2 * math.pi)
    assume(abs(beta2 - span) > 1e-7 and beta2 > 1e-7)
    w = parker_weight(beta, gamma, gm)
    if beta2 <= span:
        assert w + parker_weight(beta2, gamma2, gm) == pytest.approx(1.0, abs=1e-9)
    else:
        assert w == pytest.approx(1.0, abs=1e-9)


def test_column_fan_angles_are_antisymmetric():
    g = make_geometry()
    gam = column_fan_angles(g)
    np.testing.assert_allclose(gam, -gam[::-1])
    assert abs(gam).max() < g.fan_angle / 2


def test_transition_weights_binary_and_parker():
    g = make_geometry()
    half = half_scan_views(g, 10)
    binary = view_transition_weights(g, half, "binary")
    np.testing.assert_array_equal(binary[:, 0], half.indicator(g.num_views))
    parker = view_transition_weights(g, half, "parker")
    assert parker.min() >= 0 and parker.max() <= 1
    assert not parker[~half.indicator(g.num_views)].any()
    # interior views are fully weighted, end views taper
    assert np.all(parker[half.indices[24]] == 1.0)
    assert parker[half.indices[0]].max() < 0.05
    with pytest.raises(ValueError, match="half-scan"):
        view_transition_weights(g, full_scan_views(g))
