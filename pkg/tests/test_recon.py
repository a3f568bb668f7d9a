import csv
import math

import numpy as np
import pytest

from sawmbir.geometry import Mask, compute_mask, full_scan_views, half_scan_views
from sawmbir.phantom import Ellipsoid, PhantomSpec, rasterize, simulate_sinogram
from sawmbir.projector import Sinogram, Volume, forward_project
from sawmbir.recon import (
    ReconConfig, ReconError, cost, gradient, line_search, pseudo_gradient, reconstruct,
)
from sawmbir.weights import Weights, view_transition_weights


def _problem(g, rng, scale=0.02):
    spec = PhantomSpec((Ellipsoid((0, 0, 0), (22, 18, 20), scale),
                        Ellipsoid((6, 0, 4), (8, 8, 8), scale)))
    y = simulate_sinogram(spec, g)
    x = Volume(rng.random(g.shape_zyx) * scale, g.voxel_size)
    w = Weights(0.5 + rng.random(g.sinogram_shape))
    return x, y, w


def test_cost_hand_case(tiny_geometry):
    g = tiny_geometry
    y = np.zeros(g.sinogram_shape)
    y[0, 3, 4] = 1.0
    x = Volume.zeros(g)
    w = Weights(np.ones(g.sinogram_shape))
    cfg = ReconConfig(beta=0.0)
    assert cost(x, Sinogram(y), w, cfg, g) == pytest.approx(0.5)
    # view 0 is not part of a half scan starting at view 1
    half = ReconConfig(mode="half_mbir", beta=0.0, half_scan_start=1)
    assert cost(x, Sinogram(y), w, half, g) == 0.0


@pytest.mark.parametrize("potential", ["quadratic", "huber"])
def test_gradient_finite_differences(tiny_geometry, rng, potential):
    g = tiny_geometry
    x, y, w = _problem(g, rng)
    cfg = ReconConfig(beta=3.0, potential=potential, huber_delta=0.004)
    grad = gradient(x, y, w, cfg, g).values
    h = 1e-6
    for flat in rng.choice(x.values.size, 8, replace=False):
        idx = np.unravel_index(flat, g.shape_zyx)
        xp, xm = x.values.copy(), x.values.copy()
        xp[idx] += h
        xm[idx] -= h
        fd = (cost(Volume(xp), y, w, cfg, g) - cost(Volume(xm), y, w, cfg, g)) / (2 * h)
        assert grad[idx] == pytest.approx(fd, rel=1e-4, abs=1e-9)


def test_pseudo_gradient_reductions(tiny_geometry, rng):
    g = tiny_geometry
    x, y, w = _problem(g, rng)
    saw = ReconConfig(mode="saw_mbir")
    full = gradient(x, y, w, ReconConfig(mode="full_mbir"), g).values
    half = gradient(x, y, w, ReconConfig(mode="half_mbir"), g).values
    np.testing.assert_array_equal(
        pseudo_gradient(x, y, w, Mask.constant(g, 0.0), saw, g).values, full)
    np.testing.assert_allclose(
        pseudo_gradient(x, y, w, Mask.constant(g, 1.0), saw, g).values, half, rtol=1e-12, atol=1e-15)
    with pytest.raises(ValueError, match="saw_mbir"):
        pseudo_gradient(x, y, w, Mask.constant(g, 0.0), ReconConfig(), g)


def test_parker_pseudo_gradient_uses_weighted_half_cost(tiny_geometry, rng):
    g = tiny_geometry
    x, y, w = _problem(g, rng)
    saw = ReconConfig(mode="saw_mbir", half_weighting="parker")
    parker = view_transition_weights(g, half_scan_views(g), "parker")
    w_half = Weights(w.values * parker[:, None, :])
    want = gradient(x, y, w_half, ReconConfig(mode="half_mbir"), g).values
    got = pseudo_gradient(x, y, w, Mask.constant(g, 1.0), saw, g).values
    np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-14)


def test_quadratic_line_search_is_exact_minimizer(tiny_geometry, rng):
    g = tiny_geometry
    x, y, w = _problem(g, rng)
    cfg = ReconConfig(beta=2.0, potential="quadratic")
    d = gradient(x, y, w, cfg, g)
    alpha = line_search(x, d, y, w, cfg, g)
    # closed form from independent pieces
    Ad = forward_project(d, g, full_scan_views(g)).values
    curv = float(np.sum(w.values * Ad * Ad)) + cfg.prior.surrogate_curvature(x.values, d.values)
    assert alpha == pytest.approx(float(np.sum(d.values ** 2)) / curv, rel=1e-10)

    def f(a):
        return cost(Volume(x.values - a * d.values), y, w, cfg, g)

    assert f(alpha) <= f(0.0)
    assert f(alpha) <= f(1.01 * alpha) and f(alpha) <= f(0.99 * alpha)


def test_huber_line_search_decreases(tiny_geometry, rng):
    g = tiny_geometry
    x, y, w = _problem(g, rng)
    cfg = ReconConfig(beta=5.0, potential="huber", huber_delta=0.001)
    d = gradient(x, y, w, cfg, g)
    alpha = line_search(x, d, y, w, cfg, g)
    assert alpha > 0
    assert cost(Volume(x.values - alpha * d.values), y, w, cfg, g) <= cost(x, y, w, cfg, g)
    # ascent direction: no decrease possible
    up = Volume(-d.values)
    assert line_search(x, up, y, w, cfg, g) == 0.0
    with pytest.raises(ValueError, match="nonzero"):
        line_search(x, Volume.zeros(g), y, w, cfg, g)


@pytest.fixture
def dynamic_case(small_geometry):
    from sawmbir.phantom import Motion
    g = small_geometry
    spec = PhantomSpec((
        Ellipsoid((0, 0, 0), (36, 30, 60), 0.02),
        Ellipsoid((-8, 0, 0), (8, 8, 8), 0.02, motion=Motion("linear_drift", velocity=(16, 0, 0))),
        Ellipsoid((12, -6, 36), (10, 8, 8), 0.01),
    ))
    return g, simulate_sinogram(spec, g, photons=1e5, seed=5)


def test_saw_with_zero_mask_tracks_full_scan(dynamic_case):
    g, y = dynamic_case
    kw = dict(max_iterations=6, convergence_tol=0)
    xf, rf = reconstruct(y, g, ReconConfig(mode="full_mbir", **kw))
    xs, rs = reconstruct(y, g, ReconConfig(mode="saw_mbir", **kw), mask=Mask.constant(g, 0.0))
    assert np.max(np.abs(xf.values - xs.values)) < 1e-10
    np.testing.assert_allclose(rf.costs, rs.costs, rtol=1e-12)


def test_single_subset_is_the_plain_iteration(dynamic_case):
    g, y = dynamic_case
    a, _ = reconstruct(y, g, ReconConfig(max_iterations=4, num_subsets=1, convergence_tol=0))
    b, _ = reconstruct(y, g, ReconConfig(max_iterations=4, convergence_tol=0))
    np.testing.assert_array_equal(a.values, b.values)


@pytest.mark.parametrize("mode", ["full_mbir", "half_mbir", "saw_mbir"])
@pytest.mark.parametrize("subsets,nesterov", [(1, True), (1, False), (4, True)])
def test_costs_never_increase(dynamic_case, mode, subsets, nesterov):
    g, y = dynamic_case
    cfg = ReconConfig(mode=mode, max_iterations=8, num_subsets=subsets, nesterov=nesterov,
                      convergence_tol=0)
    x, rep = reconstruct(y, g, cfg)
    assert rep.iterations == 8
    assert rep.monotone_violations() == 0
    assert rep.costs[-1] < rep.initial_cost
    assert np.all(np.isfinite(x.values))


def test_half_mode_ignores_views_outside_half_scan(dynamic_case):
    g, y = dynamic_case
    cfg = ReconConfig(mode="half_mbir", max_iterations=3, init="zero", convergence_tol=0)
    a, _ = reconstruct(y, g, cfg)
    off = ~half_scan_views(g).indicator(g.num_views)
    spoiled = y.values.copy()
    spoiled[off] += 1.0
    # photon weights of unused views differ too; give both runs uniform weights
    w = Weights(np.ones(g.sinogram_shape))
    a, _ = reconstruct(y, g, cfg, weights=w)
    b, _ = reconstruct(Sinogram(spoiled), g, cfg, weights=w)
    np.testing.assert_array_equal(a.values, b.values)


def test_fixed_step_and_early_stop(dynamic_case):
    g, y = dynamic_case
    _, rep = reconstruct(y, g, ReconConfig(step_size=1e-6, max_iterations=3, convergence_tol=0))
    assert rep.steps == [1e-6] * 3
    _, rep = reconstruct(y, g, ReconConfig(max_iterations=50, convergence_tol=0.5))
    assert rep.converged and rep.iterations < 50


def test_report_csv(dynamic_case, tmp_path):
    g, y = dynamic_case
    mask = compute_mask(g, half_scan_views(g))
    _, rep = reconstruct(y, g, ReconConfig(mode="saw_mbir", max_iterations=3), mask=mask)
    assert math.isfinite(rep.gradient_inner_product)
    path = tmp_path / "report.csv"
    rep.write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["iteration", "cost", "step", "grad_norm", "seconds"]
    assert [int(r[0]) for r in rows[1:]] == [0, 1, 2, 3]
    assert float(rows[-1][1]) == rep.costs[-1]


def test_config_validation(small_geometry):
    with pytest.raises(ValueError, match="num_subsets"):
        ReconConfig(num_subsets=5).check(small_geometry)
    with pytest.raises(ValueError, match="mode"):
        ReconConfig(mode="quarter_mbir")
    with pytest.raises(ValueError, match="beta"):
        ReconConfig(beta=-1)


def test_non_finite_data_is_rejected(tiny_geometry):
    g = tiny_geometry
    y = np.zeros(g.sinogram_shape)
    y[0, 0, 0] = np.inf
    with pytest.raises((ValueError, ReconError)):
        reconstruct(Sinogram(y), g, ReconConfig(max_iterations=1))
