"""Full-scan, half-scan and spatially adaptive (SAW) MBIR.

All three modes minimise or descend on

    f(x) = 1/2 ||y - A x||_W^2 + Phi(x)

* ``full_mbir``: exact gradient with the full-scan A.
* ``half_mbir``: the same problem with y, A and W restricted to the half-scan views.
* ``saw_mbir``: the residual is always full-scan, but back projection is masked:
  voxels inside the mask receive only half-scan views, the rest receive all
  views.  The resulting pseudo-gradient is only a search direction; step sizes
  come from a line search on the true full-scan cost.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .fdk import fdk
from .geometry import Geometry, Mask, ViewSubset, compute_mask, full_scan_views, half_scan_views
from .prior import Prior
from .projector import Sinogram, Volume, projector_for
from .weights import Weights, statistical_weights, view_transition_weights

__all__ = [
    "ReconConfig",
    "ReconError",
    "ReconReport",
    "cost",
    "fbp_init",
    "gradient",
    "line_search",
    "pseudo_gradient",
    "reconstruct",
]

log = logging.getLogger(__name__)

Mode = Literal["full_mbir", "half_mbir", "saw_mbir"]
MODES = ("full_mbir", "half_mbir", "saw_mbir")
_MAX_HALVINGS = 20


class ReconError(RuntimeError):
    """Iteration aborted (non-finite cost or invalid configuration)."""


@dataclass(frozen=True)
class ReconConfig:
    mode: Mode = "full_mbir"
    max_iterations: int = 50
    step_size: float | str = "line_search"
    beta: float = 16.0
    potential: Literal["quadratic", "huber"] = "huber"
    huber_delta: float = 0.0005
    num_subsets: int = 1
    nesterov: bool = True
    init: Literal["zero", "fbp"] = "fbp"
    half_scan_start: int = 0
    mask_feather: float = 0.0
    mask_file: str | None = None
    convergence_tol: float = 1e-6
    weighting: Literal["uniform", "photon"] = "photon"
    half_weighting: Literal["binary", "parker"] = "binary"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode: unknown reconstruction mode {self.mode!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations: need at least one iteration")
        if self.beta < 0:
            raise ValueError("beta: regularizer strength must be >= 0")
        if self.num_subsets < 1:
            raise ValueError("num_subsets: must be >= 1")
        if isinstance(self.step_size, str):
            if self.step_size != "line_search":
                raise ValueError("step_size: a positive number or 'line_search'")
        elif not self.step_size > 0:
            raise ValueError("step_size: must be positive")
        if self.init not in ("zero", "fbp"):
            raise ValueError(f"init: unknown initialisation {self.init!r}")
        if self.mask_feather < 0:
            raise ValueError("mask_feather: must be >= 0")
        if self.convergence_tol < 0:
            raise ValueError("convergence_tol: must be >= 0")
        self.prior  # validates potential / delta

    @property
    def prior(self) -> Prior:
        return Prior(self.beta, self.potential, self.huber_delta)

    @property
    def uses_line_search(self) -> bool:
        return self.step_size == "line_search"

    def check(self, g: Geometry) -> None:
        if g.num_views % self.num_subsets:
            raise ValueError(
                f"num_subsets: {self.num_subsets} does not divide num_views={g.num_views}")
        if not 0 <= self.half_scan_start < g.num_views:
            raise ValueError(f"half_scan_start: {self.half_scan_start} outside [0, {g.num_views})")


@dataclass
class ReconReport:
    initial_cost: float = math.nan
    costs: list[float] = field(default_factory=list)
    steps: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    restarts: int = 0
    gradient_inner_product: float = math.nan
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.costs)

    def monotone_violations(self) -> int:
        seq = [self.initial_cost] + self.costs
        return sum(b > a for a, b in zip(seq, seq[1:]))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "cost", "step", "grad_norm", "seconds"])
            w.writerow([0, repr(self.initial_cost), 0.0, "", 0.0])
            for k, row in enumerate(zip(self.costs, self.steps, self.grad_norms, self.seconds), 1):
                w.writerow([k] + [repr(float(v)) for v in row])


class _Problem:
    """Array-level state shared by the public operators and the driver."""

    def __init__(self, y: np.ndarray, g: Geometry, cfg: ReconConfig,
                 weights: np.ndarray | None = None, mask: np.ndarray | None = None):
        if y.shape != g.sinogram_shape:
            raise ValueError(f"sinogram shape {y.shape} does not match geometry {g.sinogram_shape}")
        cfg.check(g)
        self.g = g
        self.cfg = cfg
        self.proj = projector_for(g)
        self.prior = cfg.prior
        self.y = np.asarray(y, dtype=np.float64)
        self.full = full_scan_views(g)
        self.half = half_scan_views(g, cfg.half_scan_start)
        self.data_views = self.half if cfg.mode == "half_mbir" else self.full
        if weights is None:
            weights = np.ones(g.sinogram_shape)
        if weights.shape != g.sinogram_shape:
            raise ValueError("weights shape does not match the sinogram")
        on = self.data_views.indicator(g.num_views)
        self.w = np.where(on[:, None, None], weights, 0.0)
        self.mask = mask
        if cfg.mode == "saw_mbir":
            if mask is None:
                raise ValueError("saw_mbir needs a mask")
            if mask.shape != g.shape_zyx:
                raise ValueError(f"mask shape {mask.shape} does not match geometry {g.shape_zyx}")
            self.half_weights = view_transition_weights(g, self.half, cfg.half_weighting)
        n = cfg.num_subsets
        data = sorted(self.data_views.indices)
        self.subsets = [[v for v in data if v % n == s] for s in range(n)]

    # -- data term ----------------------------------------------------------
    def forward(self, x, views):
        return self.proj.forward(x, views)

    def residual(self, Ax):
        return Ax - self.y

    def data_cost(self, e, w=None):
        w = self.w if w is None else w
        return 0.5 * float(np.sum(w * e * e))

    def cost_from(self, x, e):
        return self.data_cost(e) + self.prior.value(x)

    def subset_weights(self, views):
        on = np.zeros(self.g.num_views, dtype=bool)
        on[list(views)] = True
        return np.where(on[:, None, None], self.w, 0.0)

    def back(self, r, views, masked):
        if not masked:
            return self.proj.back(r, views)
        on = np.zeros(self.g.num_views)
        on[list(views)] = 1.0
        return self.proj.back_masked(r, self.half_weights * on[:, None], views, self.mask)

    def direction(self, x, e, views, scale=1.0, masked=None, reg_grad=None):
        """scale * B W (A x - y) + grad Phi(x), with B = A^T or the masked back projector."""
        masked = self.cfg.mode == "saw_mbir" if masked is None else masked
        w = self.w if len(views) == len(self.data_views) else self.subset_weights(views)
        bp = self.back(w * e, views, masked)
        if reg_grad is None:
            reg_grad = self.prior.gradient(x)
        return scale * bp + reg_grad

    # -- step size ----------------------------------------------------------
    def step(self, x, d, e, Ad, reg_grad, w=None, scale=1.0):
        """Step along -d minimising ``scale * 1/2 ||e - a A d||_W^2 + Phi(x - a d)``."""
        w = self.w if w is None else w
        if not np.all(np.isfinite(d)):
            raise ReconError("non-finite search direction")
        if not self.cfg.uses_line_search:
            return float(self.cfg.step_size)
        wAd = w * Ad
        slope = scale * float(np.sum(wAd * e)) + float(np.sum(d * reg_grad))
        curv = scale * float(np.sum(wAd * Ad)) + self.prior.surrogate_curvature(x, d)
        if not (slope > 0 and curv > 0):
            return 0.0
        alpha = slope / curv
        f0 = scale * self.data_cost(e, w) + self.prior.value(x)
        halvings = _MAX_HALVINGS if self.prior.potential == "huber" else 0
        for _ in range(halvings + 1):
            f1 = scale * self.data_cost(e - alpha * Ad, w) + self.prior.value(x - alpha * d)
            if f1 <= f0:
                return alpha
            alpha *= 0.5
        return 0.0


def _arrays(x: Volume, y: Sinogram, w: Weights | None):
    return (np.asarray(x.values, dtype=np.float64), np.asarray(y.values, dtype=np.float64),
            None if w is None else np.asarray(w.values, dtype=np.float64))


def cost(x: Volume, y: Sinogram, w: Weights, cfg: ReconConfig, g: Geometry) -> float:
    """1/2 sum_i w_i (y_i - [Ax]_i)^2 + Phi(x) over the mode's data views."""
    xa, ya, wa = _arrays(x, y, w)
    p = _Problem(ya, g, cfg, wa, mask=np.zeros(g.shape_zyx))
    if xa.shape != g.shape_zyx:
        raise ValueError(f"volume shape {xa.shape} does not match geometry {g.shape_zyx}")
    e = p.residual(p.forward(xa, p.data_views))
    return p.cost_from(xa, e)


def gradient(x: Volume, y: Sinogram, w: Weights, cfg: ReconConfig, g: Geometry) -> Volume:
    """Exact gradient A^T W (A x - y) + grad Phi(x) (half-scan restricted in half_mbir)."""
    xa, ya, wa = _arrays(x, y, w)
    p = _Problem(ya, g, cfg, wa, mask=np.zeros(g.shape_zyx))
    e = p.residual(p.forward(xa, p.data_views))
    return Volume(p.direction(xa, e, p.data_views.indices, masked=False), g.voxel_size)


def pseudo_gradient(x: Volume, y: Sinogram, w: Weights, mask: Mask, cfg: ReconConfig,
                    g: Geometry) -> Volume:
    """Masked back projection of the full-scan weighted residual plus grad Phi(x)."""
    if cfg.mode != "saw_mbir":
        raise ValueError("pseudo_gradient needs mode='saw_mbir'")
    xa, ya, wa = _arrays(x, y, w)
    p = _Problem(ya, g, cfg, wa, mask=mask.values)
    e = p.residual(p.forward(xa, p.data_views))
    return Volume(p.direction(xa, e, p.data_views.indices, masked=True), g.voxel_size)


def line_search(x: Volume, d: Volume, y: Sinogram, w: Weights, cfg: ReconConfig,
                g: Geometry) -> float:
    """Step ``a >= 0`` with ``cost(x - a d) <= cost(x)``.

    Quadratic potential: the exact minimiser along ``d``.  Huber: the step of
    the half-quadratic majorizer, halved until the cost decreases (at most 20
    times).  Returns 0 when no decrease is found.
    """
    xa, ya, wa = _arrays(x, y, w)
    da = np.asarray(d.values, dtype=np.float64)
    if not np.all(np.isfinite(da)):
        raise ReconError("non-finite search direction")
    if not np.any(da):
        raise ValueError("line_search needs a nonzero direction")
    p = _Problem(ya, g, cfg, wa, mask=np.zeros(g.shape_zyx))
    views = p.data_views
    Ad = p.forward(da, views)
    e = p.residual(p.forward(xa, views))
    return p.step(xa, da, e, Ad, p.prior.gradient(xa))


def fbp_init(y: Sinogram, g: Geometry, views: ViewSubset) -> Volume:
    """FDK initial image over ``views`` (Parker-weighted for half subsets)."""
    return fdk(y, g, views)


def _initial_image(p: _Problem, y: Sinogram) -> np.ndarray:
    g, cfg = p.g, p.cfg
    if cfg.init == "zero":
        return np.zeros(g.shape_zyx)
    if cfg.mode == "full_mbir":
        return fdk(y, g, p.full).values
    if cfg.mode == "half_mbir":
        return fdk(y, g, p.half).values
    m = p.mask
    return m * fdk(y, g, p.half).values + (1.0 - m) * fdk(y, g, p.full).values


def _resolve_mask(g: Geometry, cfg: ReconConfig, mask: Mask | None) -> np.ndarray | None:
    if cfg.mode != "saw_mbir":
        return None
    if mask is not None:
        return mask.values
    if cfg.mask_file:
        from .io import read_volume

        vol = read_volume(cfg.mask_file)
        return Mask(np.asarray(vol.values, dtype=np.float64)).values
    return compute_mask(g, half_scan_views(g, cfg.half_scan_start), cfg.mask_feather).values


def reconstruct(y: Sinogram, g: Geometry, cfg: ReconConfig, mask: Mask | None = None,
                weights: Weights | None = None) -> tuple[Volume, ReconReport]:
    """Run ``cfg.max_iterations`` full iterations of the configured mode.

    Each full iteration visits ``cfg.num_subsets`` interleaved view subsets.
    With Nesterov momentum or subsets the line search only controls each
    sub-step, so the full-iteration cost is checked: on an increase the
    iterate is rolled back, momentum restarted, and a plain full-data step is
    taken instead.
    """
    if weights is None:
        weights = statistical_weights(y, cfg.weighting)
    p = _Problem(np.asarray(y.values, dtype=np.float64), g, cfg,
                 np.asarray(weights.values, dtype=np.float64), _resolve_mask(g, cfg, mask))
    report = ReconReport()
    nsub = len(p.subsets)
    scale = float(nsub)
    guarded = cfg.uses_line_search

    x = _initial_image(p, y)
    Ax = p.forward(x, p.data_views)
    f = p.cost_from(x, p.residual(Ax))
    if not math.isfinite(f):
        raise ReconError(f"non-finite initial cost {f}")
    report.initial_cost = f
    z, t_mom = x, 1.0

    for k in range(1, cfg.max_iterations + 1):
        tic = time.perf_counter()
        x_old, Ax_old, f_old = x, Ax, f
        norm = 0.0
        for s, views in enumerate(p.subsets):
            w = p.w if nsub == 1 else p.subset_weights(views)
            Az = p.forward(z, views)
            e = p.residual(Az) if nsub == 1 else (Az - p.y) * (w > 0)
            reg_grad = p.prior.gradient(z)
            d = p.direction(z, e, views, scale, reg_grad=reg_grad)
            if s == 0:
                norm = float(np.linalg.norm(d))
            Ad = p.forward(d, views) if cfg.uses_line_search else None
            alpha = p.step(z, d, e, Ad, reg_grad, w, scale)
            x_new = z - alpha * d
            if cfg.nesterov:
                t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
                z = x_new + ((t_mom - 1.0) / t_next) * (x_new - x)
                t_mom = t_next
            else:
                z = x_new
            x = x_new

        if nsub == 1 and Ad is not None:
            Ax = Az - alpha * Ad
        else:
            Ax = p.forward(x, p.data_views)
        f = p.cost_from(x, p.residual(Ax))

        if guarded and f > f_old and (cfg.nesterov or nsub > 1):
            # momentum / subset overshoot: restart from x_old with a plain step
            report.restarts += 1
            e = p.residual(Ax_old)
            reg_grad = p.prior.gradient(x_old)
            d = p.direction(x_old, e, p.data_views.indices, reg_grad=reg_grad)
            norm = float(np.linalg.norm(d))
            Ad = p.forward(d, p.data_views)
            alpha = p.step(x_old, d, e, Ad, reg_grad)
            x = x_old - alpha * d
            Ax = Ax_old - alpha * Ad
            f = p.cost_from(x, p.residual(Ax))
            z, t_mom = x, 1.0
        if guarded and f > f_old:
            x, Ax, f, alpha = x_old, Ax_old, f_old, 0.0
            z, t_mom = x, 1.0

        if not math.isfinite(f):
            raise ReconError(f"non-finite cost at iteration {k} (step {alpha}, |d| {norm})")
        report.costs.append(f)
        report.steps.append(float(alpha))
        report.grad_norms.append(norm)
        report.seconds.append(time.perf_counter() - tic)
        log.debug("%s iter %d cost %.6e step %.3e", cfg.mode, k, f, alpha)
        if cfg.convergence_tol > 0 and abs(f_old - f) <= cfg.convergence_tol * max(abs(f_old), 1e-300):
            report.converged = True
            break

    report.gradient_inner_product = _gradient_inner_product(p, x, Ax)
    if cfg.mode == "saw_mbir" and report.gradient_inner_product <= 0:
        log.info("SAW fixed point: <g, g_s> = %.3e <= 0", report.gradient_inner_product)
    return Volume(x, g.voxel_size), report


def _gradient_inner_product(p: _Problem, x: np.ndarray, Ax: np.ndarray) -> float:
    """<g(x), g_s(x)> between the true gradient and the mode's search direction."""
    e = p.residual(Ax)
    reg_grad = p.prior.gradient(x)
    r = p.w * e
    if p.cfg.mode != "saw_mbir":
        g_true = p.proj.back(r, p.data_views) + reg_grad
        return float(np.sum(g_true * g_true))
    g_s, _, bp_full = p.proj.back_masked(r, p.half_weights, p.full, p.mask, both=True)
    return float(np.sum((bp_full + reg_grad) * (g_s + reg_grad)))
