"""Ellipsoid phantoms with optional per-ellipsoid motion, and scan simulation.

Scan phase ``t`` runs linearly with the view index over a single rotation:
view ``v`` is acquired at ``t = v / num_views``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .geometry import Geometry
from .projector import Sinogram, Volume, projector_for

__all__ = [
    "Ellipsoid",
    "Motion",
    "PhantomSpec",
    "default_phantom",
    "rasterize",
    "reference_phase",
    "simulate_sinogram",
]

Vec3 = tuple[float, float, float]


@dataclass(frozen=True)
class Motion:
    """Centre displacement as a function of scan phase.

    ``linear_drift`` moves by ``velocity`` mm per rotation; ``oscillation``
    moves by ``amplitude * sin(2 pi t / period + phase)``.
    """
    kind: Literal["static", "linear_drift", "oscillation"] = "static"
    velocity: Vec3 = (0.0, 0.0, 0.0)
    amplitude: Vec3 = (0.0, 0.0, 0.0)
    period: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in ("static", "linear_drift", "oscillation"):
            raise ValueError(f"unknown motion kind {self.kind!r}")
        if self.kind == "oscillation" and not self.period > 0:
            raise ValueError("oscillation period must be positive")

    def offset(self, t: float) -> np.ndarray:
        if self.kind == "linear_drift":
            return np.asarray(self.velocity, dtype=np.float64) * t
        if self.kind == "oscillation":
            return np.asarray(self.amplitude, dtype=np.float64) * math.sin(
                2 * math.pi * t / self.period + self.phase)
        return np.zeros(3)


@dataclass(frozen=True)
class Ellipsoid:
    center: Vec3
    semi_axes: Vec3
    density: float
    rotation: float = 0.0  # about z, radians
    motion: Motion = field(default_factory=Motion)

    def __post_init__(self):
        if len(self.semi_axes) != 3 or min(self.semi_axes) <= 0:
            raise ValueError("ellipsoid semi-axes must be three positive lengths")
        if len(self.center) != 3:
            raise ValueError("ellipsoid center must have three coordinates")
        if not math.isfinite(self.density):
            raise ValueError("ellipsoid density must be finite")

    @property
    def moves(self) -> bool:
        return self.motion.kind != "static"

    def center_at(self, t: float) -> np.ndarray:
        return np.asarray(self.center, dtype=np.float64) + self.motion.offset(t)


@dataclass(frozen=True)
class PhantomSpec:
    ellipsoids: tuple[Ellipsoid, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ellipsoids", tuple(self.ellipsoids))

    @property
    def is_static(self) -> bool:
        return not any(e.moves for e in self.ellipsoids)

    def frozen(self) -> "PhantomSpec":
        """Same phantom with all motion removed."""
        return PhantomSpec(tuple(
            Ellipsoid(e.center, e.semi_axes, e.density, e.rotation) for e in self.ellipsoids))


def default_phantom(drift_mm_per_rotation: float = 32.0) -> PhantomSpec:
    """Torso surrogate with a drifting high-contrast insert at the isocentre.

    The insert trajectory is centred on the origin.  Off-centre static
    structures near both ends of the z range stand in for chest and liver
    anatomy, where half-scan data is incomplete.
    """
    v = drift_mm_per_rotation
    return PhantomSpec((
        Ellipsoid((0.0, 0.0, 0.0), (58.0, 46.0, 120.0), 0.020),
        Ellipsoid((-v / 2, 0.0, 0.0), (8.0, 8.0, 8.0), 0.020,
                  motion=Motion("linear_drift", velocity=(v, 0.0, 0.0))),
        Ellipsoid((28.0, -14.0, 48.0), (16.0, 11.0, 10.0), 0.010, rotation=0.4),
        Ellipsoid((-30.0, 16.0, 50.0), (10.0, 14.0, 9.0), -0.008),
        Ellipsoid((-26.0, -12.0, -48.0), (18.0, 13.0, 11.0), 0.012, rotation=-0.3),
        Ellipsoid((30.0, 18.0, -52.0), (9.0, 9.0, 8.0), 0.015),
    ))


def _span(coords: np.ndarray, centre: float, radius: float) -> slice:
    lo = np.searchsorted(coords, centre - radius, side="left")
    hi = np.searchsorted(coords, centre + radius, side="right")
    return slice(int(lo), int(hi))


def rasterize(spec: PhantomSpec, t: float, g: Geometry) -> Volume:
    """Sum of densities of the ellipsoids containing each voxel centre at phase t."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"scan phase {t} outside [0, 1]")
    xs, ys, zs = g.axis_coords()
    out = np.zeros(g.shape_zyx)
    Z, Y, X = np.meshgrid(zs, ys, xs, indexing="ij")
    for e in spec.ellipsoids:
        cx, cy, cz = e.center_at(t)
        a, b, c = e.semi_axes
        # cheap bounding-box cull before the quadratic test
        r = max(a, b)
        sel = (_span(zs, cz, c), _span(ys, cy, r), _span(xs, cx, r))
        dx = X[sel] - cx
        dy = Y[sel] - cy
        dz = Z[sel] - cz
        cr, sr = math.cos(e.rotation), math.sin(e.rotation)
        u = cr * dx + sr * dy
        w = -sr * dx + cr * dy
        inside = (u / a) ** 2 + (w / b) ** 2 + (dz / c) ** 2 <= 1.0
        out[sel] += np.where(inside, e.density, 0.0)
    return Volume(out, g.voxel_size)


def reference_phase(g: Geometry, half_indices: Sequence[int]) -> float:
    """Scan phase at the centre of a (non-wrapping) half-scan window."""
    idx = list(half_indices)
    n = g.num_views
    first = idx[0]
    centre = first + (len(idx) - 1) / 2.0
    return (centre % n) / n


def _view_noise(counts_mean: np.ndarray, seed: int, view: int) -> np.ndarray:
    # counter-based stream keyed by (seed, view): order independent
    bitgen = np.random.Philox(key=np.array([seed, view], dtype=np.uint64))
    return np.random.Generator(bitgen).poisson(counts_mean)


def simulate_sinogram(spec: PhantomSpec, g: Geometry, photons: float | None = None,
                      seed: int = 0) -> Sinogram:
    """Acquire one rotation; view ``v`` sees the phantom at phase ``v / num_views``.

    With ``photons`` (blank-scan count I0) each line integral ``p`` is replaced by
    ``-ln(max(N, 1) / I0)`` with ``N ~ Poisson(I0 exp(-p))``.
    """
    if photons is not None and not photons > 0:
        raise ValueError("photon count I0 must be positive")
    proj = projector_for(g)
    n = g.num_views
    if spec.is_static:
        sino = proj.forward(rasterize(spec, 0.0, g).values, range(n))
    else:
        sino = np.zeros(g.sinogram_shape)
        for v in range(n):
            x = rasterize(spec, v / n, g).values
            sino[v] = proj.forward(x, [v])[v]
    if photons is not None:
        for v in range(n):
            counts = _view_noise(photons * np.exp(-sino[v]), int(seed), v)
            sino[v] = -np.log(np.maximum(counts, 1) / photons)
    return Sinogram(sino)
