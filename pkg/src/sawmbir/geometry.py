"""Axial cone-beam acquisition geometry, view subsets and the half-scan mask.

Coordinate conventions (all lengths in mm):

* The rotation axis is ``z``; the source sits at ``R (cos t, sin t, 0)`` for
  view angle ``t`` and the flat detector is centred at ``-(D - R) (cos t, sin t, 0)``.
* Detector column axis ``u = (-sin t, cos t, 0)``, row axis ``v = z``.
* Volume arrays are indexed ``[z, y, x]`` (x fastest) and voxel centres are
  symmetric about the isocentre.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Mapping

import numpy as np
from scipy import ndimage

__all__ = [
    "DEFAULT_GEOMETRY",
    "Geometry",
    "GeometryError",
    "Mask",
    "ViewSubset",
    "compute_mask",
    "detector_hits",
    "full_scan_views",
    "half_scan_views",
    "make_geometry",
]

# Desk-scale default: 64^3 volume of 2 mm voxels, 72 views, 48x24 detector.
DEFAULT_GEOMETRY: dict[str, object] = {
    "source_to_iso": 300.0,
    "source_to_detector": 480.0,
    "detector_cols": 48,
    "detector_rows": 24,
    "col_spacing": 10.0,
    "row_spacing": 8.0,
    "num_views": 72,
    "angle_offset": 0.0,
    "volume_dims": (64, 64, 64),
    "voxel_size": (2.0, 2.0, 2.0),
}

_SPAN_EPS = 1e-9


class GeometryError(ValueError):
    """Invalid scanner description."""


@dataclass(frozen=True)
class Geometry:
    source_to_iso_distance: float
    source_to_detector_distance: float
    detector_cols: int
    detector_rows: int
    detector_col_spacing: float
    detector_row_spacing: float
    num_views: int
    volume_dims: tuple[int, int, int]
    voxel_size: tuple[float, float, float]
    angle_offset: float = 0.0

    def __post_init__(self):
        for name in ("detector_cols", "detector_rows"):
            if getattr(self, name) < 1:
                raise GeometryError(f"{name}: detector narrower than one element")
        if self.num_views < 2:
            raise GeometryError("num_views: need at least 2 views")
        for name in ("detector_col_spacing", "detector_row_spacing", "source_to_iso_distance"):
            if not getattr(self, name) > 0:
                raise GeometryError(f"{name}: must be positive")
        if not self.source_to_detector_distance > self.source_to_iso_distance:
            raise GeometryError("source_to_detector_distance: must exceed source_to_iso_distance")
        if len(self.volume_dims) != 3 or min(self.volume_dims) < 1:
            raise GeometryError("volume_dims: need three counts >= 1")
        if len(self.voxel_size) != 3 or not min(self.voxel_size) > 0:
            raise GeometryError("voxel_size: need three positive lengths")

    @property
    def fan_angle(self) -> float:
        half_width = self.detector_cols * self.detector_col_spacing / 2
        return 2.0 * math.atan(half_width / self.source_to_detector_distance)

    @property
    def view_spacing(self) -> float:
        return 2.0 * math.pi / self.num_views

    @property
    def view_angles(self) -> np.ndarray:
        return self.angle_offset + np.arange(self.num_views) * self.view_spacing

    @property
    def shape_zyx(self) -> tuple[int, int, int]:
        nx, ny, nz = self.volume_dims
        return (nz, ny, nx)

    @property
    def sinogram_shape(self) -> tuple[int, int, int]:
        return (self.num_views, self.detector_rows, self.detector_cols)

    @property
    def detector_width(self) -> float:
        return self.detector_cols * self.detector_col_spacing

    @property
    def detector_height(self) -> float:
        return self.detector_rows * self.detector_row_spacing

    def axis_coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Voxel-centre coordinates (x, y, z) along each axis, in mm."""
        return tuple(
            (np.arange(n) - (n - 1) / 2.0) * d
            for n, d in zip(self.volume_dims, self.voxel_size)
        )

    def column_coords(self) -> np.ndarray:
        n = self.detector_cols
        return (np.arange(n) - (n - 1) / 2.0) * self.detector_col_spacing

    def row_coords(self) -> np.ndarray:
        n = self.detector_rows
        return (np.arange(n) - (n - 1) / 2.0) * self.detector_row_spacing

    def trajectory(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-view source position, detector centre and detector column axis."""
        t = self.view_angles
        c, s = np.cos(t), np.sin(t)
        zero = np.zeros_like(t)
        R = self.source_to_iso_distance
        off = self.source_to_detector_distance - R
        src = np.stack([R * c, R * s, zero], axis=1)
        det = np.stack([-off * c, -off * s, zero], axis=1)
        uax = np.stack([-s, c, zero], axis=1)
        return src, det, uax


def _triple(value, name, cast):
    if isinstance(value, str):
        value = [v for v in value.replace(",", " ").split()]
    if np.isscalar(value):
        value = (value,) * 3
    try:
        out = tuple(cast(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise GeometryError(f"{name}: {exc}") from None
    if len(out) != 3:
        raise GeometryError(f"{name}: expected three values, got {len(out)}")
    return out


def make_geometry(config: Mapping[str, object] | None = None, **overrides) -> Geometry:
    """Build a validated :class:`Geometry` from a flat scanner description.

    Missing keys fall back to :data:`DEFAULT_GEOMETRY`; unknown keys are rejected.
    """
    cfg = dict(DEFAULT_GEOMETRY)
    for source in (config or {}), overrides:
        for key, value in source.items():
            if key not in DEFAULT_GEOMETRY:
                raise GeometryError(f"{key}: unknown geometry key")
            cfg[key] = value

    def num(key, cast=float):
        try:
            return cast(cfg[key])
        except (TypeError, ValueError):
            raise GeometryError(f"{key}: not a number: {cfg[key]!r}") from None

    for key in ("source_to_iso", "source_to_detector", "col_spacing", "row_spacing"):
        if not num(key) > 0:
            raise GeometryError(f"{key}: must be positive")
    for key in ("detector_cols", "detector_rows"):
        if num(key, int) < 1:
            raise GeometryError(f"{key}: detector narrower than one element")
    if num("num_views", int) < 2:
        raise GeometryError("num_views: need at least 2 views")
    dims = _triple(cfg["volume_dims"], "volume_dims", int)
    if min(dims) < 1:
        raise GeometryError("volume_dims: counts must be >= 1")
    voxel = _triple(cfg["voxel_size"], "voxel_size", float)
    if not min(voxel) > 0:
        raise GeometryError("voxel_size: lengths must be positive")

    return Geometry(
        source_to_iso_distance=num("source_to_iso"),
        source_to_detector_distance=num("source_to_detector"),
        detector_cols=num("detector_cols", int),
        detector_rows=num("detector_rows", int),
        detector_col_spacing=num("col_spacing"),
        detector_row_spacing=num("row_spacing"),
        num_views=num("num_views", int),
        volume_dims=dims,
        voxel_size=voxel,
        angle_offset=num("angle_offset"),
    )


@dataclass(frozen=True)
class ViewSubset:
    indices: tuple[int, ...]
    kind: Literal["full", "half"]

    def __len__(self):
        return len(self.indices)

    def indicator(self, num_views: int) -> np.ndarray:
        sel = np.zeros(num_views, dtype=bool)
        sel[list(self.indices)] = True
        return sel


def full_scan_views(geometry: Geometry) -> ViewSubset:
    return ViewSubset(tuple(range(geometry.num_views)), "full")


def half_scan_view_count(geometry: Geometry) -> int:
    """ceil((pi + fan) / dtheta) + 1 whole views; the +1 closes the endpoint."""
    ratio = (math.pi + geometry.fan_angle) / geometry.view_spacing
    return math.ceil(ratio - _SPAN_EPS) + 1


def half_scan_views(geometry: Geometry, start_index: int = 0) -> ViewSubset:
    """Smallest contiguous run of views spanning at least pi + fan angle."""
    n = geometry.num_views
    if not 0 <= start_index < n:
        raise GeometryError(f"start_index: {start_index} outside [0, {n})")
    if geometry.fan_angle >= math.pi:
        raise GeometryError("fan_angle: half-scan span pi + fan exceeds a full rotation")
    count = half_scan_view_count(geometry)
    if count > n:
        raise GeometryError(
            f"num_views: {n} views cannot hold a {count}-view half scan"
        )
    return ViewSubset(tuple((start_index + k) % n for k in range(count)), "half")


def span_of(geometry: Geometry, subset: ViewSubset) -> float:
    return (len(subset) - 1) * geometry.view_spacing


def detector_hits(geometry: Geometry, views) -> np.ndarray:
    """Boolean ``(nz, ny, nx)`` array: voxel centre lands on the detector for every view."""
    xs, ys, zs = geometry.axis_coords()
    X, Y = np.meshgrid(xs, ys, indexing="xy")  # (ny, nx)
    R = geometry.source_to_iso_distance
    D = geometry.source_to_detector_distance
    half_w = geometry.detector_width / 2
    half_h = geometry.detector_height / 2
    angles = geometry.view_angles
    inside = np.ones(geometry.shape_zyx, dtype=bool)
    for v in views:
        c, s = math.cos(angles[v]), math.sin(angles[v])
        depth = R - (X * c + Y * s)  # distance from source along the central ray
        u = D * (-X * s + Y * c) / depth
        in_u = (np.abs(u) <= half_w) & (depth > 0)
        # |v| = D |z| / depth, compared per slice
        vmag = D * np.abs(zs)[:, None, None] / depth[None, :, :]
        inside &= in_u[None, :, :] & (vmag <= half_h)
    return inside


@dataclass(frozen=True)
class Mask:
    values: np.ndarray = field(repr=False)
    feather_width: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 3:
            raise ValueError("mask values must be a 3-D (z, y, x) array")
        if not np.all(np.isfinite(vals)) or vals.min(initial=0) < 0 or vals.max(initial=0) > 1:
            raise ValueError("mask values must lie in [0, 1]")
        if self.feather_width < 0:
            raise ValueError("feather_width must be >= 0")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, geometry: Geometry, value: float) -> "Mask":
        return cls(np.full(geometry.shape_zyx, float(value)))


def compute_mask(geometry: Geometry, half: ViewSubset, feather_width: float = 0.0) -> Mask:
    """Mask that is 1 on voxels completely sampled by the half-scan views.

    With ``feather_width > 0`` the inside of the binary region is ramped
    linearly from 0 at the boundary to 1 at ``feather_width`` mm depth, so the
    value 1 still only occurs at completely sampled voxels.
    """
    if half.kind != "half":
        raise ValueError("compute_mask needs a half-scan ViewSubset")
    if feather_width < 0:
        raise ValueError("feather_width must be >= 0")
    binary = detector_hits(geometry, half.indices)
    values = binary.astype(np.float64)
    if feather_width > 0 and binary.any() and not binary.all():
        dx, dy, dz = geometry.voxel_size
        dist = ndimage.distance_transform_edt(binary, sampling=(dz, dy, dx))
        values = np.clip(dist / feather_width, 0.0, 1.0) * binary
    return Mask(values, float(feather_width))
