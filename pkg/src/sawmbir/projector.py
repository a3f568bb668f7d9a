"""Ray-driven cone-beam projector with an exactly matched back projector.

Each detector element defines one ray from the source to the element centre.
The ray is clipped to the interpolation support of the volume and sampled at
uniform midpoints with spacing no larger than half the smallest voxel edge;
every sample reads the volume by trilinear interpolation.  The back projector
scatters the very same weights, so ``<A x, s> == <x, A^T s>`` up to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange

from .geometry import Geometry, Mask, ViewSubset

__all__ = [
    "Sinogram",
    "Volume",
    "back_project",
    "forward_project",
    "masked_back_project",
    "set_threads",
]

# Back projection accumulates per view-chunk buffers that are summed in a fixed
# order, so results do not depend on the thread count.
_NUM_CHUNKS = 8


@dataclass(frozen=True)
class Volume:
    values: np.ndarray = field(repr=False)
    voxel_size: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim != 3:
            raise ValueError("volume values must be a 3-D (z, y, x) array")
        if not np.all(np.isfinite(vals)):
            raise ValueError("volume values must be finite")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "voxel_size", tuple(float(v) for v in self.voxel_size))

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.values.shape
        return (nx, ny, nz)

    @classmethod
    def zeros(cls, geometry: Geometry) -> "Volume":
        return cls(np.zeros(geometry.shape_zyx), geometry.voxel_size)


@dataclass(frozen=True)
class Sinogram:
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim != 3:
            raise ValueError("sinogram values must be a (view, row, col) array")
        if not np.all(np.isfinite(vals)):
            raise ValueError("sinogram values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def num_views(self) -> int:
        return self.values.shape[0]

    @property
    def detector_rows(self) -> int:
        return self.values.shape[1]

    @property
    def detector_cols(self) -> int:
        return self.values.shape[2]

    @classmethod
    def zeros(cls, geometry: Geometry) -> "Sinogram":
        return cls(np.zeros(geometry.sinogram_shape))


def set_threads(n: int | None) -> None:
    """Cap numba worker threads (``None`` leaves the default)."""
    if n is not None:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _clip_ray(sx, sy, sz, px, py, pz, ex, ey, ez):
    """Parameter interval [t0, t1] of the segment s->p inside the box |.| <= e."""
    t0 = 0.0
    t1 = 1.0
    o = (sx, sy, sz)
    d = (px - sx, py - sy, pz - sz)
    e = (ex, ey, ez)
    for a in range(3):
        if abs(d[a]) < 1e-12:
            if o[a] < -e[a] or o[a] > e[a]:
                return 1.0, 0.0
        else:
            ta = (-e[a] - o[a]) / d[a]
            tb = (e[a] - o[a]) / d[a]
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
    return t0, t1


@njit(cache=True, inline="always")
def _ray_geometry(src, det, uax, v, r, c, ucoord, vcoord):
    sx, sy, sz = src[v, 0], src[v, 1], src[v, 2]
    u = ucoord[c]
    px = det[v, 0] + u * uax[v, 0]
    py = det[v, 1] + u * uax[v, 1]
    pz = det[v, 2] + vcoord[r]
    return sx, sy, sz, px, py, pz


@njit(parallel=True, cache=True)
def _forward_kernel(vol, src, det, uax, ucoord, vcoord, views, spacing, step, out):
    nz, ny, nx = vol.shape
    dx, dy, dz = spacing[0], spacing[1], spacing[2]
    ex = 0.5 * (nx + 1) * dx
    ey = 0.5 * (ny + 1) * dy
    ez = 0.5 * (nz + 1) * dz
    ox = -0.5 * (nx - 1) * dx
    oy = -0.5 * (ny - 1) * dy
    oz = -0.5 * (nz - 1) * dz
    nrows = vcoord.shape[0]
    ncols = ucoord.shape[0]
    per_view = nrows * ncols
    nrays = views.shape[0] * per_view
    for idx in prange(nrays):
        v = views[idx // per_view]
        rem = idx % per_view
        r = rem // ncols
        c = rem % ncols
        sx, sy, sz, px, py, pz = _ray_geometry(src, det, uax, v, r, c, ucoord, vcoord)
        t0, t1 = _clip_ray(sx, sy, sz, px, py, pz, ex, ey, ez)
        if t1 <= t0:
            out[v, r, c] = 0.0
            continue
        lx = px - sx
        ly = py - sy
        lz = pz - sz
        seg = (t1 - t0) * math.sqrt(lx * lx + ly * ly + lz * lz)
        n = int(math.ceil(seg / step))
        if n < 1:
            n = 1
        ds = seg / n
        dt = (t1 - t0) / n
        acc = 0.0
        for k in range(n):
            t = t0 + (k + 0.5) * dt
            fx = (sx + t * lx - ox) / dx
            fy = (sy + t * ly - oy) / dy
            fz = (sz + t * lz - oz) / dz
            ix = int(math.floor(fx))
            iy = int(math.floor(fy))
            iz = int(math.floor(fz))
            ax = fx - ix
            ay = fy - iy
            az = fz - iz
            val = 0.0
            for kz in range(2):
                jz = iz + kz
                if jz < 0 or jz >= nz:
                    continue
                wz = az if kz == 1 else 1.0 - az
                for ky in range(2):
                    jy = iy + ky
                    if jy < 0 or jy >= ny:
                        continue
                    wy = ay if ky == 1 else 1.0 - ay
                    for kx in range(2):
                        jx = ix + kx
                        if jx < 0 or jx >= nx:
                            continue
                        wx = ax if kx == 1 else 1.0 - ax
                        val += wz * wy * wx * vol[jz, jy, jx]
            acc += val
        out[v, r, c] = acc * ds


@njit(parallel=True, cache=True)
def _back_kernel(sino, src, det, uax, ucoord, vcoord, wa, wb, use_b, spacing, step,
                 acc_a, acc_b):
    """Scatter ``wa * sino`` into acc_a (and ``wb * sino`` into acc_b).

    ``acc_*`` have a leading chunk axis; chunk ``k`` handles views ``v`` with
    ``v % nchunks == k`` in ascending order.
    """
    nchunks, nz, ny, nx = acc_a.shape
    dx, dy, dz = spacing[0], spacing[1], spacing[2]
    ex = 0.5 * (nx + 1) * dx
    ey = 0.5 * (ny + 1) * dy
    ez = 0.5 * (nz + 1) * dz
    ox = -0.5 * (nx - 1) * dx
    oy = -0.5 * (ny - 1) * dy
    oz = -0.5 * (nz - 1) * dz
    nviews, nrows, ncols = sino.shape
    for chunk in prange(nchunks):
        for v in range(chunk, nviews, nchunks):
            for r in range(nrows):
                for c in range(ncols):
                    s = sino[v, r, c]
                    sa = s * wa[v, c]
                    sb = s * wb[v, c] if use_b else 0.0
                    if sa == 0.0 and sb == 0.0:
                        continue
                    sx, sy, sz, px, py, pz = _ray_geometry(src, det, uax, v, r, c, ucoord, vcoord)
                    t0, t1 = _clip_ray(sx, sy, sz, px, py, pz, ex, ey, ez)
                    if t1 <= t0:
                        continue
                    lx = px - sx
                    ly = py - sy
                    lz = pz - sz
                    seg = (t1 - t0) * math.sqrt(lx * lx + ly * ly + lz * lz)
                    n = int(math.ceil(seg / step))
                    if n < 1:
                        n = 1
                    ds = seg / n
                    dt = (t1 - t0) / n
                    sa *= ds
                    sb *= ds
                    for k in range(n):
                        t = t0 + (k + 0.5) * dt
                        fx = (sx + t * lx - ox) / dx
                        fy = (sy + t * ly - oy) / dy
                        fz = (sz + t * lz - oz) / dz
                        ix = int(math.floor(fx))
                        iy = int(math.floor(fy))
                        iz = int(math.floor(fz))
                        ax = fx - ix
                        ay = fy - iy
                        az = fz - iz
                        for kz in range(2):
                            jz = iz + kz
                            if jz < 0 or jz >= nz:
                                continue
                            wz = az if kz == 1 else 1.0 - az
                            for ky in range(2):
                                jy = iy + ky
                                if jy < 0 or jy >= ny:
                                    continue
                                wy = ay if ky == 1 else 1.0 - ay
                                for kx in range(2):
                                    jx = ix + kx
                                    if jx < 0 or jx >= nx:
                                        continue
                                    wx = ax if kx == 1 else 1.0 - ax
                                    w = wz * wy * wx
                                    acc_a[chunk, jz, jy, jx] += w * sa
                                    if use_b:
                                        acc_b[chunk, jz, jy, jx] += w * sb


# --------------------------------------------------------------------------
# array-level operators (used by recon)
# --------------------------------------------------------------------------

class Projector:
    """Array-level A / A^T for one geometry; caches trajectory tables."""

    def __init__(self, geometry: Geometry):
        self.geometry = geometry
        src, det, uax = geometry.trajectory()
        self._src = np.ascontiguousarray(src)
        self._det = np.ascontiguousarray(det)
        self._uax = np.ascontiguousarray(uax)
        self._ucoord = geometry.column_coords()
        self._vcoord = geometry.row_coords()
        self._spacing = np.asarray(geometry.voxel_size, dtype=np.float64)
        self.step = 0.5 * min(geometry.voxel_size)
        self.nchunks = min(_NUM_CHUNKS, geometry.num_views)

    def _view_array(self, views) -> np.ndarray:
        if isinstance(views, ViewSubset):
            views = views.indices
        return np.asarray(sorted(views), dtype=np.int64)

    def forward(self, x: np.ndarray, views) -> np.ndarray:
        g = self.geometry
        if x.shape != g.shape_zyx:
            raise ValueError(f"volume shape {x.shape} does not match geometry {g.shape_zyx}")
        out = np.zeros(g.sinogram_shape)
        _forward_kernel(np.ascontiguousarray(x, dtype=np.float64), self._src, self._det,
                        self._uax, self._ucoord, self._vcoord, self._view_array(views),
                        self._spacing, self.step, out)
        return out

    def view_weights(self, views) -> np.ndarray:
        """(num_views, cols) indicator of the selected views."""
        w = np.zeros((self.geometry.num_views, self.geometry.detector_cols))
        w[self._view_array(views)] = 1.0
        return w

    def back_weighted(self, s: np.ndarray, wa: np.ndarray, wb: np.ndarray | None = None):
        """Back project ``wa * s`` (and ``wb * s`` in the same pass)."""
        g = self.geometry
        if s.shape != g.sinogram_shape:
            raise ValueError(f"sinogram shape {s.shape} does not match geometry {g.sinogram_shape}")
        use_b = wb is not None
        acc_a = np.zeros((self.nchunks,) + g.shape_zyx)
        acc_b = np.zeros((self.nchunks,) + g.shape_zyx) if use_b else np.zeros((1, 1, 1, 1))
        _back_kernel(np.ascontiguousarray(s, dtype=np.float64), self._src, self._det, self._uax,
                     self._ucoord, self._vcoord, np.ascontiguousarray(wa, dtype=np.float64),
                     np.ascontiguousarray(wb if use_b else wa, dtype=np.float64), use_b,
                     self._spacing, self.step, acc_a, acc_b)
        a = _chunk_sum(acc_a)
        return (a, _chunk_sum(acc_b)) if use_b else a

    def back(self, s: np.ndarray, views) -> np.ndarray:
        return self.back_weighted(s, self.view_weights(views))

    def back_masked(self, s, half_weights, full_views, mask_values, both=False):
        """mask * BP_half + (1 - mask) * BP_full in a single traversal.

        ``half_weights`` is a (num_views, cols) weight on the half-scan branch
        (view indicator, optionally Parker-smoothed); ``full_views`` selects the
        full-scan branch.  With ``both=True`` also returns the two branches.
        """
        bp_half, bp_full = self.back_weighted(s, half_weights, self.view_weights(full_views))
        out = mask_values * bp_half + (1.0 - mask_values) * bp_full
        return (out, bp_half, bp_full) if both else out


def _chunk_sum(acc: np.ndarray) -> np.ndarray:
    out = acc[0].copy()
    for k in range(1, acc.shape[0]):
        out += acc[k]
    return out


_CACHE: dict[Geometry, Projector] = {}


def projector_for(geometry: Geometry) -> Projector:
    proj = _CACHE.get(geometry)
    if proj is None:
        if len(_CACHE) > 16:
            _CACHE.clear()
        proj = _CACHE[geometry] = Projector(geometry)
    return proj


# --------------------------------------------------------------------------
# public operators on Volume / Sinogram
# --------------------------------------------------------------------------

def _check_volume(x: Volume, g: Geometry):
    if x.dims != tuple(g.volume_dims):
        raise ValueError(f"volume dims {x.dims} do not match geometry {tuple(g.volume_dims)}")


def _check_sinogram(s: Sinogram, g: Geometry):
    if s.values.shape != g.sinogram_shape:
        raise ValueError(f"sinogram shape {s.values.shape} does not match geometry {g.sinogram_shape}")


def forward_project(x: Volume, g: Geometry, views: ViewSubset) -> Sinogram:
    """Line integrals of ``x`` for the selected views; other views are zero."""
    _check_volume(x, g)
    return Sinogram(projector_for(g).forward(x.values, views))


def back_project(s: Sinogram, g: Geometry, views: ViewSubset) -> Volume:
    """Exact transpose of :func:`forward_project` restricted to ``views``."""
    _check_sinogram(s, g)
    return Volume(projector_for(g).back(s.values, views), g.voxel_size)


def masked_back_project(s: Sinogram, g: Geometry, half: ViewSubset, mask: Mask,
                        half_weights: np.ndarray | None = None) -> Volume:
    """Half-scan back projection inside the mask, full-scan outside.

    Per voxel ``j``: ``mask[j] * BP_half(s)[j] + (1 - mask[j]) * BP_full(s)[j]``.
    ``half_weights`` optionally replaces the binary half-scan view indicator
    (e.g. Parker weights from :func:`sawmbir.weights.view_transition_weights`).
    """
    if half.kind != "half":
        raise ValueError("masked_back_project needs a half-scan ViewSubset")
    _check_sinogram(s, g)
    if mask.values.shape != g.shape_zyx:
        raise ValueError(f"mask shape {mask.values.shape} does not match geometry {g.shape_zyx}")
    proj = projector_for(g)
    wa = proj.view_weights(half) if half_weights is None else half_weights
    out = proj.back_masked(s.values, wa, range(g.num_views), mask.values)
    return Volume(out, g.voxel_size)
