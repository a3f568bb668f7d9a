"""Feldkamp-type analytic reconstruction used to initialise the iterations."""
from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

from .geometry import Geometry, ViewSubset
from .projector import Sinogram, Volume
from .weights import view_transition_weights

__all__ = ["fdk", "ramp_filter"]


def ramp_filter(n: int, spacing: float) -> np.ndarray:
    """Frequency response of the band-limited ramp (Ram-Lak) with a Hann window.

    Built from the spatial kernel to avoid the DC offset of a sampled |f|.
    Length is the next power of two >= 2n.
    """
    size = 1 << max(1, int(math.ceil(math.log2(2 * n))))
    k = np.fft.fftfreq(size, d=1.0 / size)  # integer lags
    h = np.zeros(size)
    h[0] = 1.0 / (4.0 * spacing ** 2)
    odd = (k.astype(np.int64) % 2) != 0
    h[odd] = -1.0 / (math.pi * k[odd] * spacing) ** 2
    response = np.real(np.fft.fft(h)) * spacing
    window = 0.5 * (1.0 + np.cos(2.0 * math.pi * np.fft.fftfreq(size)))
    return response * window


@njit(parallel=True, cache=True)
def _fdk_backproject(q, cosv, sinv, scale, R, D, ucol0, du, vrow0, dv, xs, ys, zs, out):
    nviews, nrows, ncols = q.shape
    nz = zs.shape[0]
    ny = ys.shape[0]
    nx = xs.shape[0]
    for iz in prange(nz):
        z = zs[iz]
        for iy in range(ny):
            y = ys[iy]
            for ix in range(nx):
                x = xs[ix]
                acc = 0.0
                for v in range(nviews):
                    if scale[v] == 0.0:
                        continue
                    U = R - (x * cosv[v] + y * sinv[v])
                    if U <= 0.0:
                        continue
                    fc = (D * (-x * sinv[v] + y * cosv[v]) / U - ucol0) / du
                    fr = (D * z / U - vrow0) / dv
                    c0 = int(math.floor(fc))
                    r0 = int(math.floor(fr))
                    ac = fc - c0
                    ar = fr - r0
                    val = 0.0
                    for kr in range(2):
                        r = r0 + kr
                        if r < 0 or r >= nrows:
                            continue
                        wr = ar if kr == 1 else 1.0 - ar
                        for kc in range(2):
                            c = c0 + kc
                            if c < 0 or c >= ncols:
                                continue
                            wc = ac if kc == 1 else 1.0 - ac
                            val += wr * wc * q[v, r, c]
                    acc += scale[v] * (R / U) ** 2 * val
                out[iz, iy, ix] = acc


def fdk(y: Sinogram, g: Geometry, views: ViewSubset) -> Volume:
    """Cosine-weighted, ramp-filtered, distance-weighted cone-beam back projection.

    Full subsets are averaged over the redundant rotation (factor 1/2); half
    subsets use Parker redundancy weights instead.
    """
    R = g.source_to_iso_distance
    D = g.source_to_detector_distance
    mag = R / D
    u = g.column_coords()
    v = g.row_coords()
    p = np.asarray(y.values, dtype=np.float64)
    if p.shape != g.sinogram_shape:
        raise ValueError(f"sinogram shape {p.shape} does not match geometry {g.sinogram_shape}")

    uu, vv = np.meshgrid(u * mag, v * mag, indexing="xy")  # (rows, cols) at isocentre
    cosine = R / np.sqrt(R * R + uu * uu + vv * vv)
    if views.kind == "half":
        redundancy = view_transition_weights(g, views, "parker")
        per_view = np.full(g.num_views, g.view_spacing)
    else:
        redundancy = np.ones((g.num_views, g.detector_cols))
        per_view = np.full(g.num_views, 0.5 * g.view_spacing)
    selected = views.indicator(g.num_views)
    per_view = np.where(selected, per_view, 0.0)

    weighted = p * cosine[None] * redundancy[:, None, :]
    response = ramp_filter(g.detector_cols, g.detector_col_spacing * mag)
    padded = np.zeros(weighted.shape[:2] + (response.size,))
    padded[..., : g.detector_cols] = weighted
    q = np.real(np.fft.ifft(np.fft.fft(padded, axis=-1) * response, axis=-1))[..., : g.detector_cols]
    q = np.where(selected[:, None, None], q, 0.0)

    angles = g.view_angles
    xs, ys, zs = g.axis_coords()
    out = np.zeros(g.shape_zyx)
    _fdk_backproject(np.ascontiguousarray(q), np.cos(angles), np.sin(angles), per_view, R, D,
                     float(u[0]), g.detector_col_spacing, float(v[0]), g.detector_row_spacing,
                     xs, ys, zs, out)
    return Volume(out, g.voxel_size)
