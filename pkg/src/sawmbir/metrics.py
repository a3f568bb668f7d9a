"""Per-slice RMSE profiles and moving-insert centroid / width measurements."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .projector import Volume

__all__ = ["SliceRmseProfile", "insert_centroid_and_width", "per_slice_rmse", "region_means"]


@dataclass(frozen=True)
class SliceRmseProfile:
    values: np.ndarray = field(repr=False)
    exclusion_applied: bool = True
    empty_slices: tuple[int, ...] = ()

    def __len__(self):
        return len(self.values)

    def rows(self):
        return [(z, float(v)) for z, v in enumerate(self.values)]


def per_slice_rmse(a: Volume, b: Volume, reference_for_exclusion: Volume | None = None) -> SliceRmseProfile:
    """RMSE between ``a`` and ``b`` per z slice over voxels where the reference is nonzero.

    The reference defaults to ``a``.  Slices without included voxels report 0
    and are listed in ``empty_slices``.
    """
    va = np.asarray(a.values, dtype=np.float64)
    vb = np.asarray(b.values, dtype=np.float64)
    if va.shape != vb.shape:
        raise ValueError(f"volume dims differ: {a.dims} vs {b.dims}")
    ref = va if reference_for_exclusion is None else np.asarray(reference_for_exclusion.values)
    if ref.shape != va.shape:
        raise ValueError(f"reference dims {ref.shape[::-1]} differ from {a.dims}")
    include = np.abs(ref) > 0
    sq = np.where(include, (va - vb) ** 2, 0.0)
    count = include.sum(axis=(1, 2))
    total = sq.sum(axis=(1, 2))
    with np.errstate(invalid="ignore", divide="ignore"):
        rmse = np.where(count > 0, np.sqrt(total / np.maximum(count, 1)), 0.0)
    empty = tuple(int(z) for z in np.flatnonzero(count == 0))
    return SliceRmseProfile(rmse, True, empty)


def region_means(profile: SliceRmseProfile) -> dict[str, float]:
    """Mean RMSE over the centre third and the outer sixths of the slices."""
    v = np.asarray(profile.values)
    n = len(v)
    sixth = max(1, n // 6)
    lo, hi = n // 3, n - n // 3
    edges = np.concatenate([v[:sixth], v[n - sixth:]])
    return {"center_third": float(v[lo:hi].mean()), "edge_sixths": float(edges.mean()),
            "all": float(v.mean())}


def _axis_coords(n: int, d: float) -> np.ndarray:
    return (np.arange(n) - (n - 1) / 2.0) * d


def _fwhm(profile: np.ndarray, spacing: float) -> float:
    peak = int(np.argmax(profile))
    half = profile[peak] / 2.0
    if half <= 0:
        return 0.0
    left = float(peak)
    for i in range(peak, 0, -1):
        if profile[i - 1] < half:
            left = i - (profile[i] - half) / (profile[i] - profile[i - 1])
            break
    else:
        left = 0.0
    right = float(peak)
    for i in range(peak, len(profile) - 1):
        if profile[i + 1] < half:
            right = i + (profile[i] - half) / (profile[i] - profile[i + 1])
            break
    else:
        right = float(len(profile) - 1)
    return (right - left) * spacing


def insert_centroid_and_width(x: Volume, roi: tuple[slice, slice, slice]):
    """Centroid (mm, x/y/z order) and per-axis FWHM (mm) of a bright insert.

    ``roi`` is a (z, y, x) tuple of slices.  Intensities are taken relative to
    the ROI minimum; FWHM is measured on the profile through the centroid.
    """
    vals = np.asarray(x.values, dtype=np.float64)
    nz, ny, nx = vals.shape
    idx = [np.arange(n)[s] for n, s in zip((nz, ny, nx), roi)]
    if any(len(i) == 0 for i in idx):
        raise ValueError("empty ROI")
    sub = vals[np.ix_(*idx)]
    sub = sub - sub.min()
    total = sub.sum()
    if not total > 0:
        raise ValueError("degenerate ROI: intensities are all equal")
    dx, dy, dz = x.voxel_size
    coords = [_axis_coords(nz, dz)[idx[0]], _axis_coords(ny, dy)[idx[1]], _axis_coords(nx, dx)[idx[2]]]
    cz = float((sub.sum(axis=(1, 2)) * coords[0]).sum() / total)
    cy = float((sub.sum(axis=(0, 2)) * coords[1]).sum() / total)
    cx = float((sub.sum(axis=(0, 1)) * coords[2]).sum() / total)
    near = [int(np.argmin(np.abs(c - v))) for c, v in zip(coords, (cz, cy, cx))]
    fw_x = _fwhm(sub[near[0], near[1], :], dx)
    fw_y = _fwhm(sub[near[0], :, near[2]], dy)
    fw_z = _fwhm(sub[:, near[1], near[2]], dz)
    return (cx, cy, cz), (fw_x, fw_y, fw_z)
