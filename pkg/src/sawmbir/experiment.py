"""Pipeline steps behind the CLI: simulate, mask, reconstruct, compare, demo."""
from __future__ import annotations

import json
import logging
import math
import time
from pathlib import Path

import numpy as np

from .config import RunConfig
from .geometry import Geometry, Mask, compute_mask, half_scan_views
from .io import read_sinogram, read_volume, write_csv, write_sinogram, write_volume
from .metrics import insert_centroid_and_width, per_slice_rmse, region_means
from .phantom import PhantomSpec, rasterize, reference_phase, simulate_sinogram
from .projector import Volume
from .recon import ReconError, reconstruct

log = logging.getLogger(__name__)

MODES = {"full": "full_mbir", "half": "half_mbir", "saw": "saw_mbir"}

SINOGRAM = "sinogram.saws"
TRUTH = "truth.sawv"
MASK = "mask.sawv"
MANIFEST = "manifest.ini"


def _out(cfg: RunConfig) -> Path:
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(cfg: RunConfig, out: Path, command: str) -> Path:
    path = out / MANIFEST
    header = f"# sawmbir run manifest\n# command = {command}\n# seed = {cfg.seed}\n"
    path.write_text(header + cfg.dumps())
    return path


def simulate(cfg: RunConfig) -> dict[str, Path]:
    """Sinogram of the (possibly moving) phantom and ground truth at the reference phase."""
    g = cfg.geometry
    spec = cfg.phantom
    out = _out(cfg)
    half = half_scan_views(g, cfg.recon().half_scan_start)
    y = simulate_sinogram(spec, g, cfg.photons, cfg.seed)
    truth = rasterize(spec, reference_phase(g, half.indices), g)
    paths = {"manifest": write_manifest(cfg, out, "simulate")}
    if "sinogram" in cfg.artifacts:
        paths["sinogram"] = out / SINOGRAM
        write_sinogram(y, paths["sinogram"])
    if "truth" in cfg.artifacts:
        paths["truth"] = out / TRUTH
        write_volume(truth, paths["truth"])
    return paths


def mask_for(cfg: RunConfig) -> Mask:
    g = cfg.geometry
    rc = cfg.recon("saw_mbir")
    if rc.mask_file:
        return Mask(np.asarray(read_volume(rc.mask_file).values, dtype=np.float64))
    return compute_mask(g, half_scan_views(g, rc.half_scan_start), rc.mask_feather)


def mask_area_rows(mask: Mask, g: Geometry):
    dx, dy, _ = g.voxel_size
    binary = (mask.values >= 1.0).sum(axis=(1, 2))
    area = mask.values.sum(axis=(1, 2)) * dx * dy
    return [(z, int(n), float(a)) for z, (n, a) in enumerate(zip(binary, area))]


def make_mask(cfg: RunConfig) -> dict[str, Path]:
    g = cfg.geometry
    out = _out(cfg)
    mask = mask_for(cfg)
    paths = {"mask": out / MASK}
    write_volume(Volume(mask.values, g.voxel_size), paths["mask"])
    if "mask_area" in cfg.artifacts:
        paths["mask_area"] = out / "mask_area.csv"
        write_csv(paths["mask_area"], ["slice_index", "full_voxels", "area_mm2"],
                  mask_area_rows(mask, g))
    return paths


def reconstruct_mode(cfg: RunConfig, mode: str, sinogram_path=None, mask: Mask | None = None):
    """Reconstruct from the stored sinogram; returns (paths, volume, report)."""
    if mode not in MODES:
        raise ValueError(f"mode: one of {sorted(MODES)}, got {mode!r}")
    g = cfg.geometry
    out = _out(cfg)
    src = Path(sinogram_path) if sinogram_path else out / SINOGRAM
    if not src.is_file():
        raise FileNotFoundError(f"sinogram not found: {src}")
    y = read_sinogram(src)
    rc = cfg.recon(MODES[mode])
    if mode == "saw" and mask is None:
        mask = mask_for(cfg)
    x, report = reconstruct(y, g, rc, mask=mask)
    paths = {}
    if "reconstructions" in cfg.artifacts:
        paths["volume"] = out / f"recon_{mode}.sawv"
        write_volume(x, paths["volume"])
    if "reports" in cfg.artifacts:
        paths["report"] = out / f"report_{mode}.csv"
        report.write_csv(paths["report"])
    return paths, x, report


def compare(a: Volume, b: Volume, reference: Volume | None, csv_path=None) -> dict:
    profile = per_slice_rmse(a, b, reference)
    if csv_path is not None:
        write_csv(csv_path, ["slice_index", "rmse"], profile.rows())
    summary = region_means(profile)
    summary["empty_slices"] = list(profile.empty_slices)
    return summary


def compare_files(path_a, path_b, reference_path=None, csv_path=None) -> dict:
    a = read_volume(path_a)
    b = read_volume(path_b)
    ref = read_volume(reference_path) if reference_path else None
    return compare(a, b, ref, csv_path)


def format_summary(name: str, summary: dict) -> str:
    return (f"{name}: mean RMSE center third = {summary['center_third']:.6g}, "
            f"edge sixths = {summary['edge_sixths']:.6g}, all = {summary['all']:.6g}")


def insert_roi(spec: PhantomSpec, g: Geometry, margin_voxels: int = 2, half_slices: int = 2):
    """(z, y, x) ROI around the moving insert's whole trajectory, centre slices only."""
    movers = [e for e in spec.ellipsoids if e.moves]
    if not movers:
        raise ValueError("phantom has no moving insert")
    e = movers[0]
    path = np.array([e.center_at(t) for t in np.linspace(0.0, 1.0, 101)])
    lo = path.min(axis=0) - np.asarray(e.semi_axes)
    hi = path.max(axis=0) + np.asarray(e.semi_axes)
    xs, ys, zs = g.axis_coords()
    dx, dy, dz = g.voxel_size

    def span(coords, a, b, d):
        i0 = int(np.searchsorted(coords, a - margin_voxels * d))
        i1 = int(np.searchsorted(coords, b + margin_voxels * d, side="right"))
        return slice(max(i0, 0), min(i1, len(coords)))

    zc = int(np.argmin(np.abs(zs - path[:, 2].mean())))
    zsl = slice(max(zc - half_slices, 0), min(zc + half_slices + 1, len(zs)))
    return (zsl, span(ys, lo[1], hi[1], dy), span(xs, lo[0], hi[0], dx))


def temporal_metrics(volumes: dict[str, Volume], truth: Volume, roi, voxel: float) -> dict:
    """Centroid error (voxels) against the truth, and FWHM (mm), per reconstruction."""
    c_true, w_true = insert_centroid_and_width(truth, roi)
    out = {"truth": {"centroid_mm": list(c_true), "fwhm_mm": list(w_true)}}
    for name, vol in volumes.items():
        c, w = insert_centroid_and_width(vol, roi)
        err = math.dist(c, c_true) / voxel
        out[name] = {"centroid_mm": list(c), "fwhm_mm": list(w), "centroid_error_voxels": err}
    return out


def paper_demo(cfg: RunConfig) -> dict:
    """simulate -> mask -> full/half/SAW MBIR -> per-slice RMSE and insert metrics."""
    t_start = time.perf_counter()
    cfg.validate()
    g = cfg.geometry
    out = _out(cfg)
    timings = {}

    tic = time.perf_counter()
    paths = simulate(cfg)
    write_manifest(cfg, out, "paper-demo")
    timings["simulate"] = time.perf_counter() - tic
    mask = mask_for(cfg)
    make_mask(cfg)

    volumes, reports = {}, {}
    for mode in ("full", "half", "saw"):
        tic = time.perf_counter()
        _, x, report = reconstruct_mode(cfg, mode, paths.get("sinogram"), mask if mode == "saw" else None)
        # compare what was written: float32 round trip
        volumes[mode] = Volume(x.values.astype(np.float32), x.voxel_size)
        reports[mode] = report
        timings[f"recon_{mode}"] = time.perf_counter() - tic
        log.info("%s: %d iterations, cost %.6g, %.1f s", mode, report.iterations,
                 report.costs[-1], timings[f"recon_{mode}"])

    truth = rasterize(cfg.phantom, reference_phase(g, half_scan_views(g, cfg.recon().half_scan_start).indices), g)
    truth = Volume(truth.values.astype(np.float32), truth.voxel_size)
    pairs = [("saw", "full"), ("half", "full"), ("saw", "half"), ("full", "half")]
    comparisons = {}
    for a, b in pairs:
        csv_path = out / f"rmse_{a}_vs_{b}.csv" if "profiles" in cfg.artifacts else None
        comparisons[f"{a}_vs_{b}"] = compare(volumes[a], volumes[b], truth, csv_path)

    summary = {
        "comparisons": comparisons,
        "reports": {m: {"iterations": r.iterations, "initial_cost": r.initial_cost,
                        "final_cost": r.costs[-1], "monotone_violations": r.monotone_violations(),
                        "restarts": r.restarts, "gradient_inner_product": r.gradient_inner_product}
                    for m, r in reports.items()},
        "mask_full_voxels_per_slice": [int(n) for n in (mask.values >= 1).sum(axis=(1, 2))],
    }
    try:
        roi = insert_roi(cfg.phantom, g)
        summary["insert"] = temporal_metrics(volumes, truth, roi, min(g.voxel_size))
        summary["insert"]["roi"] = [[s.start, s.stop] for s in roi]
    except ValueError as exc:
        summary["insert"] = {"skipped": str(exc)}
    timings["total"] = time.perf_counter() - t_start
    summary["timings_s"] = timings
    if "summary" in cfg.artifacts:
        (out / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


__all__ = [
    "MODES", "compare", "compare_files", "format_summary", "insert_roi", "make_mask",
    "mask_for", "paper_demo", "reconstruct_mode", "simulate", "temporal_metrics",
    "ReconError",
]
