"""Spatially-adaptive sinogram-weight MBIR for axial cone-beam CT.

Full-scan, half-scan and SAW reconstructions share one ray-driven projector,
one penalized weighted least-squares cost and one line-search driver.  The SAW
variant back projects through a per-voxel mask: half-scan weights where every
half-scan ray hits the detector, full-scan weights elsewhere.
"""
import warnings

# numba probes for TBB at import time; the workqueue/omp layers are fine here.
warnings.filterwarnings("ignore", message=".*TBB threading layer.*")

from .geometry import (  # noqa: E402
    Geometry, Mask, ViewSubset, compute_mask, full_scan_views, half_scan_views, make_geometry,
)
from .projector import Sinogram, Volume, back_project, forward_project, masked_back_project  # noqa: E402
from .recon import ReconConfig, ReconReport, reconstruct  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "Geometry", "Mask", "ReconConfig", "ReconReport", "Sinogram", "ViewSubset", "Volume",
    "back_project", "compute_mask", "forward_project", "full_scan_views", "half_scan_views",
    "make_geometry", "masked_back_project", "reconstruct",
]
