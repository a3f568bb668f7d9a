"""Statistical weights W and half-scan view-transition (Parker) weights."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .geometry import Geometry, ViewSubset
from .projector import Sinogram

__all__ = ["Weights", "parker_weight", "statistical_weights", "view_transition_weights"]


@dataclass(frozen=True)
class Weights:
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(vals)) or vals.min(initial=0) < 0:
            raise ValueError("weights must be finite and nonnegative")
        object.__setattr__(self, "values", vals)


def statistical_weights(y: Sinogram, model: Literal["uniform", "photon"] = "photon") -> Weights:
    """Diagonal data weights: all ones, or ``exp(-y)`` (relative photon count)."""
    vals = np.asarray(y.values, dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise ValueError("sinogram must be finite")
    if model == "uniform":
        return Weights(np.ones_like(vals))
    if model == "photon":
        return Weights(np.exp(-vals))
    raise ValueError(f"unknown weighting model {model!r}")


def parker_weight(beta, gamma, gamma_max):
    """Short-scan redundancy weight over a span of ``pi + 2 gamma_max``.

    ``beta`` is the view angle measured from the first view of the span and
    ``gamma`` the fan angle of the ray, with the conjugate of ``(beta, gamma)``
    at ``(beta + pi + 2 gamma, -gamma)``.  Zero outside ``[0, pi + 2 gamma_max]``.
    """
    beta = np.asarray(beta, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    beta, gamma = np.broadcast_arrays(beta, gamma)
    out = np.zeros(beta.shape)
    lead = gamma_max - gamma
    trail = gamma_max + gamma
    up = (beta >= 0) & (beta < 2 * lead)
    flat = (beta >= 2 * lead) & (beta < math.pi - 2 * gamma)
    down = (beta >= math.pi - 2 * gamma) & (beta <= math.pi + 2 * gamma_max)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[up] = np.sin(0.25 * math.pi * beta[up] / lead[up]) ** 2
        out[flat] = 1.0
        out[down] = np.sin(0.25 * math.pi * (math.pi + 2 * gamma_max - beta[down]) / trail[down]) ** 2
    return out


def column_fan_angles(g: Geometry) -> np.ndarray:
    """Fan angle of each detector column in the Parker sign convention.

    Positive detector ``u`` tilts the ray clockwise, which puts the conjugate
    at ``beta + pi - 2 atan(u / D)``; Parker's formula expects ``+ 2 gamma``.
    """
    return -np.arctan(g.column_coords() / g.source_to_detector_distance)


def view_transition_weights(g: Geometry, half: ViewSubset,
                            mode: Literal["binary", "parker"] = "binary") -> np.ndarray:
    """(num_views, detector_cols) half-scan weighting in [0, 1]."""
    if half.kind != "half":
        raise ValueError("view_transition_weights needs a half-scan ViewSubset")
    out = np.zeros((g.num_views, g.detector_cols))
    idx = np.asarray(half.indices)
    if mode == "binary":
        out[idx] = 1.0
        return out
    if mode != "parker":
        raise ValueError(f"unknown transition mode {mode!r}")
    span = (len(idx) - 1) * g.view_spacing
    # whole views overshoot pi + fan; widen the effective half fan to match
    gamma_max = 0.5 * (span - math.pi)
    beta = np.arange(len(idx)) * g.view_spacing
    out[idx] = parker_weight(beta[:, None], column_fan_angles(g)[None, :], gamma_max)
    return np.clip(out, 0.0, 1.0)
