"""Scale calibration: align reconstruction translations to the initial depth scale.

The per-frame scale is the median ratio of the two depth sources over pixels
defined in both; the global factor is the mean of per-frame scales; applying
it multiplies every camera translation, leaving rotations untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, NonPositiveScale, NoOverlap
from .geometry import CameraPose


@dataclass(frozen=True)
class ScaleReport:
    """Per-frame and global scale factors plus frames that had no overlap."""

    per_frame: list[float]
    global_scale: float
    frames_skipped: list[int] = field(default_factory=list)


def per_frame_scale(depth_ref: np.ndarray, depth_mvs: np.ndarray) -> float:
    """Median of depth_ref / depth_mvs over pixels defined in both rasters.

    Pixels where either raster carries the 0 sentinel are excluded: a zero
    numerator is a data hole, not a scale sample. Even-count medians are the
    mean of the two middle values.

    Args:
        depth_ref: Reference-scale depth raster (H, W).
        depth_mvs: Reconstruction-scale depth raster, same shape.

    Returns:
        The per-frame scale factor.

    Raises:
        NoOverlap: If no pixel is defined in both rasters.
    """
    depth_ref = np.asarray(depth_ref, dtype=np.float64)
    depth_mvs = np.asarray(depth_mvs, dtype=np.float64)
    if depth_ref.shape != depth_mvs.shape:
        raise ValueError(f"raster shapes differ: {depth_ref.shape} vs {depth_mvs.shape}")
    both = (depth_ref > 0) & (depth_mvs > 0)
    if not both.any():
        raise NoOverlap("no pixel defined in both depth rasters")
    return float(np.median(depth_ref[both] / depth_mvs[both]))


def global_scale(per_frame: list[float]) -> float:
    """Arithmetic mean of per-frame scales.

    Raises:
        EmptyInput: If the list is empty.
    """
    if len(per_frame) == 0:
        raise EmptyInput("no per-frame scales to average")
    return float(np.mean(per_frame))


def apply_scale(poses: list[CameraPose], s: float) -> list[CameraPose]:
    """Multiply every translation by s, leaving rotations untouched.

    Raises:
        NonPositiveScale: If s <= 0.
    """
    if s <= 0:
        raise NonPositiveScale(f"scale must be positive, got {s}")
    return [CameraPose(R=p.R, t=s * p.t) for p in poses]


def calibrate(depths_ref: list[np.ndarray], depths_mvs: list[np.ndarray],
              poses: list[CameraPose]) -> tuple[ScaleReport, list[CameraPose]]:
    """Compute the global scale from per-frame medians and rescale all poses.

    Frames with no overlap contribute nothing to the mean and are listed in
    the report instead of aborting (reconstruction depth is often semi-dense).
    Per-frame scales are reduced in ascending frame order for reproducibility.

    Args:
        depths_ref: Reference-scale depth rasters, one per frame.
        depths_mvs: Reconstruction-scale depth rasters, one per frame.
        poses: Camera poses in the reconstruction's scale.

    Returns:
        Tuple (report, rescaled poses).

    Raises:
        EmptyInput: If every frame was skipped.
    """
    if len(depths_ref) != len(depths_mvs) or len(depths_ref) != len(poses):
        raise ValueError("depth lists and poses must have equal length")
    scales: list[float] = []
    skipped: list[int] = []
    for frame in range(len(poses)):
        try:
            scales.append(per_frame_scale(depths_ref[frame], depths_mvs[frame]))
        except NoOverlap:
            skipped.append(frame)
    s = global_scale(scales)
    report = ScaleReport(per_frame=scales, global_scale=s, frames_skipped=skipped)
    return report, apply_scale(poses, s)
