"""Evaluation metrics: photometric stereo error, track stability, drift,
and standard depth error/accuracy measures.

Track-based metrics unproject 2D tracks through the depth and poses; a
perfectly consistent reconstruction collapses each track to one world point,
so consecutive-point distances measure flicker and the spread's largest
covariance eigenvalue measures slow drift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateInput,
    NoValidPixels,
    TrackDegenerate,
)
from .flowcheck import bilinear_sample
from .geometry import Camera, lift, reproject_grid
from .loss import _sample_depth_bilinear


@dataclass(frozen=True)
class Track:
    """2D feature track: (frame id, (x, y)) observations, frame ids increasing."""

    observations: list[tuple[int, tuple[float, float]]]

    def __post_init__(self):
        frames = [f for f, _ in self.observations]
        if len(frames) < 2:
            raise ValueError("a track needs at least 2 observations")
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError("track frame ids must be strictly increasing")


@dataclass(frozen=True)
class Track3D:
    """Unprojected track: (frame id, world point) per retained observation."""

    points: list[tuple[int, np.ndarray]]


@dataclass(frozen=True)
class DisparityAlignment:
    """Affine map scale * disparity + shift fitted against stereo disparity."""

    scale: float
    shift: float
    inlier_ratio: float


def align_disparity_ransac(pred_disp: np.ndarray, stereo_disp: np.ndarray,
                           iters: int = 1000, inlier_px: float = 1.0,
                           seed: int = 0) -> DisparityAlignment:
    """RANSAC linear regression of stereo disparity onto predicted disparity.

    Samples two pixels per iteration, fits scale/shift exactly, scores by
    consensus |scale * pred + shift - stereo| <= inlier_px, then refits by
    least squares on the best consensus set. Pixels where either raster is
    non-finite are excluded.

    Args:
        pred_disp: Predicted disparity raster.
        stereo_disp: Measured stereo disparity raster, same shape.
        iters: RANSAC iterations.
        inlier_px: Consensus threshold in stereo-disparity units.
        seed: RNG seed; fixed seed gives a deterministic result.

    Returns:
        The fitted DisparityAlignment.

    Raises:
        DegenerateInput: Fewer than 2 usable pixels, or zero-variance pred.
    """
    pred = np.asarray(pred_disp, dtype=np.float64).ravel()
    stereo = np.asarray(stereo_disp, dtype=np.float64).ravel()
    ok = np.isfinite(pred) & np.isfinite(stereo)
    pred, stereo = pred[ok], stereo[ok]
    if pred.size < 2:
        raise DegenerateInput("need at least 2 valid common pixels")
    if np.ptp(pred) == 0:
        raise DegenerateInput("predicted disparity has zero variance")

    rng = np.random.default_rng(seed)
    best_count = -1
    best_inliers = None
    for _ in range(iters):
        a, b = rng.choice(pred.size, size=2, replace=False)
        if pred[a] == pred[b]:
            continue
        scale = (stereo[b] - stereo[a]) / (pred[b] - pred[a])
        shift = stereo[a] - scale * pred[a]
        inliers = np.abs(scale * pred + shift - stereo) <= inlier_px
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers
    if best_inliers is None or best_count < 2:
        raise DegenerateInput("no iteration produced a usable consensus")
    A = np.stack([pred[best_inliers], np.ones(best_count)], axis=1)
    coef, *_ = np.linalg.lstsq(A, stereo[best_inliers], rcond=None)
    return DisparityAlignment(
        scale=float(coef[0]),
        shift=float(coef[1]),
        inlier_ratio=best_count / pred.size,
    )


def photometric_error(left_rgb: np.ndarray, right_rgb: np.ndarray,
                      depth_left: np.ndarray, cam_left: Camera,
                      cam_right: Camera,
                      alignment: DisparityAlignment) -> float:
    """Mean squared RGB difference after reprojecting left pixels to the right view.

    Predicted inverse depth is mapped through the alignment into stereo
    disparity, converted to metric depth with the stereo focal length and
    baseline, and reprojected; right colors are sampled bilinearly for pixels
    landing in bounds.

    Args:
        left_rgb: (H, W, 3) left colors in [0, 1].
        right_rgb: (H, W, 3) right colors in [0, 1].
        depth_left: (H, W) predicted left depth; 0 marks undefined pixels.
        cam_left: Left camera.
        cam_right: Right camera of the rectified-style stereo pair.
        alignment: Disparity alignment from align_disparity_ransac.

    Returns:
        Mean squared error over contributing pixels and channels.

    Raises:
        NoValidPixels: If no pixel lands in bounds with positive aligned depth.
    """
    depth_left = np.asarray(depth_left, dtype=np.float64)
    baseline = float(np.linalg.norm(cam_left.pose.t - cam_right.pose.t))
    fx = cam_left.intrinsics.fx
    defined = depth_left > 0
    disp = np.where(defined, alignment.scale / np.where(defined, depth_left, 1.0)
                    + alignment.shift, -1.0)
    usable = defined & (disp > 0)
    aligned_depth = np.where(usable, fx * baseline / np.where(usable, disp, 1.0), 0.0)

    p, _, valid = reproject_grid(aligned_depth, cam_left, cam_right)
    h, w = depth_left.shape
    px, py = p[..., 0], p[..., 1]
    landed = valid & usable & (px >= 0) & (px <= w - 1) & (py >= 0) & (py <= h - 1)
    if not landed.any():
        raise NoValidPixels("no reprojected pixel landed in the right view")
    sampled = bilinear_sample(right_rgb, px[landed], py[landed])
    diff = np.asarray(left_rgb, dtype=np.float64)[landed] - sampled
    return float(np.mean(diff**2))


def tracks_to_3d(track: Track, depths: list[np.ndarray],
                 cams: list[Camera]) -> Track3D:
    """Unproject a 2D track to world space through per-frame depth and poses.

    Depth is read bilinearly at the sub-pixel track position; observations on
    undefined depth are dropped without failing the track.

    Raises:
        TrackDegenerate: If fewer than 2 observations survive.
    """
    points = []
    for frame, (x, y) in track.observations:
        depth = depths[frame]
        h, w = depth.shape
        if not (0 <= x <= w - 1 and 0 <= y <= h - 1):
            continue
        value, defined, _ = _sample_depth_bilinear(
            depth, np.asarray([x]), np.asarray([y])
        )
        if not defined[0] or value[0] <= 0:
            continue
        cam = cams[frame]
        c = lift(np.array([x, y]), value[0], cam.intrinsics)
        world = cam.pose.R @ c + cam.pose.t
        points.append((frame, world))
    if len(points) < 2:
        raise TrackDegenerate("fewer than 2 usable observations")
    return Track3D(points=points)


def instability(track3d: Track3D) -> float:
    """Mean Euclidean distance between consecutive retained 3D points.

    Raises:
        TrackDegenerate: If the track holds fewer than 2 points.
    """
    pts = [p for _, p in track3d.points]
    if len(pts) < 2:
        raise TrackDegenerate("instability needs at least 2 points")
    diffs = np.diff(np.stack(pts), axis=0)
    return float(np.linalg.norm(diffs, axis=1).mean())


def drift(track3d: Track3D) -> float:
    """Largest eigenvalue of the track's 3x3 population (1/n) covariance.

    Raises:
        TrackDegenerate: If the track holds fewer than 2 points.
    """
    pts = np.stack([p for _, p in track3d.points])
    if pts.shape[0] < 2:
        raise TrackDegenerate("drift needs at least 2 points")
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / pts.shape[0]
    return float(np.linalg.eigvalsh(cov)[-1])


@dataclass(frozen=True)
class TrackMetrics:
    """Video-level stability and drift, raw and depth-normalized percentages."""

    instability_raw: float
    drift_raw: float
    instability_pct: float
    drift_pct: float
    scene_scale: float
    n_tracks: int
    n_degenerate: int


def evaluate_tracks(tracks: list[Track], depths: list[np.ndarray],
                    cams: list[Camera]) -> TrackMetrics:
    """Aggregate instability and drift over a track set.

    The percentage forms divide by the video's median defined depth, the
    scene-scale proxy available without ground truth. Tracks are aggregated in
    input order; degenerate tracks are counted and skipped.
    """
    inst, drf = [], []
    n_degenerate = 0
    for track in tracks:
        try:
            t3d = tracks_to_3d(track, depths, cams)
            inst.append(instability(t3d))
            drf.append(drift(t3d))
        except TrackDegenerate:
            n_degenerate += 1
    if not inst:
        raise TrackDegenerate("every track was degenerate")
    defined = np.concatenate([d[d > 0].ravel() for d in depths])
    scale = float(np.median(defined)) if defined.size else float("nan")
    inst_raw = float(np.mean(inst))
    drift_raw = float(np.mean(drf))
    return TrackMetrics(
        instability_raw=inst_raw,
        drift_raw=drift_raw,
        instability_pct=100.0 * inst_raw / scale,
        drift_pct=100.0 * drift_raw / scale,
        scene_scale=scale,
        n_tracks=len(inst),
        n_degenerate=n_degenerate,
    )


def depth_metrics(pred: np.ndarray, gt: np.ndarray, alignment: str = "median",
                  space: str = "depth") -> dict:
    """Standard depth error and accuracy metrics over commonly valid pixels.

    Args:
        pred: Predicted depth raster; 0 marks undefined.
        gt: Ground-truth depth raster, same shape; 0 marks undefined.
        alignment: "median" rescales pred by median(gt)/median(pred); "none"
            compares as-is.
        space: "depth" compares depths, "disparity" compares inverse depths
            (after the alignment).

    Returns:
        Dict with abs_rel, sq_rel, rmse, rmse_log, delta1, delta2, delta3.

    Raises:
        NoValidPixels: If no pixel is defined in both rasters.
        ValueError: On an unknown alignment or space name.
    """
    if alignment not in ("median", "none"):
        raise ValueError(f"unknown alignment {alignment!r}")
    if space not in ("depth", "disparity"):
        raise ValueError(f"unknown space {space!r}")
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    valid = (pred > 0) & (gt > 0) & np.isfinite(pred) & np.isfinite(gt)
    if not valid.any():
        raise NoValidPixels("no commonly defined pixel")
    p = pred[valid]
    g = gt[valid]
    if alignment == "median":
        p = p * (np.median(g) / np.median(p))
    if space == "disparity":
        p = 1.0 / p
        g = 1.0 / g
    ratio = np.maximum(p / g, g / p)
    return {
        "abs_rel": float(np.mean(np.abs(p - g) / g)),
        "sq_rel": float(np.mean((p - g) ** 2 / g)),
        "rmse": float(np.sqrt(np.mean((p - g) ** 2))),
        "rmse_log": float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        "delta1": float(np.mean(ratio < 1.25)),
        "delta2": float(np.mean(ratio < 1.25**2)),
        "delta3": float(np.mean(ratio < 1.25**3)),
    }
