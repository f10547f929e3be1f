"""Flow validity: forward-backward consistency masks and overlap-based pair rejection.

A pixel survives the consistency check when the composed forward+backward
displacement is at most the threshold (1 px by default) and its forward
target lands in bounds. Pairs whose surviving area falls below the minimum
ratio (20% by default, boundary inclusive) are rejected outright.
"""

from __future__ import annotations

import numpy as np

from .errors import OutOfBounds, SizeMismatch

FB_THRESHOLD_PX = 1.0
MIN_OVERLAP_RATIO = 0.2


def bilinear_sample(field: np.ndarray, x, y) -> np.ndarray:
    """Bilinearly interpolate a raster at continuous pixel coordinates.

    Integer coordinates return the raster value exactly.

    Args:
        field: (H, W) or (H, W, C) raster.
        x: Horizontal coordinates, scalar or array, in [0, W-1].
        y: Vertical coordinates, matching x's shape, in [0, H-1].

    Returns:
        Interpolated values with shape broadcast(x, y) (+ trailing C).

    Raises:
        OutOfBounds: If any coordinate leaves the sampling domain.
    """
    field = np.asarray(field)
    h, w = field.shape[:2]
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.any(x < 0) or np.any(x > w - 1) or np.any(y < 0) or np.any(y > h - 1):
        raise OutOfBounds("sample coordinates outside raster domain")
    x0 = np.clip(np.floor(x).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(y).astype(np.int64), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    if field.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = field[y0, x0] * (1 - fx) + field[y0, x1] * fx
    bot = field[y1, x0] * (1 - fx) + field[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def fb_consistency(flow_fwd: np.ndarray, flow_bwd: np.ndarray,
                   threshold_px: float = FB_THRESHOLD_PX) -> np.ndarray:
    """Forward-backward consistency mask over a flow pair.

    mask(x) is True iff x + F_fwd(x) lands in bounds and
    ||F_fwd(x) + F_bwd(x + F_fwd(x))||_2 <= threshold_px, with the backward
    flow read bilinearly. Out-of-bounds targets are invalid, not clamped:
    a clamped sample is not a correspondence.

    Args:
        flow_fwd: (H, W, 2) forward flow in pixels.
        flow_bwd: (H, W, 2) backward flow, same raster size.
        threshold_px: Maximum tolerated round-trip displacement.

    Returns:
        (H, W) boolean validity mask.

    Raises:
        SizeMismatch: If the two flows differ in raster size.
    """
    flow_fwd = np.asarray(flow_fwd, dtype=np.float64)
    flow_bwd = np.asarray(flow_bwd, dtype=np.float64)
    if flow_fwd.shape != flow_bwd.shape:
        raise SizeMismatch(f"flow shapes differ: {flow_fwd.shape} vs {flow_bwd.shape}")
    h, w = flow_fwd.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w]
    tx = xs + flow_fwd[..., 0]
    ty = ys + flow_fwd[..., 1]
    in_bounds = (tx >= 0) & (tx <= w - 1) & (ty >= 0) & (ty <= h - 1)
    bwd = np.zeros_like(flow_fwd)
    if in_bounds.any():
        bwd[in_bounds] = bilinear_sample(flow_bwd, tx[in_bounds], ty[in_bounds])
    err = np.linalg.norm(flow_fwd + bwd, axis=-1)
    return in_bounds & (err <= threshold_px)


def overlap_accept(mask: np.ndarray, min_ratio: float = MIN_OVERLAP_RATIO) -> bool:
    """Accept a pair iff its valid-pixel fraction reaches min_ratio (inclusive)."""
    mask = np.asarray(mask, dtype=bool)
    return bool(mask.mean() >= min_ratio)


def intersect_dynamic_mask(mask: np.ndarray, dynamic: np.ndarray) -> np.ndarray:
    """Remove dynamic-object pixels from a validity mask.

    Args:
        mask: (H, W) boolean validity mask.
        dynamic: (H, W) boolean raster, True where a dynamic object sits.

    Returns:
        mask with dynamic pixels cleared.

    Raises:
        SizeMismatch: If shapes differ.
    """
    mask = np.asarray(mask, dtype=bool)
    dynamic = np.asarray(dynamic, dtype=bool)
    if mask.shape != dynamic.shape:
        raise SizeMismatch(f"mask shapes differ: {mask.shape} vs {dynamic.shape}")
    return mask & ~dynamic
