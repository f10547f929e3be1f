"""Geometric consistency loss over frame pairs and its analytic depth gradient.

For a pair (i, j), every mask-valid pixel x of frame i contributes two
residuals: the image-space distance between the depth-reprojected point and
the flow-displaced point, and the focal-scaled inverse-depth mismatch between
the transferred depth and frame j's depth read at the flow target. The pair
loss is the mean of (spatial + weight * disparity) over surviving pixels.

Reported values use exact norms. Gradients differentiate a smoothed norm,
sqrt(r^2 + eps^2) - eps, so they vanish at zero residual instead of hitting
the kink of |.|; the bias on values at realistic residuals is O(eps^2 / r).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMask, OutOfBounds, SizeMismatch, UndefinedDepth
from .geometry import DEGENERACY_GUARD, Camera, camera_ray_grid, reproject

# Smoothing half-widths for gradient evaluation only.
SPATIAL_EPS_PX = 1e-6
DISPARITY_EPS = 1e-9


@dataclass(frozen=True)
class LossConfig:
    """Weights and subsampling for pair-loss evaluation.

    Attributes:
        disparity_weight: Balance on the disparity term (default 0.1).
        pixel_stride: Evaluate every stride-th pixel in both axes.
    """

    disparity_weight: float = 0.1
    pixel_stride: int = 1

    def __post_init__(self):
        if self.disparity_weight < 0:
            raise ValueError("disparity_weight must be >= 0")
        if self.pixel_stride < 1:
            raise ValueError("pixel_stride must be >= 1")


@dataclass(frozen=True)
class PairLossBreakdown:
    """Mean residuals of one frame pair.

    total == spatial + disparity_weight * disparity; all terms are means over
    the n_pixels pixels that survived validity filtering. n_dropped counts
    mask-valid pixels lost to undefined depth, degenerate projection, or
    out-of-bounds flow targets.
    """

    spatial: float
    disparity: float
    total: float
    n_pixels: int
    n_dropped: int = 0


def flow_displace(x, flow: np.ndarray) -> np.ndarray:
    """Displace an integer pixel coordinate by the flow stored there.

    Raises:
        OutOfBounds: If x lies outside the flow raster.
    """
    x = np.asarray(x, dtype=np.float64)
    h, w = flow.shape[:2]
    col = int(round(x[0]))
    row = int(round(x[1]))
    if not (0 <= col < w and 0 <= row < h):
        raise OutOfBounds(f"pixel ({col}, {row}) outside {w}x{h} flow raster")
    return x + flow[row, col]


def _sample_depth_bilinear(depth: np.ndarray, fx, fy):
    """Bilinear depth read that refuses to blend across undefined pixels.

    A sample is defined only when every neighbor it touches with nonzero
    weight is > 0, so the 0 sentinel cannot bleed into interpolated values.

    Returns:
        Tuple (value, defined, neighbors) where neighbors is
        (y0, x0, y1, x1, wx, wy) for gradient scattering.
    """
    h, w = depth.shape
    x0 = np.clip(np.floor(fx).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(fy).astype(np.int64), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = fx - x0
    wy = fy - y0
    d00 = depth[y0, x0]
    d01 = depth[y0, x1]
    d10 = depth[y1, x0]
    d11 = depth[y1, x1]
    value = (d00 * (1 - wx) + d01 * wx) * (1 - wy) + (d10 * (1 - wx) + d11 * wx) * wy
    defined = np.ones_like(value, dtype=bool)
    for dval, weight in (
        (d00, (1 - wx) * (1 - wy)),
        (d01, wx * (1 - wy)),
        (d10, (1 - wx) * wy),
        (d11, wx * wy),
    ):
        defined &= (dval > 0) | (weight == 0)
    return value, defined, (y0, x0, y1, x1, wx, wy)


def spatial_residual(x, depth_i: np.ndarray, cam_i: Camera, cam_j: Camera,
                     flow: np.ndarray) -> float:
    """Image-space distance between reprojected and flow-displaced points at x."""
    p, _ = reproject(x, depth_i, cam_i, cam_j)
    f = flow_displace(x, flow)
    return float(np.linalg.norm(p - f))


def disparity_residual(x, depth_i: np.ndarray, depth_j: np.ndarray,
                       cam_i: Camera, cam_j: Camera, flow: np.ndarray) -> float:
    """Focal-scaled inverse-depth mismatch at x between the transferred point
    and frame j's depth read bilinearly at the flow target."""
    _, z = reproject(x, depth_i, cam_i, cam_j)
    f = flow_displace(x, flow)
    h, w = depth_j.shape
    if not (0 <= f[0] <= w - 1 and 0 <= f[1] <= h - 1):
        raise OutOfBounds("flow target outside frame j")
    z_j, defined, _ = _sample_depth_bilinear(
        depth_j, np.asarray([f[0]]), np.asarray([f[1]])
    )
    if not defined[0] or z_j[0] <= 0:
        raise UndefinedDepth("frame j depth undefined at the flow target")
    u = cam_i.intrinsics.fx
    return float(u * abs(1.0 / z - 1.0 / z_j[0]))


def _evaluate_pair(depth_i, depth_j, cam_i, cam_j, flow, mask, config, rays,
                   want_grad):
    """Shared vectorized evaluation behind pair_loss and pair_loss_grad."""
    depth_i = np.asarray(depth_i, dtype=np.float64)
    depth_j = np.asarray(depth_j, dtype=np.float64)
    flow = np.asarray(flow, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    h, w = depth_i.shape
    if flow.shape[:2] != (h, w) or mask.shape != (h, w):
        raise SizeMismatch("flow/mask rasters must match the depth raster size")
    if rays is None:
        rays = camera_ray_grid(cam_i.intrinsics)

    stride = config.pixel_stride
    sl = np.s_[::stride, ::stride]
    ys, xs = np.mgrid[0:h, 0:w]
    xs = xs[sl].astype(np.float64)
    ys = ys[sl].astype(np.float64)
    d = depth_i[sl]
    eligible = mask[sl]

    A = cam_j.pose.R.T @ cam_i.pose.R
    b = cam_j.pose.R.T @ (cam_i.pose.t - cam_j.pose.t)
    Kj = cam_j.intrinsics.matrix
    m = rays[sl] @ A.T
    c_ij = d[..., None] * m + b
    z = c_ij[..., 2]
    q = c_ij @ Kj.T
    qm = m @ Kj.T

    fx = xs + flow[sl][..., 0]
    fy = ys + flow[sl][..., 1]
    in_bounds = (fx >= 0) & (fx <= w - 1) & (fy >= 0) & (fy <= h - 1)
    fx_safe = np.clip(fx, 0, w - 1)
    fy_safe = np.clip(fy, 0, h - 1)
    z_j, z_j_defined, neighbors = _sample_depth_bilinear(depth_j, fx_safe, fy_safe)

    computable = (d > 0) & (np.abs(z) >= DEGENERACY_GUARD) & in_bounds
    computable &= z_j_defined & (z_j > 0)
    valid = eligible & computable
    n = int(valid.sum())
    n_dropped = int((eligible & ~computable).sum())
    if n == 0:
        raise EmptyMask("no pixel survived validity filtering for this pair")

    safe_z = np.where(valid, z, 1.0)
    safe_zj = np.where(valid, z_j, 1.0)
    p = q[..., :2] / safe_z[..., None]
    e = np.where(valid[..., None], p - np.stack([fx, fy], axis=-1), 0.0)
    e_norm2 = np.sum(e * e, axis=-1)
    spatial_exact = np.sqrt(e_norm2)

    u = cam_i.intrinsics.fx
    g = np.where(valid, 1.0 / safe_z - 1.0 / safe_zj, 0.0)
    disparity_exact = u * np.abs(g)

    lam = config.disparity_weight
    spatial_mean = float(spatial_exact[valid].mean())
    disparity_mean = float(disparity_exact[valid].mean())
    breakdown = PairLossBreakdown(
        spatial=spatial_mean,
        disparity=disparity_mean,
        total=spatial_mean + lam * disparity_mean,
        n_pixels=n,
        n_dropped=n_dropped,
    )
    if not want_grad:
        return breakdown, None, None

    # d p / d depth, from q = d * qm + const and z = q_z.
    mz = m[..., 2]
    dp_dd = (qm[..., :2] * safe_z[..., None] - q[..., :2] * mz[..., None]) / (
        safe_z[..., None] ** 2
    )
    smooth = np.sqrt(e_norm2 + SPATIAL_EPS_PX**2)
    dspatial_dd = np.sum(e * dp_dd, axis=-1) / smooth

    g_smooth = np.sqrt(g * g + DISPARITY_EPS**2)
    sign_g = g / g_smooth
    ddisp_dd = u * sign_g * (-mz / safe_z**2)
    ddisp_dzj = u * sign_g / safe_zj**2

    grad_i = np.zeros((h, w))
    per_pixel = np.where(valid, (dspatial_dd + lam * ddisp_dd) / n, 0.0)
    grad_i[sl] = per_pixel

    grad_j = np.zeros((h, w))
    y0, x0, y1, x1, wx, wy = neighbors
    coeff = np.where(valid, lam * ddisp_dzj / n, 0.0)
    np.add.at(grad_j, (y0[valid], x0[valid]), (coeff * (1 - wx) * (1 - wy))[valid])
    np.add.at(grad_j, (y0[valid], x1[valid]), (coeff * wx * (1 - wy))[valid])
    np.add.at(grad_j, (y1[valid], x0[valid]), (coeff * (1 - wx) * wy)[valid])
    np.add.at(grad_j, (y1[valid], x1[valid]), (coeff * wx * wy)[valid])
    return breakdown, grad_i, grad_j


def pair_loss(depth_i, depth_j, cam_i: Camera, cam_j: Camera, flow, mask,
              config: LossConfig = LossConfig(), rays=None) -> PairLossBreakdown:
    """Mean spatial and disparity residuals of one frame pair.

    Args:
        depth_i: (H, W) depth raster of the source frame.
        depth_j: (H, W) depth raster of the target frame.
        cam_i: Source camera.
        cam_j: Target camera.
        flow: (H, W, 2) flow from frame i to frame j.
        mask: (H, W) boolean validity mask for the pair.
        config: Loss weights and stride.
        rays: Optional precomputed camera_ray_grid(cam_i.intrinsics).

    Returns:
        The pair's PairLossBreakdown.

    Raises:
        EmptyMask: If no pixel survives filtering.
        SizeMismatch: If raster sizes disagree.
    """
    breakdown, _, _ = _evaluate_pair(
        depth_i, depth_j, cam_i, cam_j, flow, mask, config, rays, want_grad=False
    )
    return breakdown


def pair_loss_grad(depth_i, depth_j, cam_i: Camera, cam_j: Camera, flow, mask,
                   config: LossConfig = LossConfig(), rays=None):
    """Pair loss plus its gradient with respect to both depth rasters.

    grad_i(x) holds the derivative of the pair mean with respect to frame i's
    depth at x; grad_j collects contributions at the four interpolation
    neighbors of each flow target, weighted by interpolation weight. Dropped
    pixels carry zero gradient.

    Returns:
        Tuple (grad_i, grad_j, breakdown), gradients shaped like the rasters.
    """
    breakdown, grad_i, grad_j = _evaluate_pair(
        depth_i, depth_j, cam_i, cam_j, flow, mask, config, rays, want_grad=True
    )
    return grad_i, grad_j, breakdown
