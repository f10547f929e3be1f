"""Test-time optimization of a per-frame log-depth field against pair losses.

The optimizable state is one log-depth grid per frame, decoded to image
resolution by bilinear upsampling followed by exp, so decoded depth is
positive by construction. The paper-style schedule iterates a seeded shuffle
of accepted pairs in batches, accumulates analytic pair gradients through the
decode chain rule, and applies one Adam update per batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy import ndimage

from .errors import (
    AllUndefined,
    EmptyMask,
    NoAcceptedPairs,
    NonFiniteLoss,
    ShapeMismatch,
)
from .flowcheck import overlap_accept
from .geometry import Camera, camera_ray_grid
from .loss import LossConfig, pair_loss, pair_loss_grad
from .pairing import FramePairSet

DEFAULT_GRID_LONG_SIDE = 384


def _axis_interp_matrix(n_out: int, n_in: int) -> np.ndarray:
    """Dense 1-D bilinear upsampling matrix mapping n_in samples to n_out.

    Output position k maps to input coordinate k * (n_in - 1) / (n_out - 1)
    (endpoints aligned), so n_out == n_in yields the identity.
    """
    M = np.zeros((n_out, n_in))
    if n_in == 1:
        M[:, 0] = 1.0
        return M
    pos = np.arange(n_out) * (n_in - 1) / max(n_out - 1, 1)
    i0 = np.clip(np.floor(pos).astype(int), 0, n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    w = pos - i0
    M[np.arange(n_out), i0] += 1 - w
    M[np.arange(n_out), i1] += w
    return M


def _axis_area_matrix(n_out: int, n_in: int) -> np.ndarray:
    """Dense 1-D area-averaging matrix from n_in samples down to n_out cells.

    Cell k averages input interval [k*n_in/n_out, (k+1)*n_in/n_out) with
    fractional pixels weighted by overlap; n_out == n_in is the identity.
    """
    M = np.zeros((n_out, n_in))
    step = n_in / n_out
    for k in range(n_out):
        lo = k * step
        hi = (k + 1) * step
        first = int(np.floor(lo))
        last = min(int(np.ceil(hi)), n_in)
        for src in range(first, last):
            overlap = min(hi, src + 1) - max(lo, src)
            if overlap > 0:
                M[k, src] = overlap / step
    return M


def _grid_size(width: int, height: int, grid_long_side: int) -> tuple[int, int]:
    scale = grid_long_side / max(width, height)
    if scale >= 1.0:
        return width, height
    return max(2, round(width * scale)), max(2, round(height * scale))


class DepthField:
    """Per-frame log-depth grids decodable to positive full-resolution depth.

    Attributes:
        theta: (n_frames, grid_h, grid_w) log-depth parameters.
        width, height: Decoded raster size.
    """

    def __init__(self, theta: np.ndarray, width: int, height: int):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.ndim != 3:
            raise ValueError(f"theta must be (n_frames, gh, gw), got {theta.shape}")
        self.theta = theta
        self.width = width
        self.height = height
        gh, gw = theta.shape[1], theta.shape[2]
        self._up_rows = _axis_interp_matrix(height, gh)
        self._up_cols = _axis_interp_matrix(width, gw)
        self._identity = gh == height and gw == width

    @property
    def n_frames(self) -> int:
        return self.theta.shape[0]

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.theta.shape[1], self.theta.shape[2]

    def copy(self) -> "DepthField":
        return DepthField(self.theta.copy(), self.width, self.height)

    def decode(self, frame: int) -> np.ndarray:
        """Full-resolution positive depth raster for one frame."""
        t = self.theta[frame]
        if not self._identity:
            t = self._up_rows @ t @ self._up_cols.T
        return np.exp(t)

    def decode_all(self) -> list[np.ndarray]:
        return [self.decode(f) for f in range(self.n_frames)]

    def grad_to_theta(self, frame: int, depth_grad: np.ndarray,
                      decoded: np.ndarray) -> np.ndarray:
        """Chain a depth-raster gradient back to this frame's grid parameters.

        decode = exp(upsample(theta)), so d depth / d theta carries the decoded
        depth as the exp factor and the upsampling adjoint distributes the rest.
        """
        g = depth_grad * decoded
        if self._identity:
            return g
        return self._up_rows.T @ g @ self._up_cols


def init_from_depth(depths: list[np.ndarray],
                    grid_long_side: int = DEFAULT_GRID_LONG_SIDE) -> DepthField:
    """Build a DepthField from initial depth rasters.

    Undefined pixels (0 sentinel) are filled with the nearest defined value,
    then the raster is area-downsampled to the grid and log-transformed. At
    full grid resolution the round trip through decode is exact.

    Args:
        depths: One (H, W) depth raster per frame, equal sizes.
        grid_long_side: Target long side of the parameter grid; capped at the
            image resolution.

    Returns:
        The initialized DepthField.

    Raises:
        AllUndefined: If some frame has no defined pixel.
    """
    if len(depths) == 0:
        raise ValueError("need at least one depth raster")
    h, w = depths[0].shape
    gw, gh = _grid_size(w, h, grid_long_side)
    area_rows = _axis_area_matrix(gh, h)
    area_cols = _axis_area_matrix(gw, w)
    theta = np.empty((len(depths), gh, gw))
    for f, depth in enumerate(depths):
        depth = np.asarray(depth, dtype=np.float64)
        if depth.shape != (h, w):
            raise ValueError("all depth rasters must share one size")
        undefined = depth <= 0
        if undefined.all():
            raise AllUndefined(f"frame {f} has no defined depth")
        if undefined.any():
            idx = ndimage.distance_transform_edt(
                undefined, return_distances=False, return_indices=True
            )
            depth = depth[tuple(idx)]
        theta[f] = np.log(area_rows @ depth @ area_cols.T)
    return DepthField(theta, width=w, height=h)


@dataclass
class AdamState:
    """Adam accumulators over one parameter tensor."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 4e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, theta: np.ndarray, lr: float = 4e-4, beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(m=np.zeros_like(theta), v=np.zeros_like(theta), step=0,
                   lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state: AdamState, theta: np.ndarray, grad: np.ndarray,
              _scratch: list | None = None):
    """One in-place Adam update with bias correction.

    Args:
        state: Accumulators; mutated.
        theta: Parameters; mutated.
        grad: Gradient, same shape as theta.
        _scratch: Optional pair of reusable work arrays shaped like theta,
            for callers in a hot loop.

    Returns:
        Tuple (theta, state) for callers that prefer the functional shape.

    Raises:
        ShapeMismatch: If shapes disagree.
    """
    if grad.shape != theta.shape or state.m.shape != theta.shape:
        raise ShapeMismatch(
            f"parameter/gradient shapes disagree: {theta.shape} vs {grad.shape}"
        )
    if _scratch is None:
        _scratch = [np.empty_like(theta), np.empty_like(theta)]
    a, b = _scratch
    state.step += 1
    state.m *= state.beta1
    np.multiply(grad, 1 - state.beta1, out=a)
    state.m += a
    state.v *= state.beta2
    np.multiply(grad, grad, out=a)
    a *= 1 - state.beta2
    state.v += a
    # theta -= lr * (m / bc1) / (sqrt(v / bc2) + eps)
    np.multiply(state.v, 1.0 / (1 - state.beta2**state.step), out=a)
    np.sqrt(a, out=a)
    a += state.eps
    np.divide(state.m, a, out=b)
    b *= state.lr / (1 - state.beta1**state.step)
    theta -= b
    return theta, state


@dataclass(frozen=True)
class FinetuneConfig:
    """Schedule and weights for the optimization loop."""

    epochs: int = 20
    batch_size: int = 4
    lr: float = 4e-4
    loss: LossConfig = dataclass_field(default_factory=LossConfig)
    smooth_weight: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")


@dataclass(frozen=True)
class EpochStats:
    """Means over every pair evaluated in one pass.

    Epoch 0 is the pre-optimization baseline (evaluation only); epochs
    1..config.epochs are training passes, with each pair measured just before
    its batch's update.
    """

    epoch: int
    mean_total: float
    mean_spatial: float
    mean_disparity: float
    n_pairs: int


def _smoothness_grad(theta_f: np.ndarray) -> np.ndarray:
    """Gradient of the mean squared forward difference of one frame's grid."""
    gx = theta_f[:, 1:] - theta_f[:, :-1]
    gy = theta_f[1:, :] - theta_f[:-1, :]
    grad = np.zeros_like(theta_f)
    grad[:, 1:] += 2 * gx
    grad[:, :-1] -= 2 * gx
    grad[1:, :] += 2 * gy
    grad[:-1, :] -= 2 * gy
    return grad / theta_f.size


def accepted_pairs(pairs: FramePairSet, masks: dict) -> list[tuple[int, int]]:
    """Pairs surviving the overlap test, in canonical order."""
    return [p for p in pairs if overlap_accept(masks[p])]


def finetune(cams: list[Camera], flows: dict, masks: dict, pairs: FramePairSet,
             depth_field: DepthField, config: FinetuneConfig,
             pair_callback=None) -> tuple[DepthField, list[EpochStats]]:
    """Optimize the depth field against the geometric pair losses.

    Each epoch shuffles the accepted pairs with the seeded generator and walks
    them in batches; the batch gradient is the mean of the batch's pair
    gradients (a frame hit by several pairs accumulates their sum), chained
    through the decode and applied with one Adam step. The returned history
    carries a pre-optimization baseline entry (epoch 0) followed by one entry
    per training epoch. Identical inputs and seed reproduce the history and
    final field bitwise.

    Args:
        cams: One Camera per frame.
        flows: (i, j) -> (H, W, 2) flow rasters for every sampled pair.
        masks: (i, j) -> (H, W) boolean validity masks for every sampled pair.
        pairs: Sampled pair set.
        depth_field: Initial field; not mutated.
        config: Schedule.
        pair_callback: Optional fn(epoch, pair, PairLossBreakdown) invoked per
            evaluation, for logging.

    Returns:
        Tuple (optimized field, per-epoch history).

    Raises:
        NoAcceptedPairs: If the overlap test rejects every pair.
        NonFiniteLoss: If a pair produces a NaN or infinite loss.
    """
    for p in pairs:
        if p not in flows or p not in masks:
            raise KeyError(f"pair {p} is missing flow or mask")
    active = accepted_pairs(pairs, masks)
    if not active:
        raise NoAcceptedPairs("overlap test rejected every sampled pair")

    field = depth_field.copy()
    state = AdamState.for_params(field.theta, lr=config.lr)
    rng = np.random.default_rng(config.rng_seed)
    rays = camera_ray_grid(cams[0].intrinsics)
    full_grad = np.zeros_like(field.theta)
    scratch = [np.empty_like(field.theta), np.empty_like(field.theta)]
    history: list[EpochStats] = []

    baseline_sums = np.zeros(3)
    baseline_n = 0
    for (i, j) in active:
        try:
            br = pair_loss(field.decode(i), field.decode(j), cams[i], cams[j],
                           flows[(i, j)], masks[(i, j)], config.loss, rays=rays)
        except EmptyMask:
            continue
        if not np.isfinite(br.total):
            raise NonFiniteLoss((i, j))
        baseline_sums += (br.total, br.spatial, br.disparity)
        baseline_n += 1
        if pair_callback is not None:
            pair_callback(0, (i, j), br)
    if baseline_n == 0:
        raise NoAcceptedPairs("every pair lost all pixels before optimization")
    history.append(EpochStats(epoch=0,
                              mean_total=float(baseline_sums[0] / baseline_n),
                              mean_spatial=float(baseline_sums[1] / baseline_n),
                              mean_disparity=float(baseline_sums[2] / baseline_n),
                              n_pairs=baseline_n))

    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(len(active))
        sums = np.zeros(3)
        n_evaluated = 0
        for start in range(0, len(perm), config.batch_size):
            batch = [active[k] for k in perm[start:start + config.batch_size]]
            full_grad.fill(0.0)
            decoded = {}
            for f in sorted({f for p in batch for f in p}):
                decoded[f] = field.decode(f)
            for (i, j) in batch:
                try:
                    gi, gj, br = pair_loss_grad(
                        decoded[i], decoded[j], cams[i], cams[j],
                        flows[(i, j)], masks[(i, j)], config.loss, rays=rays,
                    )
                except EmptyMask:
                    continue
                if not np.isfinite(br.total):
                    raise NonFiniteLoss((i, j))
                full_grad[i] += field.grad_to_theta(i, gi, decoded[i])
                full_grad[j] += field.grad_to_theta(j, gj, decoded[j])
                sums += (br.total, br.spatial, br.disparity)
                n_evaluated += 1
                if pair_callback is not None:
                    pair_callback(epoch, (i, j), br)
            full_grad /= len(batch)
            if config.smooth_weight > 0:
                for f in decoded:
                    full_grad[f] += config.smooth_weight * _smoothness_grad(
                        field.theta[f]
                    )
            adam_step(state, field.theta, full_grad, _scratch=scratch)
        if n_evaluated == 0:
            raise NoAcceptedPairs("every pair lost all pixels during epoch")
        history.append(EpochStats(
            epoch=epoch,
            mean_total=float(sums[0] / n_evaluated),
            mean_spatial=float(sums[1] / n_evaluated),
            mean_disparity=float(sums[2] / n_evaluated),
            n_pairs=n_evaluated,
        ))
    return field, history
