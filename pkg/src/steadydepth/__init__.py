"""Geometrically consistent video depth refinement.

Optimizes per-frame depth against multi-view reprojection constraints:
camera geometry and optical-flow correspondences define spatial and
disparity losses whose analytic gradients drive an Adam loop over a
log-depth field, with scale calibration, hierarchical pair sampling,
flow-consistency filtering, evaluation metrics, and a synthetic oracle
for end-to-end verification.
"""

from .calibration import ScaleReport, apply_scale, calibrate, global_scale, per_frame_scale
from .flowcheck import bilinear_sample, fb_consistency, intersect_dynamic_mask, overlap_accept
from .geometry import (
    Camera,
    CameraIntrinsics,
    CameraPose,
    identity_pose,
    lift,
    perspective_divide,
    reproject,
    reproject_grid,
    transform_to_frame,
)
from .loss import LossConfig, PairLossBreakdown, pair_loss, pair_loss_grad
from .metrics import (
    DisparityAlignment,
    Track,
    Track3D,
    align_disparity_ransac,
    depth_metrics,
    drift,
    evaluate_tracks,
    instability,
    photometric_error,
    tracks_to_3d,
)
from .optimizer import (
    AdamState,
    DepthField,
    EpochStats,
    FinetuneConfig,
    adam_step,
    finetune,
    init_from_depth,
)
from .pairing import FramePairSet, sample_pairs
from .synth import (
    BUNDLED_SCENES,
    Plane,
    SceneSpec,
    Sphere,
    analytic_flow,
    pair_validity,
    perturb,
    render,
    synth_tracks,
)

__version__ = "0.1.0"
