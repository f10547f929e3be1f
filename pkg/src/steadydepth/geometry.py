"""Pinhole camera model and the frame-to-frame reprojection chain.

Conventions used throughout the package:

* Poses are camera-to-world: a camera-frame point ``c`` maps to the world
  point ``X = R @ c + t``.
* Integer pixel coordinates address pixel centers; sample (0, 0) is the
  center of the top-left pixel.
* Depth is measured along the optical axis (the camera-frame z component),
  with the sentinel value 0 marking undefined pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProjection, NonPositiveDepth, UndefinedDepth

# |z| below this is treated as a point on the camera plane.
DEGENERACY_GUARD = 1e-12

# Allowed deviation from exact orthonormality when validating rotations.
ROTATION_TOL = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics; fx == fy corresponds to a simple pinhole camera.

    Attributes:
        fx, fy: Focal lengths in pixels.
        cx, cy: Principal point in pixels.
        width, height: Raster size in pixels.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got {self.fx}, {self.fy}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"raster size must be >= 1, got {self.width}x{self.height}")

    @property
    def matrix(self) -> np.ndarray:
        """3x3 calibration matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def inverse_matrix(self) -> np.ndarray:
        """Closed-form K^-1."""
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )


@dataclass(frozen=True)
class CameraPose:
    """Camera-to-world rigid pose: world point X = R @ c + t.

    Attributes:
        R: 3x3 rotation matrix.
        t: 3-vector translation in world units.
    """

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64)
        t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if R.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {R.shape}")
        if not np.allclose(R.T @ R, np.eye(3), atol=ROTATION_TOL):
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(R) - 1.0) > ROTATION_TOL:
            raise ValueError("rotation determinant is not 1 within 1e-9")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)


def identity_pose() -> CameraPose:
    return CameraPose(R=np.eye(3), t=np.zeros(3))


@dataclass(frozen=True)
class Camera:
    """Intrinsics and pose of one frame."""

    intrinsics: CameraIntrinsics
    pose: CameraPose


def perspective_divide(v) -> np.ndarray:
    """Project a camera-frame point to the image plane: [x/z, y/z].

    Args:
        v: 3-vector, or (..., 3) array of camera-frame points.

    Returns:
        Pixel coordinates, shape (..., 2).

    Raises:
        DegenerateProjection: If any |z| < 1e-12.
    """
    v = np.asarray(v, dtype=np.float64)
    z = v[..., 2]
    if np.any(np.abs(z) < DEGENERACY_GUARD):
        raise DegenerateProjection("point at or behind the camera plane")
    return v[..., :2] / z[..., None]


def lift(x, depth, K: CameraIntrinsics) -> np.ndarray:
    """Lift pixel coordinates to camera-frame 3D points at the given depth.

    The z component of the result equals ``depth`` exactly.

    Args:
        x: Pixel coordinates, shape (2,) or (..., 2).
        depth: Scalar or array broadcastable to x's leading shape; must be > 0.
        K: Intrinsics of the lifting camera.

    Returns:
        Camera-frame points, shape (..., 3).

    Raises:
        NonPositiveDepth: If any depth <= 0.
    """
    x = np.asarray(x, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if np.any(depth <= 0):
        raise NonPositiveDepth("lift requires strictly positive depth")
    rx = (x[..., 0] - K.cx) / K.fx
    ry = (x[..., 1] - K.cy) / K.fy
    return np.stack([depth * rx, depth * ry, depth * np.ones_like(rx)], axis=-1)


def transform_to_frame(c, pose_i: CameraPose, pose_j: CameraPose) -> np.ndarray:
    """Re-express camera-i frame points in camera j's frame.

    Computes R_j^T (R_i c + t_i - t_j).

    Args:
        c: Camera-i frame points, shape (3,) or (..., 3).
        pose_i: Pose of the source camera.
        pose_j: Pose of the destination camera.

    Returns:
        Points in camera j's frame, same shape as c.
    """
    c = np.asarray(c, dtype=np.float64)
    world = c @ pose_i.R.T + pose_i.t
    return (world - pose_j.t) @ pose_j.R


def reproject(x, depth_map: np.ndarray, cam_i: Camera, cam_j: Camera):
    """Reproject a pixel of frame i into frame j through its depth.

    Args:
        x: Pixel coordinate (2,) in frame i; must be (near-)integer so the
            depth raster can be read directly.
        depth_map: Frame i's depth raster (H, W); 0 marks undefined pixels.
        cam_i: Source camera.
        cam_j: Destination camera.

    Returns:
        Tuple (p, z): the reprojected pixel position in frame j and the
        camera-j frame depth of the transferred point.

    Raises:
        UndefinedDepth: If the depth at x is the 0 sentinel.
        DegenerateProjection: If the transferred point has |z| < 1e-12.
    """
    x = np.asarray(x, dtype=np.float64)
    col = int(round(x[0]))
    row = int(round(x[1]))
    d = depth_map[row, col]
    if d <= 0:
        raise UndefinedDepth(f"depth undefined at pixel ({col}, {row})")
    c = lift(x, d, cam_i.intrinsics)
    c_ij = transform_to_frame(c, cam_i.pose, cam_j.pose)
    p = perspective_divide(c_ij @ cam_j.intrinsics.matrix.T)
    return p, float(c_ij[2])


def camera_ray_grid(K: CameraIntrinsics) -> np.ndarray:
    """Unit-depth ray directions K^-1 [x, y, 1] for every pixel center.

    Returns:
        Array (H, W, 3) with z component exactly 1 everywhere.
    """
    xs = np.arange(K.width, dtype=np.float64)
    ys = np.arange(K.height, dtype=np.float64)
    rx = (xs[None, :] - K.cx) / K.fx
    ry = (ys[:, None] - K.cy) / K.fy
    rays = np.empty((K.height, K.width, 3))
    rays[..., 0] = rx
    rays[..., 1] = np.broadcast_to(ry, (K.height, K.width))
    rays[..., 2] = 1.0
    return rays


def reproject_grid(depth_map: np.ndarray, cam_i: Camera, cam_j: Camera, rays=None):
    """Vectorized reprojection of every defined pixel of frame i into frame j.

    Pixels with undefined depth or a degenerate transferred z are flagged
    invalid instead of raising, so dense consumers can drop them.

    Args:
        depth_map: (H, W) depth raster of frame i.
        cam_i: Source camera.
        cam_j: Destination camera.
        rays: Optional precomputed camera_ray_grid(cam_i.intrinsics).

    Returns:
        Tuple (p, z, valid): p is (H, W, 2) reprojected positions, z is
        (H, W) transferred depths, valid is (H, W) bool. p and z hold
        garbage where valid is False.
    """
    if rays is None:
        rays = camera_ray_grid(cam_i.intrinsics)
    d = np.asarray(depth_map, dtype=np.float64)
    defined = d > 0
    A = cam_j.pose.R.T @ cam_i.pose.R
    b = cam_j.pose.R.T @ (cam_i.pose.t - cam_j.pose.t)
    m = rays @ A.T
    c_ij = d[..., None] * m + b
    z = c_ij[..., 2]
    valid = defined & (np.abs(z) >= DEGENERACY_GUARD)
    q = c_ij @ cam_j.intrinsics.matrix.T
    safe_z = np.where(valid, q[..., 2], 1.0)
    p = q[..., :2] / safe_z[..., None]
    return p, z, valid
