"""Synthetic-scene oracle: analytic ground truth for every pipeline input.

Scenes are textured primitives (infinite planes, spheres) observed by a
pinhole camera along a known trajectory. Rendering is per-pixel ray
intersection, so depth, correspondence flow, occlusion, tracks, and stereo
data all come from the same closed-form geometry and can verify the pipeline
at tight tolerances.

Pair validity masks are built from geometric predicates only (bounds,
occlusion, interpolation-cell cleanliness, grazing incidence, dynamic
footprint); they never consult the losses they are used to test.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import EmptyScene
from .geometry import Camera, CameraIntrinsics, CameraPose, camera_ray_grid
from .metrics import Track
from .optimizer import DepthField

# Rays closer to tangency than this cosine are treated as disocclusion-prone
# silhouette band and excluded from pair masks.
GRAZING_MIN_COS = 0.65

# Relative depth-test tolerance when deciding whether a correspondence is the
# surface actually rendered in the target frame.
OCCLUSION_REL_TOL = 0.02


# ---------------------------------------------------------------------------
# Scene description


@dataclass(frozen=True)
class Plane:
    """Infinite textured plane through `point` with unit `normal`."""

    point: tuple[float, float, float]
    normal: tuple[float, float, float]
    texture_seed: int = 0
    texture_scale: float = 1.0


@dataclass(frozen=True)
class Sphere:
    """Textured sphere."""

    center: tuple[float, float, float]
    radius: float
    texture_seed: int = 0
    texture_scale: float = 1.0


@dataclass(frozen=True)
class SceneSpec:
    """Scene geometry, camera trajectory, and optional motion/stereo extras.

    Attributes:
        intrinsics: Shared camera intrinsics.
        poses: One camera-to-world pose per frame (>= 2 frames).
        primitives: Plane/Sphere list; index order defines primitive ids.
        moving_index: Index of the one rigidly moving primitive, or None.
        motion: (n_frames, 3) per-frame world offsets of the moving primitive.
        stereo_baseline: Offset of a second camera along the camera x axis.
    """

    intrinsics: CameraIntrinsics
    poses: list[CameraPose]
    primitives: list = dataclass_field(default_factory=list)
    moving_index: int | None = None
    motion: np.ndarray | None = None
    stereo_baseline: float | None = None

    def __post_init__(self):
        if len(self.poses) < 2:
            raise ValueError("a scene needs at least 2 frames")
        if self.moving_index is not None:
            if self.motion is None or len(self.motion) != len(self.poses):
                raise ValueError("motion must provide one offset per frame")
            object.__setattr__(
                self, "motion", np.asarray(self.motion, dtype=np.float64)
            )

    @property
    def n_frames(self) -> int:
        return len(self.poses)

    def camera(self, frame: int) -> Camera:
        return Camera(intrinsics=self.intrinsics, pose=self.poses[frame])

    def stereo_camera(self, frame: int) -> Camera:
        """Right camera: the frame's pose shifted along its own x axis."""
        if self.stereo_baseline is None:
            raise ValueError("scene has no stereo baseline")
        pose = self.poses[frame]
        t = pose.t + pose.R @ np.array([self.stereo_baseline, 0.0, 0.0])
        return Camera(intrinsics=self.intrinsics, pose=CameraPose(R=pose.R, t=t))

    def primitive_offset(self, prim_index: int, frame: int) -> np.ndarray:
        if self.moving_index is not None and prim_index == self.moving_index:
            return self.motion[frame]
        return np.zeros(3)


# ---------------------------------------------------------------------------
# Procedural texture (3D value noise)


def _lattice_hash(ix, iy, iz, seed: float):
    s = np.sin(ix * 12.9898 + iy * 78.233 + iz * 37.719 + seed * 0.5453) * 43758.5453
    return s - np.floor(s)


def _value_noise(points: np.ndarray, seed: float) -> np.ndarray:
    """Smooth [0, 1) noise from trilinear-blended hashed lattice values."""
    p = np.asarray(points, dtype=np.float64)
    i = np.floor(p)
    f = p - i
    f = f * f * (3 - 2 * f)  # smoothstep blend
    out = np.zeros(p.shape[:-1])
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                corner = _lattice_hash(
                    i[..., 0] + dx, i[..., 1] + dy, i[..., 2] + dz, seed
                )
                wx = f[..., 0] if dx else 1 - f[..., 0]
                wy = f[..., 1] if dy else 1 - f[..., 1]
                wz = f[..., 2] if dz else 1 - f[..., 2]
                out += corner * wx * wy * wz
    return out


def texture_color(points: np.ndarray, seed: int, scale: float) -> np.ndarray:
    """Two-octave value-noise RGB in [0, 1] at world points."""
    rgb = np.zeros(points.shape[:-1] + (3,))
    for ch in range(3):
        base = _value_noise(points * scale, seed * 17.0 + ch * 5.0)
        detail = _value_noise(points * (scale * 3.1), seed * 17.0 + ch * 5.0 + 2.7)
        rgb[..., ch] = 0.15 + 0.7 * (0.7 * base + 0.3 * detail)
    return rgb


# ---------------------------------------------------------------------------
# Rendering


@dataclass
class SceneRender:
    """Per-frame rasters produced by render()."""

    depth: list[np.ndarray]
    rgb: list[np.ndarray]
    prim_id: list[np.ndarray]
    cos_incidence: list[np.ndarray]
    stereo_rgb: list[np.ndarray] | None = None
    stereo_depth: list[np.ndarray] | None = None


def _intersect(prim, offset: np.ndarray, origin: np.ndarray,
               directions: np.ndarray) -> np.ndarray:
    """Ray parameter of the nearest hit, or +inf where the ray misses.

    Directions are camera rays expressed in world coordinates with unit
    camera-frame z, so the parameter equals optical-axis depth.
    """
    miss = np.full(directions.shape[:-1], np.inf)
    if isinstance(prim, Plane):
        n = np.asarray(prim.normal, dtype=np.float64)
        n = n / np.linalg.norm(n)
        p0 = np.asarray(prim.point, dtype=np.float64) + offset
        denom = directions @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            s = ((p0 - origin) @ n) / denom
        return np.where((np.abs(denom) > 1e-12) & (s > 1e-9), s, miss)
    if isinstance(prim, Sphere):
        center = np.asarray(prim.center, dtype=np.float64) + offset
        oc = origin - center
        a = np.sum(directions * directions, axis=-1)
        b = 2 * (directions @ oc)
        c = oc @ oc - prim.radius**2
        disc = b * b - 4 * a * c
        hit = disc >= 0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        near = (-b - sq) / (2 * a)
        far = (-b + sq) / (2 * a)
        s = np.where(near > 1e-9, near, far)
        return np.where(hit & (s > 1e-9), s, miss)
    raise TypeError(f"unknown primitive type {type(prim)!r}")


def _surface_normal(prim, offset, world_points):
    if isinstance(prim, Plane):
        n = np.asarray(prim.normal, dtype=np.float64)
        n = n / np.linalg.norm(n)
        return np.broadcast_to(n, world_points.shape)
    center = np.asarray(prim.center, dtype=np.float64) + offset
    return (world_points - center) / prim.radius


def _render_view(spec: SceneSpec, cam: Camera, frame: int):
    """Rasterize one view: depth, rgb, primitive id, |cos| of incidence."""
    K = cam.intrinsics
    rays_cam = camera_ray_grid(K)
    directions = rays_cam @ cam.pose.R.T
    origin = cam.pose.t
    h, w = K.height, K.width

    depth = np.full((h, w), np.inf)
    prim_id = np.full((h, w), -1, dtype=np.int32)
    for idx, prim in enumerate(spec.primitives):
        s = _intersect(prim, spec.primitive_offset(idx, frame), origin, directions)
        closer = s < depth
        depth[closer] = s[closer]
        prim_id[closer] = idx

    hit = np.isfinite(depth)
    depth = np.where(hit, depth, 0.0)
    rgb = np.zeros((h, w, 3))
    cosmap = np.zeros((h, w))
    world = origin + depth[..., None] * directions
    dir_unit = directions / np.linalg.norm(directions, axis=-1, keepdims=True)
    for idx, prim in enumerate(spec.primitives):
        sel = prim_id == idx
        if not sel.any():
            continue
        offset = spec.primitive_offset(idx, frame)
        local = world[sel] - offset
        rgb[sel] = texture_color(local, prim.texture_seed, prim.texture_scale)
        normals = _surface_normal(prim, offset, world[sel])
        cosmap[sel] = np.abs(np.sum(normals * dir_unit[sel], axis=-1))
    return depth, rgb, prim_id, cosmap


def render(spec: SceneSpec) -> SceneRender:
    """Render every frame (and the stereo views, if requested).

    Pixels hitting no primitive carry the 0 depth sentinel and id -1.

    Raises:
        EmptyScene: If the spec has no primitives.
    """
    if not spec.primitives:
        raise EmptyScene("scene specification contains no primitives")
    out = SceneRender(depth=[], rgb=[], prim_id=[], cos_incidence=[])
    if spec.stereo_baseline is not None:
        out.stereo_rgb = []
        out.stereo_depth = []
    for f in range(spec.n_frames):
        depth, rgb, pid, cosmap = _render_view(spec, spec.camera(f), f)
        out.depth.append(depth)
        out.rgb.append(rgb)
        out.prim_id.append(pid)
        out.cos_incidence.append(cosmap)
        if spec.stereo_baseline is not None:
            sdepth, srgb, _, _ = _render_view(spec, spec.stereo_camera(f), f)
            out.stereo_rgb.append(srgb)
            out.stereo_depth.append(sdepth)
    return out


# ---------------------------------------------------------------------------
# Analytic correspondence, validity, tracks


def _correspondence(spec: SceneSpec, rendered: SceneRender, i: int, j: int):
    """Project frame i's surface points into frame j.

    Returns:
        Tuple (target (H, W, 2), z_corr (H, W), defined (H, W)); moving
        primitives carry their world offset between the two frames.
    """
    cam_i = spec.camera(i)
    cam_j = spec.camera(j)
    K = spec.intrinsics
    depth_i = rendered.depth[i]
    defined = depth_i > 0
    rays = camera_ray_grid(K)
    world = cam_i.pose.t + depth_i[..., None] * (rays @ cam_i.pose.R.T)
    if spec.moving_index is not None:
        moving = rendered.prim_id[i] == spec.moving_index
        delta = spec.motion[j] - spec.motion[i]
        world = np.where(moving[..., None], world + delta, world)
    c_j = (world - cam_j.pose.t) @ cam_j.pose.R
    z = c_j[..., 2]
    safe_z = np.where(np.abs(z) > 1e-12, z, 1.0)
    q = c_j @ K.matrix.T
    target = q[..., :2] / safe_z[..., None]
    return target, z, defined & (z > 1e-12)


def analytic_flow(spec: SceneSpec, i: int, j: int,
                  rendered: SceneRender | None = None):
    """Ground-truth flow from frame i to frame j plus a visibility mask.

    Flow maps each defined pixel to its true correspondence (including
    moving-primitive motion). The mask is True where that correspondence is
    inside frame j and not hidden by a nearer surface, judged by primitive id
    and a relative depth test at the nearest rendered pixel.

    Returns:
        Tuple (flow (H, W, 2), visible (H, W) bool). Flow is zero where the
        source pixel hits nothing.
    """
    if rendered is None:
        rendered = render(spec)
    target, z_corr, defined = _correspondence(spec, rendered, i, j)
    h, w = rendered.depth[i].shape
    ys, xs = np.mgrid[0:h, 0:w]
    grid = np.stack([xs, ys], axis=-1).astype(np.float64)
    flow = np.where(defined[..., None], target - grid, 0.0)

    tx, ty = target[..., 0], target[..., 1]
    in_bounds = defined & (tx >= 0) & (tx <= w - 1) & (ty >= 0) & (ty <= h - 1)
    rx = np.clip(np.round(tx).astype(np.int64), 0, w - 1)
    ry = np.clip(np.round(ty).astype(np.int64), 0, h - 1)
    id_at_target = rendered.prim_id[j][ry, rx]
    depth_at_target = rendered.depth[j][ry, rx]
    same_surface = id_at_target == rendered.prim_id[i]
    depth_close = np.abs(depth_at_target - z_corr) <= OCCLUSION_REL_TOL * np.abs(z_corr)
    visible = in_bounds & same_surface & depth_close
    return flow, visible


def dynamic_mask(spec: SceneSpec, rendered: SceneRender, frame: int) -> np.ndarray:
    """Footprint of the moving primitive in one frame (all False if static)."""
    if spec.moving_index is None:
        return np.zeros_like(rendered.prim_id[frame], dtype=bool)
    return rendered.prim_id[frame] == spec.moving_index


def pair_validity(spec: SceneSpec, i: int, j: int,
                  rendered: SceneRender | None = None,
                  grazing_min_cos: float = GRAZING_MIN_COS) -> np.ndarray:
    """Geometric validity mask for evaluating pair losses on true data.

    A pixel is valid when its correspondence is visible in frame j, both
    endpoints avoid grazing incidence (silhouette/disocclusion bands), the
    target's whole interpolation cell lies on the same static primitive with
    defined depth, and the source pixel itself is static.
    """
    if rendered is None:
        rendered = render(spec)
    flow, visible = analytic_flow(spec, i, j, rendered)
    h, w = visible.shape
    ys, xs = np.mgrid[0:h, 0:w]
    tx = xs + flow[..., 0]
    ty = ys + flow[..., 1]

    valid = visible & ~dynamic_mask(spec, rendered, i)
    valid &= rendered.cos_incidence[i] >= grazing_min_cos

    x0 = np.clip(np.floor(tx).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(ty).astype(np.int64), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    pid_j = rendered.prim_id[j]
    depth_j = rendered.depth[j]
    cos_j = rendered.cos_incidence[j]
    src_id = rendered.prim_id[i]
    for yy, xx in ((y0, x0), (y0, x1), (y1, x0), (y1, x1)):
        valid &= pid_j[yy, xx] == src_id
        valid &= depth_j[yy, xx] > 0
        valid &= cos_j[yy, xx] >= grazing_min_cos
    return valid


def stereo_disparity(spec: SceneSpec, rendered: SceneRender,
                     frame: int) -> np.ndarray:
    """True pixel disparity of the left view: fx * baseline / depth.

    Undefined pixels carry NaN so alignment consumers skip them.
    """
    if spec.stereo_baseline is None:
        raise ValueError("scene has no stereo baseline")
    depth = rendered.depth[frame]
    fx = spec.intrinsics.fx
    return np.where(depth > 0, fx * spec.stereo_baseline / np.where(depth > 0, depth, 1.0),
                    np.nan)


def _raster_locally_flat(depth: np.ndarray, row: int, col: int,
                         rel_tol: float = 1e-9) -> bool:
    """True when the depth raster is affine across the 3x3 patch at (row, col).

    Bilinear reads are exact only on locally affine rasters, so track
    observations are restricted to such pixels; curvature or discontinuities
    (object interiors near silhouettes, primitive boundaries) fail the test.
    """
    h, w = depth.shape
    if not (1 <= row < h - 1 and 1 <= col < w - 1):
        return False
    patch = depth[row - 1:row + 2, col - 1:col + 2]
    if (patch <= 0).any():
        return False
    d = patch[1, 1]
    lap_x = abs(patch[1, 0] + patch[1, 2] - 2 * d)
    lap_y = abs(patch[0, 1] + patch[2, 1] - 2 * d)
    lap_d = abs(patch[0, 0] + patch[2, 2] - 2 * d)
    return max(lap_x, lap_y, lap_d) <= rel_tol * d


def synth_tracks(spec: SceneSpec, n_tracks: int, seed: int = 0,
                 rendered: SceneRender | None = None) -> list[Track]:
    """Sample static world points and project them into every visible frame.

    Observations are sub-pixel exact; a point leaving the frustum (or hidden)
    simply skips that frame, and candidates with fewer than two visible
    observations are resampled. Points are drawn from locally flat raster
    regions so that bilinear depth reads reproduce the true surface exactly.
    Fixed seeds reproduce tracks bitwise.
    """
    if rendered is None:
        rendered = render(spec)
    rng = np.random.default_rng(seed)
    K = spec.intrinsics
    h, w = K.height, K.width
    rays = camera_ray_grid(K)
    tracks: list[Track] = []
    attempts = 0
    while len(tracks) < n_tracks and attempts < n_tracks * 200:
        attempts += 1
        f0 = int(rng.integers(spec.n_frames))
        col = int(rng.integers(w))
        row = int(rng.integers(h))
        pid = rendered.prim_id[f0][row, col]
        if pid < 0 or (spec.moving_index is not None and pid == spec.moving_index):
            continue
        if not _raster_locally_flat(rendered.depth[f0], row, col):
            continue
        d = rendered.depth[f0][row, col]
        cam0 = spec.camera(f0)
        world = cam0.pose.t + d * (cam0.pose.R @ rays[row, col])
        observations = []
        for f in range(spec.n_frames):
            cam = spec.camera(f)
            c = cam.pose.R.T @ (world - cam.pose.t)
            if c[2] <= 1e-9:
                continue
            q = K.matrix @ c
            px, py = q[0] / q[2], q[1] / q[2]
            if not (0 <= px <= w - 1 and 0 <= py <= h - 1):
                continue
            rxi = int(round(px))
            ryi = int(round(py))
            if rendered.prim_id[f][ryi, rxi] != pid:
                continue
            if abs(rendered.depth[f][ryi, rxi] - c[2]) > OCCLUSION_REL_TOL * c[2]:
                continue
            if not _raster_locally_flat(rendered.depth[f], ryi, rxi):
                continue
            observations.append((f, (float(px), float(py))))
        if len(observations) >= 2:
            tracks.append(Track(observations=observations))
    return tracks


# ---------------------------------------------------------------------------
# Perturbation


def perturb(target, kind: str, magnitude: float, seed: int = 0):
    """Deterministic seeded corruption of a DepthField or depth raster.

    Kinds:
        gaussian-log: add N(0, magnitude^2) noise in log-depth, per parameter
            (field) or per defined pixel (raster).
        lowfreq: add magnitude * smooth value noise in log-depth.
        scale: multiply depth by magnitude.

    Returns:
        A perturbed copy; the input is untouched.
    """
    if magnitude < 0:
        raise ValueError("magnitude must be >= 0")
    if kind not in ("gaussian-log", "lowfreq", "scale"):
        raise ValueError(f"unknown perturbation kind {kind!r}")
    rng = np.random.default_rng(seed)

    if isinstance(target, DepthField):
        out = target.copy()
        if kind == "gaussian-log":
            out.theta += rng.normal(0.0, magnitude, size=out.theta.shape)
        elif kind == "lowfreq":
            gh, gw = out.grid_shape
            ys, xs = np.mgrid[0:gh, 0:gw]
            for f in range(out.n_frames):
                pts = np.stack([xs / 7.0, ys / 7.0, np.full_like(xs, f, dtype=float)],
                               axis=-1)
                out.theta[f] += magnitude * (2 * _value_noise(pts, seed * 3.1) - 1)
        else:
            out.theta += np.log(magnitude)
        return out

    depth = np.asarray(target, dtype=np.float64).copy()
    defined = depth > 0
    if kind == "gaussian-log":
        noise = rng.normal(0.0, magnitude, size=depth.shape)
        depth[defined] *= np.exp(noise[defined])
    elif kind == "lowfreq":
        h, w = depth.shape
        ys, xs = np.mgrid[0:h, 0:w]
        pts = np.stack([xs / 7.0, ys / 7.0, np.zeros_like(xs, dtype=float)], axis=-1)
        noise = magnitude * (2 * _value_noise(pts, seed * 3.1) - 1)
        depth[defined] *= np.exp(noise[defined])
    else:
        depth[defined] *= magnitude
    return depth


# ---------------------------------------------------------------------------
# Scene JSON schema


def scene_to_dict(spec: SceneSpec) -> dict:
    """JSON-serializable description of a scene."""
    K = spec.intrinsics
    prims = []
    for prim in spec.primitives:
        if isinstance(prim, Plane):
            prims.append({"type": "plane", "point": list(prim.point),
                          "normal": list(prim.normal),
                          "texture_seed": prim.texture_seed,
                          "texture_scale": prim.texture_scale})
        else:
            prims.append({"type": "sphere", "center": list(prim.center),
                          "radius": prim.radius,
                          "texture_seed": prim.texture_seed,
                          "texture_scale": prim.texture_scale})
    doc = {
        "intrinsics": {"fx": K.fx, "fy": K.fy, "cx": K.cx, "cy": K.cy,
                       "width": K.width, "height": K.height},
        "poses": [{"R": [float(v) for v in p.R.ravel()],
                   "t": [float(v) for v in p.t]} for p in spec.poses],
        "primitives": prims,
    }
    if spec.moving_index is not None:
        doc["moving_index"] = spec.moving_index
        doc["motion"] = [[float(v) for v in row] for row in spec.motion]
    if spec.stereo_baseline is not None:
        doc["stereo_baseline"] = spec.stereo_baseline
    return doc


def scene_from_dict(doc: dict) -> SceneSpec:
    """Inverse of scene_to_dict."""
    ki = doc["intrinsics"]
    intrinsics = CameraIntrinsics(fx=ki["fx"], fy=ki["fy"], cx=ki["cx"],
                                  cy=ki["cy"], width=ki["width"],
                                  height=ki["height"])
    poses = [CameraPose(R=np.asarray(p["R"], dtype=np.float64).reshape(3, 3),
                        t=np.asarray(p["t"], dtype=np.float64))
             for p in doc["poses"]]
    prims = []
    for p in doc["primitives"]:
        if p["type"] == "plane":
            prims.append(Plane(point=tuple(p["point"]), normal=tuple(p["normal"]),
                               texture_seed=p.get("texture_seed", 0),
                               texture_scale=p.get("texture_scale", 1.0)))
        elif p["type"] == "sphere":
            prims.append(Sphere(center=tuple(p["center"]), radius=p["radius"],
                                texture_seed=p.get("texture_seed", 0),
                                texture_scale=p.get("texture_scale", 1.0)))
        else:
            raise ValueError(f"unknown primitive type {p['type']!r}")
    motion = doc.get("motion")
    return SceneSpec(
        intrinsics=intrinsics,
        poses=poses,
        primitives=prims,
        moving_index=doc.get("moving_index"),
        motion=np.asarray(motion, dtype=np.float64) if motion is not None else None,
        stereo_baseline=doc.get("stereo_baseline"),
    )


# ---------------------------------------------------------------------------
# Bundled scenes


def _translation_poses(n_frames: int, step_x: float,
                       step_y: float = 0.0) -> list[CameraPose]:
    return [
        CameraPose(R=np.eye(3), t=np.array([f * step_x, f * step_y, 0.0]))
        for f in range(n_frames)
    ]


def make_intrinsics(width: int, height: int, focal: float) -> CameraIntrinsics:
    return CameraIntrinsics(fx=focal, fy=focal, cx=(width - 1) / 2.0,
                            cy=(height - 1) / 2.0, width=width, height=height)


def scene_static_plane(n_frames: int = 8) -> SceneSpec:
    """Axis-frontal infinite plane, translation-only trajectory, stereo pair."""
    return SceneSpec(
        intrinsics=make_intrinsics(64, 48, 55.0),
        poses=_translation_poses(n_frames, step_x=0.22, step_y=0.03),
        primitives=[Plane(point=(0, 0, 10.0), normal=(0, 0, 1.0),
                          texture_seed=3, texture_scale=0.8)],
        stereo_baseline=0.8,
    )


def scene_plane_sphere(n_frames: int = 10) -> SceneSpec:
    """Distant frontal plane plus a large, gently curved sphere in front."""
    return SceneSpec(
        intrinsics=make_intrinsics(96, 72, 90.0),
        poses=_translation_poses(n_frames, step_x=41.0, step_y=4.0),
        primitives=[
            Plane(point=(0, 0, 3090.0), normal=(0, 0, 1.0),
                  texture_seed=5, texture_scale=0.002),
            Sphere(center=(178.0, 0.0, 2700.0), radius=450.0,
                   texture_seed=9, texture_scale=0.0025),
        ],
        stereo_baseline=60.0,
    )


def scene_moving_sphere(n_frames: int = 10) -> SceneSpec:
    """Frontal plane with one rigidly translating sphere in front of it."""
    motion = np.stack(
        [np.array([0.35 * f, 0.1 * f, 0.0]) for f in range(n_frames)]
    )
    return SceneSpec(
        intrinsics=make_intrinsics(64, 48, 55.0),
        poses=_translation_poses(n_frames, step_x=0.25),
        primitives=[
            Plane(point=(0, 0, 12.0), normal=(0, 0, 1.0),
                  texture_seed=7, texture_scale=0.7),
            Sphere(center=(-2.0, 0.0, 8.0), radius=1.5,
                   texture_seed=11, texture_scale=1.8),
        ],
        moving_index=1,
        motion=motion,
    )


def scene_convergence(n_frames: int = 1280) -> SceneSpec:
    """Long translation-only sequence over a frontal plane; sized so the
    schedule's movement budget can descend sigma=0.2 log-depth noise."""
    return SceneSpec(
        intrinsics=make_intrinsics(48, 36, 40.0),
        poses=_translation_poses(n_frames, step_x=0.25),
        primitives=[Plane(point=(0, 0, 10.0), normal=(0, 0, 1.0),
                          texture_seed=13, texture_scale=0.8)],
    )


BUNDLED_SCENES = {
    "plane": scene_static_plane,
    "plane_sphere": scene_plane_sphere,
    "moving": scene_moving_sphere,
    "convergence": scene_convergence,
}
