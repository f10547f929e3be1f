"""Bit-exact readers and writers for the on-disk formats.

Formats (all little-endian):
  * PFM ("Pf", grayscale float32, scale -1.0, bottom-to-top rows) for depth.
  * .flo (magic float 202021.25, int32 w/h, row-major interleaved dx, dy).
  * PGM (P5, maxval 255) for masks: 255 = valid, 0 = invalid.
  * PPM (P6, maxval 255) for color frames.
  * Cameras: schema-versioned JSON with an explicit pose-convention tag.
  * Tracks: text lines "track_id frame x y", frames increasing per track.

Readers reject malformed input instead of repairing it, and every writer's
output round-trips bitwise through its reader.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    MalformedHeader,
    SchemaViolation,
    TruncatedData,
    UnsupportedEndianness,
    UnsupportedFormat,
)
from .geometry import Camera, CameraIntrinsics, CameraPose
from .metrics import Track

FLO_MAGIC = 202021.25
CAMERA_SCHEMA_VERSION = 1
POSE_CONVENTION = "camera_to_world"


# ---------------------------------------------------------------------------
# PFM (depth)


def write_pfm(path, raster: np.ndarray) -> None:
    """Write a (H, W) float raster as a little-endian grayscale PFM."""
    raster = np.asarray(raster, dtype=np.float32)
    if raster.ndim != 2:
        raise ValueError(f"PFM depth rasters must be 2-D, got {raster.shape}")
    h, w = raster.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(raster[::-1].astype("<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a grayscale little-endian PFM into a (H, W) float32 raster.

    Raises:
        MalformedHeader: Unparseable header.
        UnsupportedFormat: Color ("PF") variant.
        UnsupportedEndianness: Non-negative scale (big-endian data).
        TruncatedData: Payload shorter than the header announces.
    """
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic == b"PF":
            raise UnsupportedFormat("color PFM is not a depth raster")
        if magic != b"Pf":
            raise MalformedHeader(f"expected 'Pf' header, got {magic!r}")
        dims = f.readline().split()
        if len(dims) != 2:
            raise MalformedHeader("expected 'width height' line")
        try:
            w, h = int(dims[0]), int(dims[1])
        except ValueError as exc:
            raise MalformedHeader("non-integer dimensions") from exc
        if w < 1 or h < 1:
            raise MalformedHeader(f"non-positive dimensions {w}x{h}")
        try:
            scale = float(f.readline().strip())
        except ValueError as exc:
            raise MalformedHeader("unparseable scale line") from exc
        if scale >= 0:
            raise UnsupportedEndianness("big-endian PFM is not supported")
        payload = f.read(4 * w * h)
        if len(payload) != 4 * w * h:
            raise TruncatedData(f"expected {4 * w * h} bytes, got {len(payload)}")
    data = np.frombuffer(payload, dtype="<f4").reshape(h, w)
    return data[::-1].copy()


# ---------------------------------------------------------------------------
# .flo (flow)


def write_flo(path, flow: np.ndarray) -> None:
    """Write an (H, W, 2) flow raster in Middlebury .flo layout."""
    flow = np.asarray(flow, dtype=np.float32)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"flow must be (H, W, 2), got {flow.shape}")
    h, w = flow.shape[:2]
    with open(path, "wb") as f:
        f.write(np.float32(FLO_MAGIC).tobytes())
        f.write(np.array([w, h], dtype="<i4").tobytes())
        f.write(flow.astype("<f4").tobytes())


def read_flo(path) -> np.ndarray:
    """Read a .flo file into an (H, W, 2) float32 raster.

    Raises:
        BadMagic: Wrong magic tag.
        TruncatedData: Payload shorter than the header announces.
    """
    with open(path, "rb") as f:
        head = f.read(4)
        if len(head) != 4 or np.frombuffer(head, dtype="<f4")[0] != FLO_MAGIC:
            raise BadMagic("not a .flo file")
        dims = f.read(8)
        if len(dims) != 8:
            raise TruncatedData("missing dimensions")
        w, h = np.frombuffer(dims, dtype="<i4")
        if w < 1 or h < 1:
            raise MalformedHeader(f"non-positive dimensions {w}x{h}")
        payload = f.read(8 * w * h)
        if len(payload) != 8 * w * h:
            raise TruncatedData(f"expected {8 * w * h} bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype="<f4").reshape(h, w, 2).copy()


# ---------------------------------------------------------------------------
# PGM masks / PPM color


def _read_netpbm_header(f, expected_magic: bytes):
    magic = f.readline().strip()
    if magic != expected_magic:
        raise MalformedHeader(f"expected {expected_magic!r}, got {magic!r}")
    fields = []
    while len(fields) < 3:
        line = f.readline()
        if not line:
            raise MalformedHeader("truncated header")
        text = line.split(b"#", 1)[0]
        fields.extend(text.split())
    try:
        w, h, maxval = (int(v) for v in fields[:3])
    except ValueError as exc:
        raise MalformedHeader("non-integer header fields") from exc
    if w < 1 or h < 1:
        raise MalformedHeader(f"non-positive dimensions {w}x{h}")
    if maxval != 255:
        raise UnsupportedFormat(f"only maxval 255 is supported, got {maxval}")
    return w, h


def write_pgm(path, mask: np.ndarray) -> None:
    """Write a boolean mask as binary PGM (255 = valid, 0 = invalid)."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2-D, got {mask.shape}")
    data = np.where(mask.astype(bool), 255, 0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{mask.shape[1]} {mask.shape[0]}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM mask into a boolean raster (nonzero = valid)."""
    with open(path, "rb") as f:
        w, h = _read_netpbm_header(f, b"P5")
        payload = f.read(w * h)
        if len(payload) != w * h:
            raise TruncatedData(f"expected {w * h} bytes, got {len(payload)}")
    return (np.frombuffer(payload, dtype=np.uint8).reshape(h, w) > 0).copy()


def write_ppm(path, rgb: np.ndarray) -> None:
    """Write an (H, W, 3) color image as binary PPM.

    Float inputs are treated as [0, 1] and quantized; uint8 passes through.
    """
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"rgb must be (H, W, 3), got {rgb.shape}")
    if rgb.dtype != np.uint8:
        rgb = np.clip(np.round(rgb * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P6\n{rgb.shape[1]} {rgb.shape[0]}\n255\n".encode("ascii"))
        f.write(rgb.tobytes())


def read_ppm(path) -> np.ndarray:
    """Read a binary PPM into an (H, W, 3) uint8 raster."""
    with open(path, "rb") as f:
        w, h = _read_netpbm_header(f, b"P6")
        payload = f.read(3 * w * h)
        if len(payload) != 3 * w * h:
            raise TruncatedData(f"expected {3 * w * h} bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3).copy()


# ---------------------------------------------------------------------------
# Cameras JSON


def write_cameras(path, cameras: list[Camera]) -> None:
    """Serialize per-frame cameras with the schema version and convention tag."""
    frames = []
    for idx, cam in enumerate(cameras):
        K = cam.intrinsics
        frames.append({
            "id": idx,
            "fx": K.fx, "fy": K.fy, "cx": K.cx, "cy": K.cy,
            "width": K.width, "height": K.height,
            "R": [float(v) for v in cam.pose.R.ravel()],
            "t": [float(v) for v in cam.pose.t],
        })
    doc = {
        "schema_version": CAMERA_SCHEMA_VERSION,
        "convention": POSE_CONVENTION,
        "frames": frames,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_cameras(path) -> list[Camera]:
    """Load a cameras file, validating schema, ids, and rotation orthonormality.

    Raises:
        SchemaViolation: On any schema problem; the message carries the path
            of the offending field.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"$: not valid JSON ({exc})") from exc
    if doc.get("schema_version") != CAMERA_SCHEMA_VERSION:
        raise SchemaViolation("$.schema_version: expected 1")
    if doc.get("convention") != POSE_CONVENTION:
        raise SchemaViolation(f"$.convention: expected '{POSE_CONVENTION}'")
    frames = doc.get("frames")
    if not isinstance(frames, list) or not frames:
        raise SchemaViolation("$.frames: expected a non-empty list")
    cameras: list[Camera] = []
    for i, entry in enumerate(frames):
        where = f"$.frames[{i}]"
        if entry.get("id") != i:
            raise SchemaViolation(f"{where}.id: ids must be contiguous from 0")
        try:
            K = CameraIntrinsics(
                fx=float(entry["fx"]), fy=float(entry["fy"]),
                cx=float(entry["cx"]), cy=float(entry["cy"]),
                width=int(entry["width"]), height=int(entry["height"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"{where}: bad intrinsics ({exc})") from exc
        R = np.asarray(entry.get("R", []), dtype=np.float64)
        t = np.asarray(entry.get("t", []), dtype=np.float64)
        if R.size != 9:
            raise SchemaViolation(f"{where}.R: expected 9 scalars")
        if t.size != 3:
            raise SchemaViolation(f"{where}.t: expected 3 scalars")
        R = R.reshape(3, 3)
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-6):
            raise SchemaViolation(f"{where}.R: not orthonormal within 1e-6")
        if abs(np.linalg.det(R) - 1.0) > 1e-6:
            raise SchemaViolation(f"{where}.R: determinant is not 1 within 1e-6")
        cameras.append(Camera(intrinsics=K, pose=CameraPose(R=R, t=t)))
    return cameras


# ---------------------------------------------------------------------------
# Tracks text


def write_tracks(path, tracks: list[Track]) -> None:
    """Write tracks as 'track_id frame x y' lines, repr-roundtrip floats."""
    lines = []
    for tid, track in enumerate(tracks):
        for frame, (x, y) in track.observations:
            lines.append(f"{tid} {frame} {x!r} {y!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_tracks(path) -> list[Track]:
    """Parse a tracks file, enforcing per-track frame ordering.

    Raises:
        SchemaViolation: Malformed lines, out-of-order frames, or tracks with
            fewer than 2 observations.
    """
    per_track: dict[int, list[tuple[int, tuple[float, float]]]] = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise SchemaViolation(f"line {lineno}: expected 'track_id frame x y'")
        try:
            tid = int(parts[0])
            frame = int(parts[1])
            x, y = float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise SchemaViolation(f"line {lineno}: unparseable fields") from exc
        obs = per_track.setdefault(tid, [])
        if obs and frame <= obs[-1][0]:
            raise SchemaViolation(
                f"line {lineno}: frame {frame} not increasing within track {tid}"
            )
        obs.append((frame, (x, y)))
    tracks = []
    for tid in sorted(per_track):
        if len(per_track[tid]) < 2:
            raise SchemaViolation(f"track {tid}: fewer than 2 observations")
        tracks.append(Track(observations=per_track[tid]))
    return tracks
