"""Shared fixtures: small cameras and rendered oracle scenes."""

import numpy as np
import pytest

from steadydepth.geometry import Camera, CameraIntrinsics, CameraPose
from steadydepth.synth import (
    scene_moving_sphere,
    scene_plane_sphere,
    scene_static_plane,
    render,
)


def rotation_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


@pytest.fixture
def intrinsics():
    return CameraIntrinsics(fx=100.0, fy=100.0, cx=50.0, cy=50.0, width=101, height=101)


@pytest.fixture
def camera(intrinsics):
    return Camera(intrinsics=intrinsics,
                  pose=CameraPose(R=np.eye(3), t=np.zeros(3)))


@pytest.fixture(scope="session")
def plane_scene():
    spec = scene_static_plane()
    return spec, render(spec)


@pytest.fixture(scope="session")
def sphere_scene():
    spec = scene_plane_sphere()
    return spec, render(spec)


@pytest.fixture(scope="session")
def moving_scene():
    spec = scene_moving_sphere()
    return spec, render(spec)
