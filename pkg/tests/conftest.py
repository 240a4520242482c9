from __future__ import annotations

import numpy as np
import pytest

from asmkit.geometry import PartGeometry, Pose, Trajectory
from asmkit.meshes import box_mesh, sample_surface


def make_pose(w=1.0, x=0.0, y=0.0, z=0.0, t=(0.0, 0.0, 0.0)) -> Pose:
    return Pose(np.array([w, x, y, z]), np.asarray(t, dtype=float))


def z_rotation(angle: float, t=(0.0, 0.0, 0.0)) -> Pose:
    return Pose(
        np.array([np.cos(angle / 2), 0.0, 0.0, np.sin(angle / 2)]),
        np.asarray(t, dtype=float),
    )


def box_part(part_id=0, center=(0, 0, 0), half=(0.1, 0.1, 0.1), n_points=64, seed=0):
    mesh = box_mesh(center, half)
    rng = np.random.default_rng(seed)
    return PartGeometry(part_id, mesh, sample_surface(mesh, n_points, rng))


def constant_trajectory(part_id: int, pose: Pose, t_len: int = 12) -> Trajectory:
    return Trajectory(part_id, tuple(pose for _ in range(t_len)))


def line_trajectory(part_id, start, end, t_len=12, rotation=None) -> Trajectory:
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    rot = np.array([1.0, 0.0, 0.0, 0.0]) if rotation is None else rotation
    poses = tuple(
        Pose(rot, start + (end - start) * (k / (t_len - 1))) for k in range(t_len)
    )
    return Trajectory(part_id, poses)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
