"""SE(3) poses, point clouds, chamfer distance, and bounding volumes.

Conventions used throughout the toolkit:

* Quaternions are scalar-first (w, x, y, z), unit norm, canonical sign
  (w >= 0; if w == 0 the first nonzero component is positive).
* A pose maps part-local points to world points: p' = R p + t.
* Chamfer distance is the sum of the two directed mean squared
  nearest-neighbor distances, so it is symmetric, scale-quadratic, and zero
  only for point-identical sets.

Point clouds travel on disk as little-endian binary (magic ``APC1``, u32
count, count x 3 float32); meshes as ASCII OBJ restricted to triangles.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import quaternions as quat
from .errors import InvalidArgumentError, InvalidGeometryError, ParseError

#: Default number of time steps per part trajectory.
DEFAULT_T = 12

#: Above this cloud size nearest-neighbor queries go through a KD-tree.
_KDTREE_CUTOFF = 256


def _as_cloud(points, name: str = "cloud") -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidArgumentError(f"{name} must have shape (n, 3), got {arr.shape}")
    if arr.shape[0] == 0:
        raise InvalidArgumentError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidGeometryError(f"{name} contains non-finite coordinates")
    return arr


@dataclass(frozen=True)
class Pose:
    """One SE(3) element: unit quaternion (w, x, y, z) plus translation."""

    rotation: np.ndarray = field(default_factory=lambda: quat.IDENTITY.copy())
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = quat.canonicalize(quat.normalize(self.rotation))
        t = np.asarray(self.translation, dtype=np.float64)
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise InvalidArgumentError(f"translation must be 3 finite values, got {t!r}")
        r.flags.writeable = False
        t = t.copy()
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @property
    def matrix(self) -> np.ndarray:
        return quat.to_matrix(self.rotation)

    def compose(self, other: "Pose") -> "Pose":
        """self applied after other: (self * other)(p) = self(other(p))."""
        return Pose(
            quat.multiply(self.rotation, other.rotation),
            quat.rotate(self.rotation, other.translation) + self.translation,
        )

    def inverse(self) -> "Pose":
        rinv = quat.conjugate(self.rotation)
        return Pose(rinv, -quat.rotate(rinv, self.translation))

    def is_close(self, other: "Pose", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, atol=atol)
            and np.allclose(self.translation, other.translation, atol=atol)
        )


def identity_pose() -> Pose:
    return Pose()


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box: componentwise min <= max."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=np.float64)
        hi = np.asarray(self.max, dtype=np.float64)
        if lo.shape != (3,) or hi.shape != (3,):
            raise InvalidArgumentError("Aabb corners must be 3-vectors")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InvalidGeometryError("Aabb corners must be finite")
        if np.any(lo > hi):
            raise InvalidArgumentError("Aabb min exceeds max")
        lo = lo.copy()
        hi = hi.copy()
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    def inflated(self, margin: float) -> "Aabb":
        return Aabb(self.min - margin, self.max + margin)

    def intersects(self, other: "Aabb") -> bool:
        return bool(np.all(self.min <= other.max) and np.all(other.min <= self.max))

    def contains_points(self, points: np.ndarray, atol: float = 0.0) -> bool:
        pts = np.asarray(points, dtype=np.float64)
        return bool(
            np.all(pts >= self.min - atol) and np.all(pts <= self.max + atol)
        )

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(np.minimum(self.min, other.min), np.maximum(self.max, other.max))


@dataclass(frozen=True)
class PartGeometry:
    """A rigid part: triangle mesh plus fixed-size surface point cloud.

    ``mesh`` has shape (n_triangles, 3, 3); ``points`` (m, 3). The centroid
    and AABB are derived from the point cloud and cached at construction.
    """

    part_id: int
    mesh: np.ndarray
    points: np.ndarray
    centroid: np.ndarray = field(init=False)
    aabb: Aabb = field(init=False)

    def __post_init__(self):
        pts = _as_cloud(self.points, f"part {self.part_id} points")
        mesh = np.asarray(self.mesh, dtype=np.float64)
        if mesh.size == 0:
            mesh = mesh.reshape(0, 3, 3)
        if mesh.ndim != 3 or mesh.shape[1:] != (3, 3):
            raise InvalidGeometryError(
                f"mesh must have shape (n, 3, 3), got {mesh.shape}"
            )
        if not np.all(np.isfinite(mesh)):
            raise InvalidGeometryError("mesh contains non-finite vertices")
        if mesh.shape[0]:
            _reject_degenerate_triangles(mesh)
        pts.flags.writeable = False
        mesh.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "mesh", mesh)
        object.__setattr__(self, "centroid", pts.mean(axis=0))
        verts = np.concatenate([pts, mesh.reshape(-1, 3)]) if mesh.size else pts
        object.__setattr__(self, "aabb", Aabb(verts.min(axis=0), verts.max(axis=0)))

    @property
    def num_points(self) -> int:
        return int(self.points.shape[0])


def _reject_degenerate_triangles(mesh: np.ndarray, rel_tol: float = 1e-12) -> None:
    e1 = mesh[:, 1] - mesh[:, 0]
    e2 = mesh[:, 2] - mesh[:, 0]
    areas = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
    scale = max(float(np.abs(mesh).max()), 1.0)
    if np.any(areas <= rel_tol * scale * scale):
        bad = int(np.argmin(areas))
        raise InvalidGeometryError(f"degenerate triangle at index {bad}")


@dataclass(frozen=True)
class Trajectory:
    """The T-step pose sequence of one part during its assembly step."""

    part_id: int
    poses: tuple[Pose, ...]

    def __post_init__(self):
        poses = tuple(self.poses)
        if not poses:
            raise InvalidArgumentError("trajectory must contain at least one pose")
        if not all(isinstance(p, Pose) for p in poses):
            raise InvalidArgumentError("trajectory entries must be Pose instances")
        object.__setattr__(self, "poses", poses)

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def final(self) -> Pose:
        return self.poses[-1]

    @property
    def first(self) -> Pose:
        return self.poses[0]

    def reversed(self) -> "Trajectory":
        return Trajectory(self.part_id, tuple(reversed(self.poses)))

    def translations(self) -> np.ndarray:
        return np.array([p.translation for p in self.poses])

    def rotations(self) -> np.ndarray:
        return np.array([p.rotation for p in self.poses])


def apply_pose(pose: Pose, cloud) -> np.ndarray:
    """Transform each point: p' = R p + t. Order and cardinality preserved."""
    pts = _as_cloud(cloud)
    return pts @ pose.matrix.T + pose.translation


def chamfer(a, b) -> float:
    """Bidirectional chamfer distance: mean squared NN distance, both ways."""
    a = _as_cloud(a, "cloud a")
    b = _as_cloud(b, "cloud b")
    return _mean_sq_nn(a, b) + _mean_sq_nn(b, a)


def _mean_sq_nn(src: np.ndarray, dst: np.ndarray) -> float:
    if dst.shape[0] > _KDTREE_CUTOFF:
        d, _ = cKDTree(dst).query(src, k=1)
        return float(np.mean(d * d))
    return float(np.mean(_brute_sq_nn(src, dst)))


def _brute_sq_nn(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    diff = src[:, None, :] - dst[None, :, :]
    return np.min(np.einsum("ijk,ijk->ij", diff, diff), axis=1)


def bbox_of(cloud) -> Aabb:
    pts = _as_cloud(cloud)
    return Aabb(pts.min(axis=0), pts.max(axis=0))


def bbox_diagonal(aabb: Aabb) -> float:
    return float(np.linalg.norm(aabb.max - aabb.min))


def pose_interpolation_velocity(
    p_from: Pose, p_to: Pose, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """Constant (linear, angular) velocity carrying p_from onto p_to in dt.

    Linear velocity acts on the pose translation; angular velocity is the
    axis-angle of the relative rotation q_to * q_from^-1 along the shorter
    arc, divided by dt.
    """
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    linear = (p_to.translation - p_from.translation) / dt
    rel = quat.multiply(p_to.rotation, quat.conjugate(p_from.rotation))
    axis, angle = quat.to_axis_angle(rel)
    return linear, axis * (angle / dt)


def integrate_velocity(
    pose: Pose, linear: np.ndarray, angular: np.ndarray, dt: float
) -> Pose:
    """Advance a pose by constant velocities for dt (inverse of the above).

    Rotation is applied about the pose anchor (its translation point), which
    matches how pose_interpolation_velocity factors the relative motion.
    """
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    dq = quat.from_rotation_vector(np.asarray(angular, dtype=np.float64) * dt)
    return Pose(
        quat.multiply(dq, pose.rotation),
        pose.translation + np.asarray(linear, dtype=np.float64) * dt,
    )


def interpolate_pose(p_from: Pose, p_to: Pose, u: float) -> Pose:
    """Linear translation / slerp rotation blend at parameter u in [0, 1]."""
    return Pose(
        quat.slerp(p_from.rotation, p_to.rotation, u),
        (1.0 - u) * p_from.translation + u * p_to.translation,
    )


# ---------------------------------------------------------------------------
# On-disk formats
# ---------------------------------------------------------------------------

_CLOUD_MAGIC = b"APC1"


def save_point_cloud(path, cloud) -> None:
    pts = _as_cloud(cloud).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(_CLOUD_MAGIC)
        fh.write(struct.pack("<I", pts.shape[0]))
        fh.write(pts.tobytes())


def load_point_cloud(path) -> np.ndarray:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != _CLOUD_MAGIC:
        raise ParseError(f"{path}: bad magic {raw[:4]!r}, expected {_CLOUD_MAGIC!r}")
    if len(raw) < 8:
        raise ParseError(f"{path}: truncated header")
    (count,) = struct.unpack("<I", raw[4:8])
    expected = 8 + count * 12
    if len(raw) != expected:
        raise ParseError(f"{path}: expected {expected} bytes, found {len(raw)}")
    pts = np.frombuffer(raw, dtype="<f4", offset=8).reshape(count, 3)
    return pts.astype(np.float64)


def save_obj(path, mesh: np.ndarray) -> None:
    """Write a triangle soup as ASCII OBJ with deduplicated vertices."""
    mesh = np.asarray(mesh, dtype=np.float64).reshape(-1, 3, 3)
    flat = mesh.reshape(-1, 3)
    verts, inverse = np.unique(flat.round(12), axis=0, return_inverse=True)
    faces = inverse.reshape(-1, 3)
    lines = [f"v {v[0]:.12g} {v[1]:.12g} {v[2]:.12g}" for v in verts]
    lines += [f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}" for f in faces]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_obj(path) -> np.ndarray:
    """Read a triangles-only ASCII OBJ into an (n, 3, 3) array."""
    path = Path(path)
    verts: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        token = line.split("#", 1)[0].strip()
        if not token:
            continue
        parts = token.split()
        if parts[0] == "v":
            if len(parts) < 4:
                raise ParseError(f"{path}:{lineno}: malformed vertex line")
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(p.split("/", 1)[0]) for p in parts[1:]]
            if len(idx) != 3:
                raise ParseError(f"{path}:{lineno}: only triangle faces are supported")
            faces.append(tuple(i - 1 if i > 0 else len(verts) + i for i in idx))
        # vn/vt/usemtl and friends are ignored
    if not faces:
        raise ParseError(f"{path}: no faces found")
    v = np.asarray(verts, dtype=np.float64)
    try:
        return v[np.asarray(faces, dtype=np.int64)]
    except IndexError as exc:
        raise ParseError(f"{path}: face index out of range") from exc
