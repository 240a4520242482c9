"""Unit-quaternion utilities, scalar-first convention (w, x, y, z).

All functions take and return plain float64 ndarrays and never mutate their
inputs. Canonical sign means w >= 0, and if w == 0 the first nonzero of
(x, y, z) is positive, so equal rotations compare equal elementwise.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,) or not np.all(np.isfinite(q)):
        raise InvalidArgumentError(f"quaternion must be 4 finite values, got {q!r}")
    n = float(np.linalg.norm(q))
    if n == 0.0:
        raise InvalidArgumentError("zero quaternion cannot be normalized")
    return q / n


def canonicalize(q: np.ndarray) -> np.ndarray:
    """Flip sign so the representative of the double cover is unique."""
    q = np.asarray(q, dtype=np.float64)
    for c in q:
        if c != 0.0:
            return -q if c < 0.0 else q.copy()
    return q.copy()


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotate(q: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Rotate one point (3,) or a cloud (n, 3) by q."""
    return np.asarray(points, dtype=np.float64) @ to_matrix(q).T


def from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    n = float(np.linalg.norm(axis))
    if n == 0.0:
        if angle != 0.0:
            raise InvalidArgumentError("zero axis with nonzero angle")
        return IDENTITY.copy()
    half = 0.5 * angle
    return np.concatenate(([np.cos(half)], np.sin(half) * axis / n))


def to_axis_angle(q: np.ndarray) -> tuple[np.ndarray, float]:
    """Axis and angle in [0, pi] of the rotation, shorter arc.

    Identity maps to (+z, 0) so callers always get a unit axis.
    """
    q = canonicalize(normalize(q))
    w = min(1.0, max(-1.0, float(q[0])))
    angle = 2.0 * np.arccos(w)
    s = float(np.linalg.norm(q[1:]))
    if s < 1e-15:
        return np.array([0.0, 0.0, 1.0]), 0.0
    return q[1:] / s, float(angle)


def from_rotation_vector(rv: np.ndarray) -> np.ndarray:
    """Exponential map: rotation vector (axis * angle) to quaternion."""
    rv = np.asarray(rv, dtype=np.float64)
    angle = float(np.linalg.norm(rv))
    if angle < 1e-300:
        return IDENTITY.copy()
    return from_axis_angle(rv, angle)


def slerp(a: np.ndarray, b: np.ndarray, u: float) -> np.ndarray:
    """Spherical interpolation along the shorter arc, u in [0, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    dot = float(np.dot(a, b))
    if dot < 0.0:
        b = -b
        dot = -dot
    if dot > 1.0 - 1e-12:
        out = a + u * (b - a)
        return out / np.linalg.norm(out)
    theta = np.arccos(min(1.0, dot))
    s = np.sin(theta)
    return (np.sin((1.0 - u) * theta) * a + np.sin(u * theta) * b) / s


def geodesic_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Rotation angle in [0, pi] between two unit quaternions."""
    dot = min(1.0, abs(float(np.dot(a, b))))
    return 2.0 * np.arccos(dot)
