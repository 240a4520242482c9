"""Procedural closed triangle meshes and surface sampling.

Boxes that build the stacked/slot instances, and extruded plates with a
polygonal through-hole (square, round, or cross-shaped keyway) that build
the insertion and twist-lock instances. All meshes are closed and
consistently wound CCW-outward, which the contact queries rely on.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError

_BOX_FACES = (
    # -z, +z, -y, +y, -x, +x; each as two CCW-outward triangles
    ((0, 2, 1), (0, 3, 2)),
    ((4, 5, 6), (4, 6, 7)),
    ((0, 1, 5), (0, 5, 4)),
    ((2, 3, 7), (2, 7, 6)),
    ((0, 4, 7), (0, 7, 3)),
    ((1, 2, 6), (1, 6, 5)),
)


def box_mesh(center, half_extents) -> np.ndarray:
    """Axis-aligned box as 12 CCW-outward triangles, shape (12, 3, 3)."""
    c = np.asarray(center, dtype=np.float64)
    h = np.asarray(half_extents, dtype=np.float64)
    if np.any(h <= 0):
        raise InvalidArgumentError(f"half extents must be positive, got {h}")
    corners = c + h * np.array(
        [
            [-1, -1, -1],
            [+1, -1, -1],
            [+1, +1, -1],
            [-1, +1, -1],
            [-1, -1, +1],
            [+1, -1, +1],
            [+1, +1, +1],
            [-1, +1, +1],
        ],
        dtype=np.float64,
    )
    tris = [corners[list(t)] for face in _BOX_FACES for t in face]
    return np.array(tris)


def square_loop(half: float, angles: np.ndarray) -> np.ndarray:
    """Points of an axis-aligned square boundary at the given ray angles."""
    c, s = np.cos(angles), np.sin(angles)
    scale = half / np.maximum(np.abs(c), np.abs(s))
    return np.stack([c * scale, s * scale], axis=1)


def rect_loop(center, half, angles: np.ndarray) -> np.ndarray:
    """Boundary points of a rectangle (possibly off-center) hit by rays from
    the origin at the given angles; the origin must lie strictly inside."""
    cx, cy = float(center[0]), float(center[1])
    hx, hy = float(half[0]), float(half[1])
    if not (abs(cx) < hx and abs(cy) < hy):
        raise InvalidArgumentError("origin must lie inside the rectangle")
    pts = []
    for a in np.asarray(angles, dtype=np.float64):
        dx, dy = np.cos(a), np.sin(a)
        t = np.inf
        if dx > 1e-15:
            t = min(t, (cx + hx) / dx)
        elif dx < -1e-15:
            t = min(t, (cx - hx) / dx)
        if dy > 1e-15:
            t = min(t, (cy + hy) / dy)
        elif dy < -1e-15:
            t = min(t, (cy - hy) / dy)
        pts.append([t * dx, t * dy])
    return np.asarray(pts)


def circle_loop(radius: float, n: int, phase: float = 0.0) -> np.ndarray:
    angles = phase + np.arange(n) * (2 * np.pi / n)
    return radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def cross_loop(arm_half_length: float, arm_half_width: float) -> np.ndarray:
    """CCW outline of a plus-shaped keyway, 12 vertices."""
    l, w = arm_half_length, arm_half_width
    if not l > w > 0:
        raise InvalidArgumentError("cross needs arm_half_length > arm_half_width > 0")
    return np.array(
        [
            [l, -w], [l, w], [w, w], [w, l], [-w, l], [-w, w],
            [-l, w], [-l, -w], [-w, -w], [-w, -l], [w, -l], [w, -w],
        ],
        dtype=np.float64,
    )


def loop_angles(loop: np.ndarray) -> np.ndarray:
    return np.arctan2(loop[:, 1], loop[:, 0])


def plate_with_hole(
    outer: np.ndarray, inner: np.ndarray, z0: float, z1: float
) -> np.ndarray:
    """Closed extruded plate between two CCW loops with matched vertex counts.

    Both loops must be star-shaped around the origin and angularly aligned
    index-by-index (pair inner vertices with outer samples at the same ray
    angles) so the ring quads between them do not fold.
    """
    outer = np.asarray(outer, dtype=np.float64)
    inner = np.asarray(inner, dtype=np.float64)
    if outer.shape != inner.shape or outer.ndim != 2 or outer.shape[1] != 2:
        raise InvalidArgumentError("loops must be matching (n, 2) arrays")
    if not z1 > z0:
        raise InvalidArgumentError("need z1 > z0")
    n = outer.shape[0]

    def lift(loop2d: np.ndarray, z: float) -> np.ndarray:
        return np.column_stack([loop2d, np.full(n, z)])

    ob, ot = lift(outer, z0), lift(outer, z1)
    ib, it = lift(inner, z0), lift(inner, z1)
    tris: list[np.ndarray] = []
    for i in range(n):
        j = (i + 1) % n
        # top ring (+z out)
        tris.append(np.array([ot[i], ot[j], it[j]]))
        tris.append(np.array([ot[i], it[j], it[i]]))
        # bottom ring (-z out)
        tris.append(np.array([ob[j], ob[i], ib[i]]))
        tris.append(np.array([ob[j], ib[i], ib[j]]))
        # outer wall
        tris.append(np.array([ob[i], ob[j], ot[j]]))
        tris.append(np.array([ob[i], ot[j], ot[i]]))
        # inner wall (faces the hole)
        tris.append(np.array([ib[j], ib[i], it[i]]))
        tris.append(np.array([ib[j], it[i], it[j]]))
    return np.array(tris)


def square_hole_plate(
    outer_half: float, hole_half: float, z0: float, z1: float
) -> np.ndarray:
    if not outer_half > hole_half > 0:
        raise InvalidArgumentError("need outer_half > hole_half > 0")
    angles = loop_angles(
        np.array([[1, -1], [1, 1], [-1, 1], [-1, -1]], dtype=np.float64)
    )
    outer = square_loop(outer_half, angles)
    inner = square_loop(hole_half, angles)
    return plate_with_hole(outer, inner, z0, z1)


def round_hole_plate(
    outer_half: float, hole_radius: float, z0: float, z1: float, segments: int = 16
) -> np.ndarray:
    if not outer_half > hole_radius > 0:
        raise InvalidArgumentError("need outer_half > hole_radius > 0")
    inner = circle_loop(hole_radius, segments, phase=np.pi / segments)
    outer = square_loop(outer_half, loop_angles(inner))
    return plate_with_hole(outer, inner, z0, z1)


def cross_hole_plate(
    outer_half: float,
    arm_half_length: float,
    arm_half_width: float,
    z0: float,
    z1: float,
) -> np.ndarray:
    if not outer_half > arm_half_length:
        raise InvalidArgumentError("plate must extend past the keyway arms")
    inner = cross_loop(arm_half_length, arm_half_width)
    outer = square_loop(outer_half, loop_angles(inner))
    return plate_with_hole(outer, inner, z0, z1)


def l_loop(arm_length: float, arm_width: float, inset: float = 0.0) -> np.ndarray:
    """CCW L-shaped outline, kernel-centered so ray pairing from the origin
    works; a positive inset shrinks every edge inward by that amount."""
    b, a, c = arm_length, arm_width, inset
    if not b > a > 2 * c >= 0:
        raise InvalidArgumentError("need arm_length > arm_width > 2*inset >= 0")
    raw = np.array(
        [
            [c, c], [b - c, c], [b - c, a - c],
            [a - c, a - c], [a - c, b - c], [c, b - c],
        ],
        dtype=np.float64,
    )
    return raw - np.array([a / 2.0, a / 2.0])


def extruded_polygon(loop: np.ndarray, z0: float, z1: float) -> np.ndarray:
    """Closed prism over a CCW polygon star-shaped around its kernel point.

    Caps are fanned from the loop's vertex mean, so the loop must see that
    point (true for all loops produced in this module).
    """
    loop = np.asarray(loop, dtype=np.float64)
    if loop.ndim != 2 or loop.shape[1] != 2 or loop.shape[0] < 3:
        raise InvalidArgumentError("loop must be (n>=3, 2)")
    if not z1 > z0:
        raise InvalidArgumentError("need z1 > z0")
    n = loop.shape[0]
    center = loop.mean(axis=0)
    tris: list[np.ndarray] = []
    c_top = np.array([center[0], center[1], z1])
    c_bot = np.array([center[0], center[1], z0])
    for i in range(n):
        j = (i + 1) % n
        vi_t = np.array([loop[i, 0], loop[i, 1], z1])
        vj_t = np.array([loop[j, 0], loop[j, 1], z1])
        vi_b = np.array([loop[i, 0], loop[i, 1], z0])
        vj_b = np.array([loop[j, 0], loop[j, 1], z0])
        tris.append(np.array([c_top, vi_t, vj_t]))  # +z cap
        tris.append(np.array([c_bot, vj_b, vi_b]))  # -z cap
        tris.append(np.array([vi_b, vj_b, vj_t]))  # wall
        tris.append(np.array([vi_b, vj_t, vi_t]))
    return np.array(tris)


def merge_meshes(*meshes: np.ndarray) -> np.ndarray:
    return np.concatenate([np.asarray(m, dtype=np.float64) for m in meshes])


def triangle_areas(mesh: np.ndarray) -> np.ndarray:
    e1 = mesh[:, 1] - mesh[:, 0]
    e2 = mesh[:, 2] - mesh[:, 0]
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)


def sample_surface(mesh: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """n points drawn area-uniformly from the mesh surface (deterministic
    given the generator state)."""
    mesh = np.asarray(mesh, dtype=np.float64)
    if mesh.ndim != 3 or mesh.shape[0] == 0 or n <= 0:
        raise InvalidArgumentError("need a non-empty mesh and n > 0")
    areas = triangle_areas(mesh)
    probs = areas / areas.sum()
    tri_idx = rng.choice(mesh.shape[0], size=n, p=probs)
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    tris = mesh[tri_idx]
    return (
        tris[:, 0]
        + u[:, None] * (tris[:, 1] - tris[:, 0])
        + v[:, None] * (tris[:, 2] - tris[:, 0])
    )
