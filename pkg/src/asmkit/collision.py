"""Point-cloud vs triangle-mesh contact queries.

Signed distance is nearest-triangle distance with the sign decided by
ray-parity containment, so it is exact for closed, consistently oriented
meshes. Queries are vectorized over (point, triangle) pairs with an AABB
prefilter; the synthetic meshes in this toolkit are low-poly, so no
hierarchy is needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError
from .geometry import Aabb, PartGeometry, Pose, apply_pose

# Fixed generic ray direction for parity tests; not aligned with any face of
# axis-aligned geometry so edge-grazing double counts cannot occur.
_RAY_DIR = np.array([0.2766478924203583, 0.8973466536229734, 0.3436673825980103])
_RAY_DIR /= np.linalg.norm(_RAY_DIR)

_PARALLEL_EPS = 1e-12


@dataclass(frozen=True)
class StaticBody:
    """A frozen part posed in world coordinates, ready for contact queries."""

    part: PartGeometry
    pose: Pose
    triangles: np.ndarray  # (n, 3, 3) world space
    face_normals: np.ndarray  # (n, 3) unit, outward for CCW meshes
    aabb: Aabb

    @staticmethod
    def create(part: PartGeometry, pose: Pose) -> "StaticBody":
        if part.mesh.shape[0] == 0:
            raise InvalidArgumentError(
                f"part {part.part_id} has no mesh; static bodies need one"
            )
        tris = apply_pose(pose, part.mesh.reshape(-1, 3)).reshape(-1, 3, 3)
        e1 = tris[:, 1] - tris[:, 0]
        e2 = tris[:, 2] - tris[:, 0]
        normals = np.cross(e1, e2)
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        verts = tris.reshape(-1, 3)
        box = Aabb(verts.min(axis=0), verts.max(axis=0))
        tris.flags.writeable = False
        normals.flags.writeable = False
        return StaticBody(part, pose, tris, normals, box)


def closest_points_on_triangles(
    points: np.ndarray, triangles: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """For each point: distance, closest point, and index of nearest triangle.

    Vectorized form of the standard closest-point-on-triangle region tests.
    """
    p = np.asarray(points, dtype=np.float64)[:, None, :]  # (P,1,3)
    a = triangles[None, :, 0, :]
    b = triangles[None, :, 1, :]
    c = triangles[None, :, 2, :]
    ab = b - a
    ac = c - a
    ap = p - a

    d1 = np.einsum("ptk,ptk->pt", np.broadcast_arrays(ab, ap)[0], ap)
    d2 = np.einsum("ptk,ptk->pt", np.broadcast_arrays(ac, ap)[0], ap)

    bp = p - b
    d3 = np.einsum("ptk,ptk->pt", np.broadcast_arrays(ab, bp)[0], bp)
    d4 = np.einsum("ptk,ptk->pt", np.broadcast_arrays(ac, bp)[0], bp)

    cp = p - c
    d5 = np.einsum("ptk,ptk->pt", np.broadcast_arrays(ab, cp)[0], cp)
    d6 = np.einsum("ptk,ptk->pt", np.broadcast_arrays(ac, cp)[0], cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = np.where(d1 - d3 != 0.0, d1 / (d1 - d3), 0.0)
        w_ac = np.where(d2 - d6 != 0.0, d2 / (d2 - d6), 0.0)
        denom_bc = (d4 - d3) + (d5 - d6)
        w_bc = np.where(denom_bc != 0.0, (d4 - d3) / denom_bc, 0.0)
        denom_face = va + vb + vc
        v_face = np.where(denom_face != 0.0, vb / denom_face, 0.0)
        w_face = np.where(denom_face != 0.0, vc / denom_face, 0.0)

    # Region selection, first match wins (same precedence as the scalar code).
    in_a = (d1 <= 0) & (d2 <= 0)
    in_b = (d3 >= 0) & (d4 <= d3)
    in_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    in_c = (d6 >= 0) & (d5 <= d6)
    in_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    in_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)

    closest = a + v_face[..., None] * ab + w_face[..., None] * ac
    closest = np.where(in_bc[..., None], b + w_bc[..., None] * (c - b), closest)
    closest = np.where(in_ac[..., None], a + w_ac[..., None] * ac, closest)
    closest = np.where(in_c[..., None], np.broadcast_arrays(c, closest)[0], closest)
    closest = np.where(in_ab[..., None], a + v_ab[..., None] * ab, closest)
    closest = np.where(in_b[..., None], np.broadcast_arrays(b, closest)[0], closest)
    closest = np.where(in_a[..., None], np.broadcast_arrays(a, closest)[0], closest)

    delta = p - closest
    dist_sq = np.einsum("ptk,ptk->pt", delta, delta)
    idx = np.argmin(dist_sq, axis=1)
    rows = np.arange(p.shape[0])
    best = closest[rows, idx]
    return np.sqrt(dist_sq[rows, idx]), best, idx


def ray_parity_inside(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """True where a point lies inside the closed mesh (odd crossing parity)."""
    p = np.asarray(points, dtype=np.float64)
    a = triangles[:, 0]
    e1 = triangles[:, 1] - a
    e2 = triangles[:, 2] - a
    h = np.cross(_RAY_DIR, e2)  # (T,3)
    det = np.einsum("tk,tk->t", e1, h)
    ok = np.abs(det) > _PARALLEL_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(ok, 1.0 / det, 0.0)
    s = p[:, None, :] - a[None, :, :]  # (P,T,3)
    u = np.einsum("ptk,tk->pt", s, h) * inv
    q = np.cross(s, e1[None, :, :])
    v = np.einsum("ptk,k->pt", q, _RAY_DIR) * inv
    t = np.einsum("ptk,tk->pt", q, e2) * inv
    hits = ok[None, :] & (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (u + v <= 1.0) & (t > 1e-12)
    return (hits.sum(axis=1) % 2).astype(bool)


def signed_distances(
    points: np.ndarray, body: StaticBody
) -> tuple[np.ndarray, np.ndarray]:
    """Signed distance and outward gradient direction for each query point.

    Negative values are inside the mesh; the returned unit vector points in
    the direction of increasing signed distance (out of the body).
    """
    pts = np.asarray(points, dtype=np.float64)
    dist, closest, tri_idx = closest_points_on_triangles(pts, body.triangles)
    inside = ray_parity_inside(pts, body.triangles)
    sd = np.where(inside, -dist, dist)
    delta = pts - closest
    normals = np.zeros_like(delta)
    nz = dist > 1e-12
    normals[nz] = delta[nz] / dist[nz, None]
    normals[inside] = -normals[inside]
    on_surface = ~nz
    if np.any(on_surface):
        normals[on_surface] = body.face_normals[tri_idx[on_surface]]
    return sd, normals


@dataclass(frozen=True)
class ContactSet:
    """Active contacts of a moving cloud against a set of static bodies."""

    point_indices: np.ndarray  # (c,) index into the moving cloud
    static_indices: np.ndarray  # (c,) index into the statics list
    positions: np.ndarray  # (c,3) world positions of the contact points
    normals: np.ndarray  # (c,3) outward from the static body
    depths: np.ndarray  # (c,) thickness - signed_distance

    def __len__(self) -> int:
        return int(self.point_indices.shape[0])

    @property
    def max_depth(self) -> float:
        return float(self.depths.max()) if len(self) else 0.0


_EMPTY = ContactSet(
    np.empty(0, dtype=np.int64),
    np.empty(0, dtype=np.int64),
    np.empty((0, 3)),
    np.empty((0, 3)),
    np.empty(0),
)


def _aabb_distances(points: np.ndarray, box: Aabb) -> np.ndarray:
    clamped = np.clip(points, box.min, box.max)
    return np.linalg.norm(points - clamped, axis=1)


def collide_points(
    points_world: np.ndarray,
    statics: Sequence[StaticBody],
    thickness: float,
    adhesion: float = 0.0,
) -> ContactSet:
    """Contacts where signed distance < thickness (+ adhesion band).

    Depth is thickness - signed_distance: positive once the point crosses
    the contact shell, in (-adhesion, 0] inside the attraction band.
    """
    pts = np.asarray(points_world, dtype=np.float64)
    reach = thickness + adhesion
    pi_chunks: list[np.ndarray] = []
    si_chunks: list[np.ndarray] = []
    pos_chunks: list[np.ndarray] = []
    n_chunks: list[np.ndarray] = []
    d_chunks: list[np.ndarray] = []
    for s_idx, body in enumerate(statics):
        near = np.nonzero(_aabb_distances(pts, body.aabb) < reach)[0]
        if near.size == 0:
            continue
        sd, normals = signed_distances(pts[near], body)
        active = sd < reach
        if not np.any(active):
            continue
        sel = near[active]
        pi_chunks.append(sel)
        si_chunks.append(np.full(sel.shape[0], s_idx, dtype=np.int64))
        pos_chunks.append(pts[sel])
        n_chunks.append(normals[active])
        d_chunks.append(thickness - sd[active])
    if not pi_chunks:
        return _EMPTY
    return ContactSet(
        np.concatenate(pi_chunks),
        np.concatenate(si_chunks),
        np.concatenate(pos_chunks),
        np.concatenate(n_chunks),
        np.concatenate(d_chunks),
    )


def collide(
    part: PartGeometry,
    pose: Pose,
    statics: Sequence[StaticBody],
    thickness: float,
    adhesion: float = 0.0,
) -> ContactSet:
    """Contacts of a part's posed surface cloud against the static bodies."""
    return collide_points(apply_pose(pose, part.points), statics, thickness, adhesion)


def max_penetration(
    part: PartGeometry, pose: Pose, statics: Sequence[StaticBody], thickness: float
) -> float:
    """Deepest contact depth of the posed part, 0 when contact-free."""
    return collide(part, pose, statics, thickness).max_depth
