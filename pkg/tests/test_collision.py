from __future__ import annotations

import numpy as np
import pytest

from asmkit.collision import (
    StaticBody,
    closest_points_on_triangles,
    collide,
    collide_points,
    max_penetration,
    ray_parity_inside,
    signed_distances,
)
from asmkit.errors import InvalidArgumentError
from asmkit.geometry import PartGeometry, Pose
from asmkit.meshes import (
    box_mesh,
    cross_hole_plate,
    round_hole_plate,
    sample_surface,
    square_hole_plate,
)

from conftest import box_part, make_pose

THICKNESS = 1e-5


@pytest.fixture
def unit_cube_body():
    part = box_part(0, center=(0, 0, 0), half=(0.5, 0.5, 0.5), n_points=32)
    return StaticBody.create(part, make_pose())


class TestClosestPoint:
    def test_point_above_face(self):
        tris = box_mesh((0, 0, 0), (1, 1, 1))
        d, closest, _ = closest_points_on_triangles(np.array([[0.2, -0.3, 2.0]]), tris)
        assert d[0] == pytest.approx(1.0)
        np.testing.assert_allclose(closest[0], [0.2, -0.3, 1.0], atol=1e-12)

    def test_point_near_edge_and_corner(self):
        tris = box_mesh((0, 0, 0), (1, 1, 1))
        d, _, _ = closest_points_on_triangles(np.array([[2.0, 2.0, 0.0]]), tris)
        assert d[0] == pytest.approx(np.sqrt(2))
        d, _, _ = closest_points_on_triangles(np.array([[2.0, 2.0, 2.0]]), tris)
        assert d[0] == pytest.approx(np.sqrt(3))

    def test_matches_scalar_reference(self, rng):
        # brute scalar recomputation over vertices/edges/face candidates
        tri = rng.normal(size=(1, 3, 3))
        pts = rng.normal(size=(40, 3))
        d, closest, _ = closest_points_on_triangles(pts, tri)
        a, b, c = tri[0]
        for k, p in enumerate(pts):
            candidates = []
            # dense barycentric sweep as an independent oracle
            for u in np.linspace(0, 1, 60):
                for v in np.linspace(0, 1 - u, 60):
                    q = a + u * (b - a) + v * (c - a)
                    candidates.append(np.linalg.norm(p - q))
            assert d[k] <= min(candidates) + 1e-9


class TestRayParity:
    def test_cube_inside_outside(self):
        tris = box_mesh((0, 0, 0), (0.5, 0.5, 0.5))
        pts = np.array(
            [[0, 0, 0], [0.49, 0.49, 0.49], [0.51, 0, 0], [2, 2, 2], [0, 0, -0.499]]
        , dtype=float)
        inside = ray_parity_inside(pts, tris)
        assert inside.tolist() == [True, True, False, False, True]

    def test_plate_hole_is_outside(self):
        tris = square_hole_plate(0.5, 0.1, -0.1, 0.1)
        pts = np.array(
            [[0.0, 0.0, 0.0], [0.3, 0.0, 0.0], [0.05, 0.0, 0.0], [0.3, 0.3, 0.2]]
        )
        inside = ray_parity_inside(pts, tris)
        # hole center and a point within the hole radius are outside material
        assert inside.tolist() == [False, True, False, False]

    def test_round_and_cross_plates(self):
        round_tris = round_hole_plate(0.5, 0.15, -0.05, 0.05)
        cross_tris = cross_hole_plate(0.5, 0.2, 0.06, -0.05, 0.05)
        assert not ray_parity_inside(np.array([[0.0, 0.0, 0.0]]), round_tris)[0]
        assert ray_parity_inside(np.array([[0.3, 0.3, 0.0]]), round_tris)[0]
        # inside a cross arm is hole; between arms is material
        assert not ray_parity_inside(np.array([[0.15, 0.0, 0.0]]), cross_tris)[0]
        assert ray_parity_inside(np.array([[0.15, 0.15, 0.0]]), cross_tris)[0]


class TestSignedDistance:
    def test_cube_center(self, unit_cube_body):
        sd, n = signed_distances(np.array([[0.0, 0.0, 0.0]]), unit_cube_body)
        assert sd[0] == pytest.approx(-0.5)
        # normal points toward (any) nearest face
        assert np.abs(n[0]).max() == pytest.approx(1.0)

    def test_outside_point(self, unit_cube_body):
        sd, n = signed_distances(np.array([[1.5, 0.0, 0.0]]), unit_cube_body)
        assert sd[0] == pytest.approx(1.0)
        np.testing.assert_allclose(n[0], [1, 0, 0], atol=1e-12)

    def test_gradient_direction_increases_sd(self, unit_cube_body, rng):
        pts = rng.uniform(-0.8, 0.8, size=(50, 3))
        sd, n = signed_distances(pts, unit_cube_body)
        eps = 1e-6
        sd2, _ = signed_distances(pts + eps * n, unit_cube_body)
        assert np.all(sd2 >= sd - 1e-9)


class TestCollide:
    def test_far_part_no_contacts(self, unit_cube_body):
        mover = box_part(1, center=(0, 0, 0), half=(0.1, 0.1, 0.1), n_points=16)
        contacts = collide(mover, make_pose(t=(3, 0, 0)), [unit_cube_body], THICKNESS)
        assert len(contacts) == 0
        assert contacts.max_depth == 0.0

    def test_center_point_depth(self, unit_cube_body):
        contacts = collide_points(
            np.array([[0.0, 0.0, 0.0]]), [unit_cube_body], THICKNESS
        )
        assert len(contacts) == 1
        assert contacts.depths[0] == pytest.approx(0.5 + THICKNESS)

    def test_surface_point_depth(self, unit_cube_body):
        contacts = collide_points(
            np.array([[0.5, 0.0, 0.0]]), [unit_cube_body], THICKNESS
        )
        assert len(contacts) == 1
        assert contacts.depths[0] == pytest.approx(THICKNESS, abs=1e-12)

    def test_adhesion_band(self, unit_cube_body):
        pts = np.array([[0.5 + 5e-4, 0.0, 0.0]])
        assert len(collide_points(pts, [unit_cube_body], THICKNESS)) == 0
        with_band = collide_points(pts, [unit_cube_body], THICKNESS, adhesion=1e-3)
        assert len(with_band) == 1
        assert with_band.depths[0] < 0  # attraction zone, not penetration

    def test_max_penetration(self, unit_cube_body):
        mover = PartGeometry(
            1, np.empty((0, 3, 3)), np.array([[0.0, 0.0, 0.0], [0.3, 0.0, 0.0]])
        )
        pen = max_penetration(mover, make_pose(), [unit_cube_body], THICKNESS)
        assert pen == pytest.approx(0.5 + THICKNESS)

    def test_static_needs_mesh(self):
        bare = PartGeometry(0, np.empty((0, 3, 3)), np.array([[0.0, 0.0, 0.0]]))
        with pytest.raises(InvalidArgumentError):
            StaticBody.create(bare, make_pose())


class TestMeshClosedness:
    @pytest.mark.parametrize(
        "mesh",
        [
            box_mesh((0, 0, 0), (0.3, 0.2, 0.1)),
            square_hole_plate(0.5, 0.12, -0.06, 0.06),
            round_hole_plate(0.5, 0.12, -0.06, 0.06),
            cross_hole_plate(0.5, 0.2, 0.07, -0.06, 0.06),
        ],
    )
    def test_every_edge_shared_twice(self, mesh):
        # closed orientable surface: each directed edge appears exactly once
        edges = {}
        verts = mesh.round(9)
        for tri in verts:
            for i in range(3):
                e = (tuple(tri[i]), tuple(tri[(i + 1) % 3]))
                edges[e] = edges.get(e, 0) + 1
        for (a, b), count in edges.items():
            assert count == 1
            assert edges.get((b, a), 0) == 1

    def test_sampled_points_near_surface(self, rng):
        mesh = square_hole_plate(0.5, 0.12, -0.06, 0.06)
        pts = sample_surface(mesh, 200, rng)
        d, _, _ = closest_points_on_triangles(pts, mesh)
        assert d.max() < 1e-9
