"""Non-neural trajectory generators.

* assembly-by-disassembly: depth-first search over removal order; each
  candidate part is pushed with constant forces along its principal axes
  (optionally paired with a torque about the same axis, which covers
  insert-and-rotate parts) inside the contact simulator until it
  disassociates from the rest. Reversing both the removal order and each
  escape path yields the assembly plan.
* straight-line heuristic: retract each part from the assembly's center of
  mass by half its bounding-box diagonal, no rotation.
* RRT / RRT-Connect over SE(3) with wall-clock budgets, goal biasing, and
  strict rejection of interpenetrating goal states.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import quaternions as quat
from .collision import StaticBody, collide_points, max_penetration
from .errors import (
    GoalInCollisionError,
    InvalidArgumentError,
    PlanningInfeasibleError,
    PlanningTimeoutError,
    SimulationDivergedError,
)
from .geometry import (
    DEFAULT_T,
    Aabb,
    PartGeometry,
    Pose,
    Trajectory,
    apply_pose,
    bbox_diagonal,
    bbox_of,
    interpolate_pose,
)
from .plan import AssemblyPlan
from .simulator import SimConfig, _integrate_substeps, _make_state

#: Disassociation margin as a fraction of the assembly diagonal.
AABB_INFLATION = 0.05


@dataclass(frozen=True)
class PlannerBudget:
    timeout: float = 60.0
    max_iterations: int = 100000

    def __post_init__(self):
        if not self.timeout > 0:
            raise InvalidArgumentError("timeout must be positive")
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be >= 1")


class _BudgetClock:
    def __init__(self, budget: PlannerBudget):
        self.budget = budget
        self.start = time.monotonic()
        self.iterations = 0

    def tick(self, partial=None):
        self.iterations += 1
        if self.iterations > self.budget.max_iterations:
            raise PlanningTimeoutError(
                f"iteration budget {self.budget.max_iterations} exhausted", partial
            )
        if time.monotonic() - self.start > self.budget.timeout:
            raise PlanningTimeoutError(
                f"timeout {self.budget.timeout}s exceeded", partial
            )

    def expired(self) -> bool:
        return (
            self.iterations > self.budget.max_iterations
            or time.monotonic() - self.start > self.budget.timeout
        )


# ---------------------------------------------------------------------------
# pose-path resampling shared by all planners
# ---------------------------------------------------------------------------


def resample_path(poses: Sequence[Pose], t_len: int, rotation_weight: float) -> list[Pose]:
    """Arc-length resample a pose path to exactly t_len poses.

    Path length mixes translation and rotation: |dt| + w_r * angle. The
    first and last poses are preserved exactly.
    """
    if t_len < 2:
        raise InvalidArgumentError("t_len must be >= 2")
    if len(poses) == 1:
        return [poses[0]] * t_len
    seg = np.array(
        [
            np.linalg.norm(b.translation - a.translation)
            + rotation_weight * quat.geodesic_angle(a.rotation, b.rotation)
            for a, b in zip(poses[:-1], poses[1:])
        ]
    )
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total <= 1e-15:
        return [poses[0]] * (t_len - 1) + [poses[-1]]
    out: list[Pose] = [poses[0]]
    for j in range(1, t_len - 1):
        target = total * j / (t_len - 1)
        idx = int(np.searchsorted(cum, target, side="right") - 1)
        idx = min(idx, len(seg) - 1)
        u = (target - cum[idx]) / seg[idx] if seg[idx] > 0 else 0.0
        out.append(interpolate_pose(poses[idx], poses[idx + 1], u))
    out.append(poses[-1])
    return out


# ---------------------------------------------------------------------------
# assembly by disassembly
# ---------------------------------------------------------------------------


def principal_axes(points: np.ndarray) -> np.ndarray:
    """Rows are unit principal directions, largest variance first.

    Signs are fixed so the largest-magnitude component of each axis is
    positive, keeping probe order deterministic.
    """
    centered = points - points.mean(axis=0)
    cov = centered.T @ centered
    _, vecs = np.linalg.eigh(cov)  # ascending
    axes = vecs.T[::-1]
    out = []
    for axis in axes:
        lead = np.argmax(np.abs(axis))
        out.append(-axis if axis[lead] < 0 else axis)
    return np.array(out)


def _union_aabb(parts: Mapping[int, PartGeometry], poses: Mapping[int, Pose], ids) -> Aabb:
    boxes = [bbox_of(apply_pose(poses[pid], parts[pid].points)) for pid in ids]
    box = boxes[0]
    for other in boxes[1:]:
        box = box.union(other)
    return box


def _simulate_escape(
    part: PartGeometry,
    start: Pose,
    statics: list[StaticBody],
    force: np.ndarray,
    torque: np.ndarray,
    config: SimConfig,
    free_box: Aabb,
    max_substeps: int,
) -> list[Pose] | None:
    """Push a part with a constant wrench until its AABB leaves free_box.

    Returns the pose trace on success (including the start pose), None if
    the part stays associated or the integration blows up.
    """
    state = _make_state(part, start, config)
    h = config.dt / config.substeps
    inv_inertia = state.inertia_world_inv()
    trace = [start]
    for step in range(max_substeps):
        # constant probe wrench, then one contact substep
        centroid_offset = state.world_centroid() - state.t
        dw = h * (inv_inertia @ torque)
        dv = h * force / state.mass
        state.w = state.w + dw
        state.v = state.v + dv - np.cross(dw, centroid_offset)
        try:
            _integrate_substeps(state, statics, config, 1, step)
        except SimulationDivergedError:
            return None
        inv_inertia = state.inertia_world_inv()
        if step % 5 == 4 or step == max_substeps - 1:
            trace.append(state.pose)
            posed = bbox_of(state.world_points())
            if not posed.intersects(free_box):
                return trace
    return None


def disassembly_plan(
    parts: Mapping[int, PartGeometry],
    final_poses: Mapping[int, Pose],
    config: SimConfig = SimConfig(),
    budget: PlannerBudget = PlannerBudget(),
    t_len: int = DEFAULT_T,
    probe_duration: float = 2.0,
    use_torque_probes: bool = True,
) -> AssemblyPlan:
    """Plan assembly order and trajectories by searching for a disassembly.

    Depth-first over removal candidates (ascending part id, escape probes
    along principal axes, force-only before force+torque). A part counts as
    disassociated once its AABB separates from the inflated union AABB of
    the remaining parts. The returned plan reverses both the removal order
    and each escape trajectory; the part removed last becomes the first,
    stationary assembly step.
    """
    if set(final_poses) != set(parts) or not parts:
        raise InvalidArgumentError("parts and final_poses must cover the same ids")
    ids = sorted(parts)
    diag = bbox_diagonal(_union_aabb(parts, final_poses, ids))
    if diag <= 0:
        raise InvalidArgumentError("assembly has zero extent")
    clock = _BudgetClock(budget)
    max_substeps = int(round(2.0 * probe_duration * config.substeps / config.dt))
    removal: list[tuple[int, list[Pose] | None]] = []

    def probes_for(pid: int) -> list[tuple[np.ndarray, np.ndarray]]:
        posed = apply_pose(final_poses[pid], parts[pid].points)
        axes = principal_axes(posed)
        state = _make_state(parts[pid], final_poses[pid], config)
        f_mag = 2.0 * state.mass * diag / probe_duration**2
        inertia = quat.to_matrix(final_poses[pid].rotation) @ state.inertia_body @ quat.to_matrix(final_poses[pid].rotation).T
        wrenches: list[tuple[np.ndarray, np.ndarray]] = []
        for axis in axes:
            for sign in (1.0, -1.0):
                wrenches.append((sign * f_mag * axis, np.zeros(3)))
        if use_torque_probes:
            for axis in axes:
                i_axis = float(axis @ inertia @ axis)
                t_mag = 2.0 * np.pi * i_axis / probe_duration**2
                for f_sign in (1.0, -1.0):
                    for t_sign in (1.0, -1.0):
                        wrenches.append(
                            (f_sign * f_mag * axis, t_sign * t_mag * axis)
                        )
        return wrenches

    def dfs(remaining: tuple[int, ...]) -> list[tuple[int, list[Pose] | None]] | None:
        if len(remaining) == 1:
            return [(remaining[0], None)]
        for pid in remaining:
            rest = tuple(i for i in remaining if i != pid)
            free_box = _union_aabb(parts, final_poses, rest).inflated(
                AABB_INFLATION * diag
            )
            statics = [
                StaticBody.create(parts[oid], final_poses[oid]) for oid in rest
            ]
            for force, torque in probes_for(pid):
                clock.tick(partial=list(removal))
                trace = _simulate_escape(
                    parts[pid],
                    final_poses[pid],
                    statics,
                    force,
                    torque,
                    config,
                    free_box,
                    max_substeps,
                )
                if trace is not None:
                    removal.append((pid, trace))
                    tail = dfs(rest)
                    if tail is not None:
                        return [(pid, trace)] + tail
                    removal.pop()
                    break  # escapes exist but the remainder is stuck; try next part
        return None

    sequence = dfs(tuple(ids))
    if sequence is None:
        raise PlanningInfeasibleError(
            "no disassociable part found at some search node"
        )

    w_r = diag / np.pi
    order: list[int] = []
    trajectories: list[Trajectory] = []
    for pid, trace in reversed(sequence):
        order.append(pid)
        if trace is None:
            poses = [final_poses[pid]] * t_len
        else:
            reversed_trace = list(reversed(trace))
            poses = resample_path(reversed_trace, t_len, w_r)
            poses[-1] = final_poses[pid]  # pin the assembled pose exactly
        trajectories.append(Trajectory(pid, tuple(poses)))
    return AssemblyPlan(tuple(order), tuple(trajectories))


# ---------------------------------------------------------------------------
# straight-line baseline
# ---------------------------------------------------------------------------


def heuristic_straightline(
    final_poses: Mapping[int, Pose],
    parts: Mapping[int, PartGeometry],
    assembly_center: np.ndarray | None = None,
    order: Sequence[int] | None = None,
    t_len: int = DEFAULT_T,
) -> AssemblyPlan:
    """Retract each part radially from the assembly center, no rotation.

    The start pose sits half the part's posed bounding-box diagonal away
    from its final pose, along the ray from the assembly's center of mass
    through the part centroid (+z for the degenerate centered part);
    reversing that retraction is the assembly motion.
    """
    if set(final_poses) - set(parts) or not final_poses:
        raise InvalidArgumentError("final_poses ids must be a subset of parts")
    posed_centroids = {
        pid: apply_pose(final_poses[pid], parts[pid].points).mean(axis=0)
        for pid in final_poses
    }
    if assembly_center is None:
        assembly_center = np.mean(list(posed_centroids.values()), axis=0)
    if order is None:
        order = sorted(final_poses)
    trajectories = []
    for pid in order:
        posed = apply_pose(final_poses[pid], parts[pid].points)
        diag = bbox_diagonal(bbox_of(posed))
        direction = posed_centroids[pid] - assembly_center
        norm = float(np.linalg.norm(direction))
        unit = direction / norm if norm > 1e-12 else np.array([0.0, 0.0, 1.0])
        final = final_poses[pid]
        start_t = final.translation + 0.5 * diag * unit
        poses = tuple(
            Pose(
                final.rotation,
                start_t + (final.translation - start_t) * (k / (t_len - 1)),
            )
            for k in range(t_len)
        )
        trajectories.append(Trajectory(pid, poses))
    return AssemblyPlan(tuple(order), tuple(trajectories))


# ---------------------------------------------------------------------------
# RRT / RRT-Connect
# ---------------------------------------------------------------------------


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    u1, u2, u3 = rng.random(3)
    a, b = np.sqrt(1.0 - u1), np.sqrt(u1)
    return np.array(
        [
            a * np.sin(2 * np.pi * u2),
            a * np.cos(2 * np.pi * u2),
            b * np.sin(2 * np.pi * u3),
            b * np.cos(2 * np.pi * u3),
        ]
    )


class _Tree:
    def __init__(self, root: Pose):
        self.poses: list[Pose] = [root]
        self.parents: list[int] = [-1]
        self._translations = [root.translation]
        self._rotations = [root.rotation]

    def add(self, pose: Pose, parent: int) -> int:
        self.poses.append(pose)
        self.parents.append(parent)
        self._translations.append(pose.translation)
        self._rotations.append(pose.rotation)
        return len(self.poses) - 1

    def nearest(self, pose: Pose, w_r: float) -> int:
        ts = np.asarray(self._translations)
        qs = np.asarray(self._rotations)
        d_t = np.linalg.norm(ts - pose.translation, axis=1)
        dots = np.minimum(1.0, np.abs(qs @ pose.rotation))
        return int(np.argmin(d_t + w_r * 2.0 * np.arccos(dots)))

    def path_to_root(self, idx: int) -> list[Pose]:
        out = []
        while idx >= 0:
            out.append(self.poses[idx])
            idx = self.parents[idx]
        return out


def _pose_distance(a: Pose, b: Pose, w_r: float) -> float:
    return float(
        np.linalg.norm(a.translation - b.translation)
        + w_r * quat.geodesic_angle(a.rotation, b.rotation)
    )


def rrt_plan(
    part: PartGeometry,
    start_pose: Pose,
    goal_pose: Pose,
    statics: Sequence[tuple[PartGeometry, Pose]],
    budget: PlannerBudget = PlannerBudget(timeout=5.0),
    connect: bool = False,
    seed: int = 0,
    config: SimConfig = SimConfig(),
    t_len: int = DEFAULT_T,
    goal_bias: float = 0.1,
) -> Trajectory:
    """Sample an SE(3) path from start to goal among frozen statics.

    Collision means penetration beyond the contact thickness. A goal that
    interpenetrates the statics is rejected immediately; running out of
    budget raises a timeout. On success the path is resampled to t_len
    poses ending exactly at the goal.
    """
    bodies = [StaticBody.create(p, pose) for p, pose in statics]
    thickness = config.thickness

    def in_collision(pose: Pose) -> bool:
        return max_penetration(part, pose, bodies, thickness) > thickness

    if in_collision(goal_pose):
        raise GoalInCollisionError("goal pose interpenetrates static geometry")
    if in_collision(start_pose):
        raise InvalidArgumentError("start pose must be collision-free")

    # workspace: statics plus endpoints, inflated so detours around the
    # obstacle boundary stay well inside the sampling region
    box = bbox_of(
        np.array([start_pose.translation, goal_pose.translation])
    )
    for body in bodies:
        box = box.union(body.aabb)
    part_diag = bbox_diagonal(part.aabb)
    box = box.inflated(part_diag + 0.1 * bbox_diagonal(box))
    ws_diag = bbox_diagonal(box)
    w_r = ws_diag / np.pi
    step = ws_diag / 20.0
    goal_tol_t = 0.01 * ws_diag
    goal_tol_r = np.deg2rad(5.0)

    rng = np.random.default_rng(seed)
    clock = _BudgetClock(budget)

    def sample() -> Pose:
        if rng.random() < goal_bias:
            return goal_pose
        t = rng.uniform(box.min, box.max)
        return Pose(_random_rotation(rng), t)

    def edge_free(a: Pose, b: Pose) -> bool:
        dist = _pose_distance(a, b, w_r)
        n_checks = max(1, int(np.ceil(dist / (step / 4.0))))
        for i in range(1, n_checks + 1):
            if in_collision(interpolate_pose(a, b, i / n_checks)):
                return False
        return True

    def free_prefix(a: Pose, b: Pose) -> Pose | None:
        """Farthest collision-free pose along a -> b, None if no advance."""
        dist = _pose_distance(a, b, w_r)
        n_checks = max(1, int(np.ceil(dist / (step / 4.0))))
        last = None
        for i in range(1, n_checks + 1):
            probe = interpolate_pose(a, b, i / n_checks)
            if in_collision(probe):
                break
            last = probe
        return last

    def steer(from_pose: Pose, to_pose: Pose) -> Pose:
        dist = _pose_distance(from_pose, to_pose, w_r)
        if dist <= step:
            return to_pose
        return interpolate_pose(from_pose, to_pose, step / dist)

    def at_goal(pose: Pose, target: Pose) -> bool:
        return (
            np.linalg.norm(pose.translation - target.translation) <= goal_tol_t
            and quat.geodesic_angle(pose.rotation, target.rotation) <= goal_tol_r
        )

    def extend(tree: _Tree, target: Pose) -> tuple[int, Pose] | None:
        idx = tree.nearest(target, w_r)
        new_pose = free_prefix(tree.poses[idx], steer(tree.poses[idx], target))
        if new_pose is None:
            return None
        return tree.add(new_pose, idx), new_pose

    def finish(path: list[Pose]) -> Trajectory:
        if not at_goal(path[-1], goal_pose) or path[-1] is not goal_pose:
            path = path + [goal_pose]
        resampled = resample_path(path, t_len, w_r)
        resampled[0] = start_pose
        resampled[-1] = goal_pose
        return Trajectory(part.part_id, tuple(resampled))

    start_tree = _Tree(start_pose)

    if not connect:
        while True:
            clock.tick()
            added = extend(start_tree, sample())
            if added is None:
                continue
            idx, new_pose = added
            reached = at_goal(new_pose, goal_pose)
            near = _pose_distance(new_pose, goal_pose, w_r) <= 2.0 * step
            if (reached or near) and edge_free(new_pose, goal_pose):
                return finish(list(reversed(start_tree.path_to_root(idx))))
    else:
        goal_tree = _Tree(goal_pose)
        trees = (start_tree, goal_tree)
        swap = False
        while True:
            clock.tick()
            tree_a, tree_b = (trees[1], trees[0]) if swap else trees
            added = extend(tree_a, sample())
            if added is not None:
                idx_a, bridge = added
                # greedily grow the other tree toward the new node
                idx_b = None
                while True:
                    step_added = extend(tree_b, bridge)
                    if step_added is None:
                        break
                    idx_b, pose_b = step_added
                    if at_goal(pose_b, bridge) or _pose_distance(pose_b, bridge, w_r) < 1e-12:
                        break
                    if clock.expired():
                        break
                if idx_b is not None and (
                    _pose_distance(tree_b.poses[idx_b], bridge, w_r) <= step
                ) and edge_free(tree_b.poses[idx_b], bridge):
                    a_path = list(reversed(tree_a.path_to_root(idx_a)))
                    b_path = tree_b.path_to_root(idx_b)
                    if swap:
                        path = list(reversed(b_path)) + list(reversed(a_path))
                    else:
                        path = a_path + b_path
                    return finish(path)
            swap = not swap
