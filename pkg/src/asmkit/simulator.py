"""Frictionless-by-default penalty-contact rigid-body rollout.

Implements the velocity-control evaluation protocol: each trajectory
waypoint interval sets the moving part's linear and angular velocity, then
the state integrates through ``substeps`` equal sub-intervals of
semi-implicit Euler. Contact with frozen static parts applies penalty
forces (elastic ``ke`` on depth, damping ``kd`` on normal approach speed,
optional viscous/Coulomb friction ``kf``/``mu``, adhesion within ``ka``).
Static parts never move during a rollout.

Mass model: every surface sample point carries ``density`` mass units, so a
part with M points has mass density*M and a point-mass inertia tensor about
its centroid. Contact forces are averaged over the active contact points,
which keeps the effective contact stiffness at ``ke`` regardless of how
many samples touch, and makes the default configuration (substeps=60,
ke=1e5, kd=1e3) stable for clouds of 8+ points. Velocities are control
signals: in free space nothing alters them, so commanded trajectories are
reproduced to machine precision; gyroscopic wobble is intentionally not
modeled. Everything is deterministic: fixed iteration order, no seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from . import quaternions as quat
from .collision import ContactSet, StaticBody, collide_points
from .errors import InvalidArgumentError, SimulationDivergedError
from .geometry import PartGeometry, Pose, Trajectory, pose_interpolation_velocity
from .plan import AssemblyPlan

_SPEED_LIMIT = 1e6


@dataclass(frozen=True)
class SimConfig:
    """Simulator parameter set; defaults mirror the evaluation configuration."""

    gravity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    substeps: int = 60
    ka: float = 0.0
    kd: float = 1000.0
    ke: float = 100000.0
    kf: float = 0.0
    mu: float = 0.0
    restitution: float = 0.0  # accepted for completeness; damping handles impact loss
    thickness: float = 1e-5
    dt: float = 1.0
    density: float = 1.0

    def __post_init__(self):
        if self.substeps < 1:
            raise InvalidArgumentError("substeps must be >= 1")
        if self.ke < 0 or self.kd < 0 or self.kf < 0 or self.mu < 0 or self.ka < 0:
            raise InvalidArgumentError("contact stiffnesses must be >= 0")
        if not self.dt > 0:
            raise InvalidArgumentError("dt must be positive")
        if not self.density > 0:
            raise InvalidArgumentError("density must be positive")
        g = np.asarray(self.gravity, dtype=np.float64)
        if g.shape != (3,) or not np.all(np.isfinite(g)):
            raise InvalidArgumentError("gravity must be a finite 3-vector")
        object.__setattr__(self, "gravity", tuple(float(x) for x in g))

    def with_overrides(self, values: Mapping[str, float]) -> "SimConfig":
        known = set(self.__dataclass_fields__)
        unknown = set(values) - known
        if unknown:
            raise InvalidArgumentError(f"unknown simulator keys: {sorted(unknown)}")
        coerced: dict = {}
        for k, v in values.items():
            if k == "gravity":
                coerced[k] = tuple(float(x) for x in v)  # type: ignore[arg-type]
            elif k == "substeps":
                coerced[k] = int(v)
            else:
                coerced[k] = float(v)
        return replace(self, **coerced)


@dataclass(frozen=True)
class SimScene:
    """Frozen statics at their poses plus the single controlled moving part."""

    static_parts: tuple[tuple[PartGeometry, Pose], ...]
    moving_part: PartGeometry
    initial_pose: Pose

    def __post_init__(self):
        statics = tuple(self.static_parts)
        ids = [p.part_id for p, _ in statics]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError(f"duplicate static part ids: {ids}")
        if self.moving_part.part_id in ids:
            raise InvalidArgumentError(
                f"moving part {self.moving_part.part_id} also appears as a static"
            )
        object.__setattr__(self, "static_parts", statics)

    def static_bodies(self) -> list[StaticBody]:
        return [StaticBody.create(p, pose) for p, pose in self.static_parts]


@dataclass(frozen=True)
class VelocityProgram:
    """T-1 commanded (linear, angular) velocity pairs for one trajectory."""

    linear: np.ndarray  # (T-1, 3)
    angular: np.ndarray  # (T-1, 3)

    def __post_init__(self):
        lin = np.asarray(self.linear, dtype=np.float64)
        ang = np.asarray(self.angular, dtype=np.float64)
        if lin.ndim != 2 or lin.shape[1] != 3 or lin.shape != ang.shape:
            raise InvalidArgumentError("velocity program needs matching (T-1, 3) arrays")
        if not (np.all(np.isfinite(lin)) and np.all(np.isfinite(ang))):
            raise InvalidArgumentError("velocity program contains non-finite values")
        lin = lin.copy()
        ang = ang.copy()
        lin.flags.writeable = False
        ang.flags.writeable = False
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "angular", ang)

    def __len__(self) -> int:
        return int(self.linear.shape[0])

    @staticmethod
    def from_trajectory(traj: Trajectory, dt: float) -> "VelocityProgram":
        if len(traj) < 2:
            raise InvalidArgumentError("need at least two poses to derive velocities")
        pairs = [
            pose_interpolation_velocity(a, b, dt)
            for a, b in zip(traj.poses[:-1], traj.poses[1:])
        ]
        return VelocityProgram(
            np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])
        )


@dataclass(frozen=True)
class RolloutResult:
    executed: Trajectory
    contact_events: int
    max_penetration: float


@dataclass
class _RigidState:
    """Mutable integration state; the pose anchor is the part-frame origin."""

    t: np.ndarray
    q: np.ndarray
    v: np.ndarray  # velocity of the pose anchor
    w: np.ndarray  # angular velocity
    local_points: np.ndarray
    local_centroid: np.ndarray
    mass: float
    inertia_body: np.ndarray

    @property
    def pose(self) -> Pose:
        return Pose(self.q, self.t)

    def world_points(self) -> np.ndarray:
        return self.local_points @ quat.to_matrix(self.q).T + self.t

    def world_centroid(self) -> np.ndarray:
        return quat.rotate(self.q, self.local_centroid) + self.t

    def inertia_world_inv(self) -> np.ndarray:
        r = quat.to_matrix(self.q)
        return r @ np.linalg.inv(self.inertia_body) @ r.T


def _point_mass_inertia(points: np.ndarray, centroid: np.ndarray, density: float) -> np.ndarray:
    r = points - centroid
    sq = np.einsum("ij,ij->i", r, r)
    inertia = density * (np.eye(3) * sq.sum() - r.T @ r)
    # floor the eigenvalues so flat/degenerate clouds stay invertible
    vals, vecs = np.linalg.eigh(inertia)
    floor = max(vals.max() * 1e-6, 1e-12)
    return (vecs * np.maximum(vals, floor)) @ vecs.T


def _make_state(part: PartGeometry, pose: Pose, config: SimConfig) -> _RigidState:
    mass = config.density * part.num_points
    inertia = _point_mass_inertia(part.points, part.centroid, config.density)
    return _RigidState(
        t=pose.translation.copy(),
        q=pose.rotation.copy(),
        v=np.zeros(3),
        w=np.zeros(3),
        local_points=part.points,
        local_centroid=part.centroid.copy(),
        mass=mass,
        inertia_body=inertia,
    )


def _normal_terms(
    state: _RigidState, contacts: ContactSet, config: SimConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-contact normal forces plus point velocities and normal speeds."""
    n = contacts.normals
    lever_anchor = contacts.positions - state.t
    point_vel = state.v + np.cross(state.w, lever_anchor)
    v_n = np.einsum("ij,ij->i", n, point_vel)
    f_n = config.ke * contacts.depths - config.kd * v_n
    if config.ka == 0.0:
        f_n = np.maximum(f_n, 0.0)
    return f_n, point_vel, v_n


def _per_contact_forces(
    state: _RigidState, contacts: ContactSet, config: SimConfig
) -> np.ndarray:
    """Raw per-contact normal penalty forces, shape (c, 3)."""
    f_n, _, _ = _normal_terms(state, contacts, config)
    return f_n[:, None] * contacts.normals


def _contact_wrench(
    state: _RigidState, contacts: ContactSet, config: SimConfig, h: float
) -> tuple[np.ndarray, np.ndarray]:
    """Contact force and torque about the centroid.

    Normal penalty forces are averaged over the contact points so the
    effective stiffness stays ke regardless of sampling density; friction
    tractions sum over the contact patch (per point capped by the Coulomb
    cone mu * f_n), with the total tangential impulse clamped so one
    substep cannot reverse the mean sliding motion.
    """
    f_n, point_vel, v_n = _normal_terms(state, contacts, config)
    n = contacts.normals
    normal_forces = f_n[:, None] * n
    centroid = state.world_centroid()
    levers = contacts.positions - centroid
    scale = 1.0 / len(contacts)
    force = normal_forces.sum(axis=0) * scale
    torque = np.cross(levers, normal_forces).sum(axis=0) * scale

    if config.kf > 0.0 or config.mu > 0.0:
        v_t = point_vel - v_n[:, None] * n
        speed_t = np.linalg.norm(v_t, axis=1)
        moving = speed_t > 1e-12
        if np.any(moving):
            magnitude = np.minimum(
                config.kf * speed_t[moving],
                config.mu * np.maximum(f_n[moving], 0.0),
            )
            friction = np.zeros_like(v_t)
            friction[moving] = -(magnitude / speed_t[moving])[:, None] * v_t[moving]
            f_total = friction.sum(axis=0)
            f_norm = float(np.linalg.norm(f_total))
            if f_norm > 0.0:
                mean_speed = float(speed_t[moving].mean())
                damp = min(1.0, state.mass * mean_speed / (h * f_norm))
                force = force + damp * f_total
                torque = torque + damp * np.cross(levers, friction).sum(axis=0)
    return force, torque


def _integrate_substeps(
    state: _RigidState,
    statics: Sequence[StaticBody],
    config: SimConfig,
    n_substeps: int,
    substep_offset: int,
    on_substep: Callable | None = None,
) -> tuple[int, float]:
    """Advance the state; returns (contact substep count, max depth seen)."""
    h = config.dt / config.substeps
    gravity = np.asarray(config.gravity)
    contact_events = 0
    max_depth = 0.0
    for s in range(n_substeps):
        contacts = collide_points(
            state.world_points(), statics, config.thickness, config.ka
        )
        if len(contacts):
            max_depth = max(max_depth, contacts.max_depth)
            force, torque = _contact_wrench(state, contacts, config, h)
            if np.any(force != 0.0) or np.any(torque != 0.0):
                contact_events += 1
            centroid_offset = state.world_centroid() - state.t
            dw = h * (state.inertia_world_inv() @ torque)
            dv_c = h * force / state.mass
            state.w = state.w + dw
            state.v = state.v + dv_c - np.cross(dw, centroid_offset)
        state.v = state.v + h * gravity
        state.t = state.t + h * state.v
        state.q = quat.normalize(quat.multiply(quat.from_rotation_vector(state.w * h), state.q))
        if not (
            np.all(np.isfinite(state.t))
            and np.all(np.isfinite(state.q))
            and np.linalg.norm(state.v) < _SPEED_LIMIT
        ):
            raise SimulationDivergedError(
                "rollout state became non-finite", substep_offset + s
            )
        if on_substep is not None:
            on_substep(substep_offset + s, state, contacts)
    return contact_events, max_depth


def rollout(
    scene: SimScene,
    program: VelocityProgram,
    config: SimConfig = SimConfig(),
    on_substep: Callable | None = None,
) -> RolloutResult:
    """Execute a velocity program against the scene's frozen statics.

    Pose k of the result is sampled after the k-th waypoint interval, so the
    executed trajectory has len(program) + 1 poses, starting at the scene's
    initial pose.
    """
    statics = scene.static_bodies()
    state = _make_state(scene.moving_part, scene.initial_pose, config)
    executed = [scene.initial_pose]
    events = 0
    max_depth = 0.0
    for k in range(len(program)):
        state.v = program.linear[k].copy()
        state.w = program.angular[k].copy()
        ev, depth = _integrate_substeps(
            state, statics, config, config.substeps, k * config.substeps, on_substep
        )
        events += ev
        max_depth = max(max_depth, depth)
        executed.append(state.pose)
    return RolloutResult(
        Trajectory(scene.moving_part.part_id, tuple(executed)), events, max_depth
    )


@dataclass(frozen=True)
class StepResult:
    part_id: int
    executed: Trajectory
    contact_events: int
    max_penetration: float


@dataclass(frozen=True)
class SimEvaluation:
    """Executed trajectories of a full step-by-step plan execution."""

    steps: tuple[StepResult, ...] = field(default_factory=tuple)

    def executed_by_id(self) -> dict[int, Trajectory]:
        return {s.part_id: s.executed for s in self.steps}

    def executed_final_poses(self) -> dict[int, Pose]:
        return {s.part_id: s.executed.final for s in self.steps}


def step_by_step_evaluate(
    plan: AssemblyPlan,
    parts: Mapping[int, PartGeometry],
    config: SimConfig = SimConfig(),
) -> SimEvaluation:
    """Roll out each step of the plan in its predicted order.

    Statics for step i are the previously processed parts frozen at their
    *predicted* final poses; the moving part starts at the first pose of its
    predicted trajectory and is driven by that trajectory's velocities.
    """
    plan.validate(set(parts))
    placed: list[tuple[PartGeometry, Pose]] = []
    steps: list[StepResult] = []
    for step_idx, pid in enumerate(plan.order):
        traj = plan.trajectory_for(pid)
        scene = SimScene(tuple(placed), parts[pid], traj.first)
        program = VelocityProgram.from_trajectory(traj, config.dt)
        try:
            result = rollout(scene, program, config)
        except SimulationDivergedError as exc:
            raise SimulationDivergedError(
                f"step {step_idx} (part {pid}) diverged", exc.substep
            ) from exc
        steps.append(
            StepResult(pid, result.executed, result.contact_events, result.max_penetration)
        )
        placed.append((parts[pid], traj.final))
    return SimEvaluation(tuple(steps))


def resolve_penetrations(
    final_poses: Mapping[int, Pose],
    parts: Mapping[int, PartGeometry],
    config: SimConfig = SimConfig(),
    max_time: float = 2.0,
) -> tuple[dict[int, Pose], bool]:
    """Let every part float freely until interpenetrations separate.

    All parts are dynamic with zero commanded velocity; pairwise penalty
    forces push overlapping parts apart, with an ambient velocity drag
    (rate kd/mass) so the scene settles. Returns the settled poses and
    whether the deepest contact reached the thickness shell within
    max_time.
    """
    if set(final_poses) - set(parts):
        raise InvalidArgumentError("pose ids missing from parts")
    ids = sorted(final_poses)
    if not ids:
        return {}, True
    states = {pid: _make_state(parts[pid], final_poses[pid], config) for pid in ids}
    h = config.dt / config.substeps
    steps_budget = max(1, int(round(max_time / h)))
    converged = False
    worst = 0.0
    for step in range(steps_budget):
        bodies = {
            pid: StaticBody.create(parts[pid], states[pid].pose) for pid in ids
        }
        forces = {pid: np.zeros(3) for pid in ids}
        torques = {pid: np.zeros(3) for pid in ids}
        worst = 0.0
        for pid in ids:
            others = [oid for oid in ids if oid != pid]
            if not others:
                continue
            contacts = collide_points(
                states[pid].world_points(),
                [bodies[oid] for oid in others],
                config.thickness,
                config.ka,
            )
            if not len(contacts):
                continue
            worst = max(worst, contacts.max_depth)
            per_point = _per_contact_forces(states[pid], contacts, config) / len(contacts)
            centroid = states[pid].world_centroid()
            forces[pid] += per_point.sum(axis=0)
            torques[pid] += np.cross(contacts.positions - centroid, per_point).sum(axis=0)
            # equal and opposite reaction on the touched parts
            for local_idx, oid in enumerate(others):
                mask = contacts.static_indices == local_idx
                if not np.any(mask):
                    continue
                forces[oid] -= per_point[mask].sum(axis=0)
                arm = contacts.positions[mask] - states[oid].world_centroid()
                torques[oid] += np.cross(arm, -per_point[mask]).sum(axis=0)
        if worst <= config.thickness and step > 0:
            converged = True
            break
        drag = float(np.exp(-h * config.kd / next(iter(states.values())).mass))
        for pid in ids:
            st = states[pid]
            dw = h * (st.inertia_world_inv() @ torques[pid])
            dv_c = h * forces[pid] / st.mass
            st.w = (st.w + dw) * drag
            st.v = (st.v + dv_c - np.cross(dw, st.world_centroid() - st.t)) * drag
            st.t = st.t + h * st.v
            st.q = quat.normalize(
                quat.multiply(quat.from_rotation_vector(st.w * h), st.q)
            )
            if not (np.all(np.isfinite(st.t)) and np.all(np.isfinite(st.q))):
                raise SimulationDivergedError("settle state became non-finite", step)
    else:
        # ran the full budget; converged only if the last pass was clean
        converged = worst <= config.thickness
    return {pid: states[pid].pose for pid in ids}, converged
