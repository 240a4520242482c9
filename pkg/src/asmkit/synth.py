"""Procedural desk-scale assemblies standing in for a real dataset.

Four instance kinds cover the motion categories: box stacks
(translational/stationary), pegs in square or round plate holes
(insertion), L-profile blocks in matching L-slots (insertion with an
asymmetric profile), and twist-lock bayonets whose lug only passes the
keyed plate after a quarter-ish turn (insert+rotate; only force+torque
probes can disassemble them).

Ground-truth plans come from the disassembly planner and every record is
verified by a full simulator rollout before it is emitted: generation
fails rather than producing a record whose own plan does not assemble.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import (
    AssemblyRecord,
    ClassifyThresholds,
    classify_trajectory,
    normalize,
)
from .errors import GenerationFailedError, InvalidArgumentError, PlanningInfeasibleError, PlanningTimeoutError
from .geometry import DEFAULT_T, PartGeometry, Pose
from .meshes import (
    box_mesh,
    cross_hole_plate,
    extruded_polygon,
    l_loop,
    merge_meshes,
    round_hole_plate,
    sample_surface,
    square_hole_plate,
)
from .metrics import DEFAULT_CD_THRESHOLD, per_part_chamfer
from .planners import PlannerBudget, disassembly_plan
from .simulator import SimConfig, step_by_step_evaluate

KINDS = ("stack", "peg-in-hole", "l-slot", "bayonet")


@dataclass(frozen=True)
class SynthParams:
    m_points: int = 256
    t_len: int = DEFAULT_T
    clearance: float = 0.012
    n_stack: int = 3
    hole: str = "square"  # or "round", for peg-in-hole
    probe_duration: float = 2.0
    verify: bool = True

    def __post_init__(self):
        if self.m_points < 8:
            raise InvalidArgumentError("m_points must be >= 8 for stable dynamics")
        if self.t_len < 2:
            raise InvalidArgumentError("t_len must be >= 2")
        if not 2 <= self.n_stack <= 8:
            raise InvalidArgumentError("n_stack must lie in [2, 8]")
        if self.hole not in ("square", "round"):
            raise InvalidArgumentError(f"unknown hole shape {self.hole!r}")


def _part_from_world_mesh(
    pid: int, mesh: np.ndarray, m_points: int, rng: np.random.Generator
) -> tuple[PartGeometry, Pose]:
    """Recenter the authored world mesh at its sampled centroid.

    The part-local origin coincides with the cloud centroid, so commanded
    rotations pivot about the center of mass and the final pose is a pure
    translation. Clouds are quantized to float32 up front so the on-disk
    format round-trips bit-exactly.
    """
    cloud = sample_surface(mesh, m_points, rng)
    centroid = cloud.mean(axis=0)
    local = (cloud - centroid).astype("<f4").astype(np.float64)
    part = PartGeometry(pid, mesh - centroid, local)
    return part, Pose(translation=centroid)


def _build_stack(params: SynthParams, rng: np.random.Generator):
    gap = 1e-4
    parts = {}
    poses = {}
    z = 0.0
    for pid in range(params.n_stack):
        half = np.array(
            [
                0.32 - 0.06 * pid + rng.uniform(-0.01, 0.01),
                0.30 - 0.06 * pid + rng.uniform(-0.01, 0.01),
                0.08 + rng.uniform(0.0, 0.02),
            ]
        )
        mesh = box_mesh((0.0, 0.0, z + half[2]), half)
        parts[pid], poses[pid] = _part_from_world_mesh(pid, mesh, params.m_points, rng)
        z += 2 * half[2] + gap
    return parts, poses


def _offset_plate(inner_loop: np.ndarray, plate_center, plate_half, z0, z1) -> np.ndarray:
    """Plate with the hole at the origin and the slab deliberately
    off-center, so the assembly's center of mass sits away from the
    insertion axis (this is what defeats radial-retraction baselines)."""
    from .meshes import loop_angles, plate_with_hole, rect_loop

    outer = rect_loop(plate_center, plate_half, loop_angles(inner_loop))
    return plate_with_hole(outer, inner_loop, z0, z1)


def _build_peg_in_hole(params: SynthParams, rng: np.random.Generator):
    plate_center = (-0.10, -0.06)
    plate_half = (0.42, 0.40)
    plate_th = 0.16
    hole_half = 0.11 + rng.uniform(0.0, 0.02)
    peg_len = 0.55
    c = params.clearance
    z0 = -plate_th / 2 - 0.06
    if params.hole == "square":
        from .meshes import loop_angles, square_loop

        angles = loop_angles(
            np.array([[1, -1], [1, 1], [-1, 1], [-1, -1]], dtype=np.float64)
        )
        inner = square_loop(hole_half, angles)
        peg_half = hole_half - c
        peg_mesh = box_mesh(
            (0.0, 0.0, z0 + peg_len / 2), (peg_half, peg_half, peg_len / 2)
        )
    else:
        from .meshes import circle_loop

        inner = circle_loop(hole_half, 16, phase=np.pi / 16)
        peg_loop = circle_loop(hole_half - c, 16, phase=np.pi / 16)
        peg_mesh = extruded_polygon(peg_loop, z0, z0 + peg_len)
    plate_mesh = _offset_plate(inner, plate_center, plate_half, -plate_th / 2, plate_th / 2)
    parts = {}
    poses = {}
    parts[0], poses[0] = _part_from_world_mesh(0, peg_mesh, params.m_points, rng)
    parts[1], poses[1] = _part_from_world_mesh(1, plate_mesh, params.m_points, rng)
    return parts, poses


def _build_l_slot(params: SynthParams, rng: np.random.Generator):
    plate_center = (-0.09, -0.07)
    plate_half = (0.44, 0.42)
    plate_th = 0.16
    arm_len = 0.30
    arm_width = 0.14
    c = params.clearance
    hole_loop = l_loop(arm_len, arm_width, inset=0.0)
    plate_mesh = _offset_plate(
        hole_loop, plate_center, plate_half, -plate_th / 2, plate_th / 2
    )
    block_loop = l_loop(arm_len, arm_width, inset=c)
    z0 = -plate_th / 2 - 0.05
    block_mesh = extruded_polygon(block_loop, z0, z0 + 0.5)
    parts = {}
    poses = {}
    parts[0], poses[0] = _part_from_world_mesh(0, block_mesh, params.m_points, rng)
    parts[1], poses[1] = _part_from_world_mesh(1, plate_mesh, params.m_points, rng)
    return parts, poses


def _build_bayonet(params: SynthParams, rng: np.random.Generator):
    plate_center = (-0.08, -0.05)
    plate_half = (0.34, 0.32)
    plate_th = 0.10
    arm_half_len = 0.17
    arm_half_width = 0.07  # generous angular slack keeps the twist escape clean
    shaft_half = 0.030
    lug_half_len = 0.13
    lug_half_width = 0.024
    lug_half_h = 0.035
    cap_half = 0.085
    cap_half_h = 0.03
    from .meshes import cross_loop

    inner = cross_loop(arm_half_len, arm_half_width)
    plate_mesh = _offset_plate(inner, plate_center, plate_half, -plate_th / 2, plate_th / 2)

    # peg authored in the assembled state and rotated 45 degrees: the lug
    # then sits under solid plate material between the keyway arms (blocks
    # pull-out) while the cap above the plate blocks push-through; only a
    # quarter-turn twist aligned with the arms frees it.
    lug_top = -plate_th / 2 - 0.012
    cap_bottom = plate_th / 2 + 0.012
    shaft = box_mesh(
        (0, 0, (lug_top + cap_bottom) / 2),
        (shaft_half, shaft_half, (cap_bottom - lug_top) / 2),
    )
    lug = box_mesh((0, 0, lug_top - lug_half_h), (lug_half_len, lug_half_width, lug_half_h))
    cap = box_mesh((0, 0, cap_bottom + cap_half_h), (cap_half, cap_half, cap_half_h))
    peg_mesh = merge_meshes(shaft, lug, cap)
    rot45 = np.array(
        [[np.cos(np.pi / 4), -np.sin(np.pi / 4)], [np.sin(np.pi / 4), np.cos(np.pi / 4)]]
    )
    xy = peg_mesh[:, :, :2] @ rot45.T
    peg_mesh = np.concatenate([xy, peg_mesh[:, :, 2:]], axis=2)
    parts = {}
    poses = {}
    parts[0], poses[0] = _part_from_world_mesh(0, peg_mesh, params.m_points, rng)
    parts[1], poses[1] = _part_from_world_mesh(1, plate_mesh, params.m_points, rng)
    return parts, poses


_BUILDERS = {
    "stack": _build_stack,
    "peg-in-hole": _build_peg_in_hole,
    "l-slot": _build_l_slot,
    "bayonet": _build_bayonet,
}


def synth_generate(
    kind: str,
    params: SynthParams = SynthParams(),
    seed: int = 0,
    config: SimConfig = SimConfig(),
    budget: PlannerBudget = PlannerBudget(timeout=120.0),
) -> AssemblyRecord:
    """Generate one verified, normalized assembly record.

    The ground-truth plan is produced by the disassembly planner on the
    authored geometry, the record is normalized to the unit-diameter
    sphere, and (unless params.verify is off) the plan is rolled out
    step-by-step: every part must land within the part-accuracy chamfer
    threshold or generation fails.
    """
    if kind not in _BUILDERS:
        raise InvalidArgumentError(f"unknown kind {kind!r}; expected one of {KINDS}")
    if params.clearance <= 2 * config.thickness:
        raise InvalidArgumentError("clearance must exceed 2 * contact thickness")
    rng = np.random.default_rng(seed)
    parts, poses = _BUILDERS[kind](params, rng)

    try:
        plan = disassembly_plan(
            parts,
            poses,
            config=config,
            budget=budget,
            t_len=params.t_len,
            probe_duration=params.probe_duration,
        )
    except (PlanningInfeasibleError, PlanningTimeoutError) as exc:
        raise GenerationFailedError(f"{kind} seed {seed}: planner failed: {exc}") from exc

    record = AssemblyRecord(
        id=f"{kind}-{seed:04d}",
        parts=parts,
        gt_plan=plan,
        category_tags=None,
    )
    record = normalize(record)
    # re-quantize after rescaling so saved clouds round-trip bit-exactly
    record = AssemblyRecord(
        id=record.id,
        parts={
            pid: PartGeometry(pid, p.mesh, p.points.astype("<f4").astype(np.float64))
            for pid, p in record.parts.items()
        },
        gt_plan=record.gt_plan,
        normalization=record.normalization,
    )

    tags = {
        t.part_id: classify_trajectory(t, ClassifyThresholds())
        for t in record.gt_plan.trajectories
    }
    record = AssemblyRecord(
        id=record.id,
        parts=record.parts,
        gt_plan=record.gt_plan,
        normalization=record.normalization,
        category_tags=tags,
    )

    if params.verify:
        evaluation = step_by_step_evaluate(record.gt_plan, record.parts, config)
        cds = per_part_chamfer(
            evaluation.executed_final_poses(),
            record.gt_plan.final_poses(),
            record.parts,
        )
        failing = {pid: cd for pid, cd in cds.items() if cd >= DEFAULT_CD_THRESHOLD}
        if failing:
            raise GenerationFailedError(
                f"{kind} seed {seed}: GT rollout misplaces parts {failing}"
            )
    return record
