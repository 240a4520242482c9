"""On-disk formats, normalization, trajectory classification, and splits.

An assembly record lives in its own directory: ``record.json`` holds ids,
categories, and the normalization transform; point clouds sit next to it
as binary ``.apc`` files and meshes as OBJ, both referenced by relative
path. Plans (ground truth or predicted) use a JSON envelope listing parts
in assembly order with one ``[w, x, y, z, tx, ty, tz]`` row per time step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidArgumentError, InvalidGeometryError, ParseError
from .geometry import (
    DEFAULT_T,
    PartGeometry,
    Pose,
    Trajectory,
    apply_pose,
    load_obj,
    load_point_cloud,
    save_obj,
    save_point_cloud,
)
from . import quaternions as quat
from .plan import AssemblyPlan

CATEGORIES = ("stationary", "translational", "rotational", "insertion", "insert+rotate")

MIN_PARTS = 2
MAX_PARTS = 20


@dataclass(frozen=True)
class NormalizationTransform:
    """Uniform scale + center shift mapping raw coordinates to normalized."""

    scale: float
    center: tuple[float, float, float]

    def __post_init__(self):
        if not self.scale > 0:
            raise InvalidArgumentError("scale must be positive")


@dataclass(frozen=True)
class AssemblyRecord:
    id: str
    parts: Mapping[int, PartGeometry]
    gt_plan: AssemblyPlan
    normalization: NormalizationTransform | None = None
    category_tags: Mapping[int, str] | None = None

    def __post_init__(self):
        parts = dict(self.parts)
        n = len(parts)
        if not MIN_PARTS <= n <= MAX_PARTS:
            raise InvalidArgumentError(f"part count {n} outside [{MIN_PARTS}, {MAX_PARTS}]")
        self.gt_plan.validate(parts)
        if set(self.gt_plan.order) != set(parts):
            raise InvalidArgumentError("gt plan must cover every part exactly once")
        m_counts = {p.num_points for p in parts.values()}
        if len(m_counts) != 1:
            raise InvalidArgumentError(f"parts must share one cloud size, got {m_counts}")
        if self.category_tags is not None:
            bad = set(self.category_tags.values()) - set(CATEGORIES)
            if bad:
                raise InvalidArgumentError(f"unknown categories: {sorted(bad)}")
            object.__setattr__(self, "category_tags", dict(self.category_tags))
        object.__setattr__(self, "parts", parts)

    @property
    def num_parts(self) -> int:
        return len(self.parts)

    def assembled_cloud(self) -> np.ndarray:
        finals = self.gt_plan.final_poses()
        return np.concatenate(
            [apply_pose(finals[pid], self.parts[pid].points) for pid in sorted(self.parts)]
        )


def bounding_sphere(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Deterministic enclosing sphere (Ritter's construction)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise InvalidArgumentError("need a non-empty point set")
    x = pts[0]
    y = pts[np.argmax(np.linalg.norm(pts - x, axis=1))]
    z = pts[np.argmax(np.linalg.norm(pts - y, axis=1))]
    center = 0.5 * (y + z)
    radius = 0.5 * float(np.linalg.norm(y - z))
    for p in pts:
        d = float(np.linalg.norm(p - center))
        if d > radius:
            new_radius = 0.5 * (radius + d)
            center = center + (p - center) * ((d - radius) / (2.0 * d))
            radius = new_radius
    return center, radius


def _scale_pose(pose: Pose, scale: float, center: np.ndarray) -> Pose:
    return Pose(pose.rotation, (pose.translation - center) * scale)


def _scale_plan(plan: AssemblyPlan, scale: float, center: np.ndarray) -> AssemblyPlan:
    return AssemblyPlan(
        plan.order,
        tuple(
            Trajectory(t.part_id, tuple(_scale_pose(p, scale, center) for p in t.poses))
            for t in plan.trajectories
        ),
    )


def normalize(record: AssemblyRecord) -> AssemblyRecord:
    """Rescale so the assembled union has bounding-sphere diameter 1 at origin.

    Part-local geometry scales about the local origin and pose translations
    absorb the center shift, so the same world points map consistently. The
    stored transform composes with any previous normalization.
    """
    cloud = record.assembled_cloud()
    center, radius = bounding_sphere(cloud)
    if radius <= 0:
        raise InvalidGeometryError("assembly has zero extent, cannot normalize")
    scale = 1.0 / (2.0 * radius)
    parts = {
        pid: PartGeometry(pid, part.mesh * scale, part.points * scale)
        for pid, part in record.parts.items()
    }
    plan = _scale_plan(record.gt_plan, scale, center)
    prev = record.normalization
    if prev is None:
        combined = NormalizationTransform(scale, tuple(float(c) for c in center))
    else:
        # total: x -> scale * (prev.scale * (x - prev.center) - center)
        combined = NormalizationTransform(
            prev.scale * scale,
            tuple(
                float(pc + c / prev.scale)
                for pc, c in zip(prev.center, center)
            ),
        )
    return replace(record, parts=parts, gt_plan=plan, normalization=combined)


def denormalize(record: AssemblyRecord) -> AssemblyRecord:
    """Invert the stored normalization, restoring original coordinates."""
    if record.normalization is None:
        return record
    scale = record.normalization.scale
    center = np.asarray(record.normalization.center)
    parts = {
        pid: PartGeometry(pid, part.mesh / scale, part.points / scale)
        for pid, part in record.parts.items()
    }
    plan = AssemblyPlan(
        record.gt_plan.order,
        tuple(
            Trajectory(
                t.part_id,
                tuple(Pose(p.rotation, p.translation / scale + center) for p in t.poses),
            )
            for t in record.gt_plan.trajectories
        ),
    )
    return replace(record, parts=parts, gt_plan=plan, normalization=None)


# ---------------------------------------------------------------------------
# trajectory classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassifyThresholds:
    """Category cutoffs in normalized units / radians."""

    stationary_translation: float = 0.01
    stationary_rotation: float = np.deg2rad(2.0)
    min_rotation: float = np.deg2rad(30.0)
    min_insertion_translation: float = 0.25
    max_insertion_lateral: float = 0.05


def classify_trajectory(
    traj: Trajectory, thresholds: ClassifyThresholds = ClassifyThresholds()
) -> str:
    """Assign one motion category with deterministic precedence
    (insert+rotate > insertion > rotational > translational > stationary)."""
    ts = traj.translations()
    qs = traj.rotations()
    path_length = float(np.sum(np.linalg.norm(np.diff(ts, axis=0), axis=1)))
    total_rotation = float(
        sum(quat.geodesic_angle(a, b) for a, b in zip(qs[:-1], qs[1:]))
    )
    net = ts[-1] - ts[0]
    net_len = float(np.linalg.norm(net))
    rel = ts - ts[0]
    if net_len > 1e-12:
        unit = net / net_len
        lateral = float(np.max(np.linalg.norm(rel - np.outer(rel @ unit, unit), axis=1)))
    else:
        lateral = float(np.max(np.linalg.norm(rel, axis=1))) if len(ts) else 0.0

    rotational = total_rotation >= thresholds.min_rotation
    insertion = (
        net_len >= thresholds.min_insertion_translation
        and lateral <= thresholds.max_insertion_lateral
    )
    if insertion and rotational:
        return "insert+rotate"
    if insertion:
        return "insertion"
    if rotational:
        return "rotational"
    if (
        path_length < thresholds.stationary_translation
        and total_rotation < thresholds.stationary_rotation
    ):
        return "stationary"
    return "translational"


# ---------------------------------------------------------------------------
# dataset splitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.8
    val: float = 0.1
    test: float = 0.1
    seed: int = 0

    def __post_init__(self):
        total = self.train + self.val + self.test
        if abs(total - 1.0) > 1e-9:
            raise InvalidArgumentError(f"fractions must sum to 1, got {total}")
        if min(self.train, self.val, self.test) < 0:
            raise InvalidArgumentError("fractions must be non-negative")


def split(ids: Sequence[str], spec: SplitSpec = SplitSpec()) -> dict[str, list[str]]:
    """Seeded shuffle then contiguous slicing; disjoint and exhaustive."""
    ids = list(ids)
    rng = np.random.default_rng(spec.seed)
    shuffled = [ids[i] for i in rng.permutation(len(ids))]
    n = len(ids)
    n_train = int(np.floor(spec.train * n))
    n_val = int(np.floor(spec.val * n))
    return {
        "train": shuffled[:n_train],
        "val": shuffled[n_train : n_train + n_val],
        "test": shuffled[n_train + n_val :],
    }


# ---------------------------------------------------------------------------
# plan (trajectory file) serialization
# ---------------------------------------------------------------------------


def plan_to_dict(plan: AssemblyPlan, assembly_id: str = "") -> dict:
    return {
        "assembly_id": assembly_id,
        "T": plan.t_len,
        "parts": [
            {
                "part_id": t.part_id,
                "poses": [
                    [*map(float, p.rotation), *map(float, p.translation)]
                    for p in t.poses
                ],
            }
            for t in plan.trajectories
        ],
    }


def plan_from_dict(data: Mapping) -> tuple[AssemblyPlan, str]:
    try:
        t_len = int(data["T"])
        entries = data["parts"]
        order = []
        trajectories = []
        for entry in entries:
            pid = int(entry["part_id"])
            rows = entry["poses"]
            if len(rows) != t_len:
                raise InvalidArgumentError(
                    f"part {pid}: expected {t_len} poses, found {len(rows)}"
                )
            poses = tuple(
                Pose(np.asarray(row[:4], dtype=np.float64), np.asarray(row[4:7], dtype=np.float64))
                for row in rows
            )
            order.append(pid)
            trajectories.append(Trajectory(pid, poses))
        return AssemblyPlan(tuple(order), tuple(trajectories)), str(data.get("assembly_id", ""))
    except (KeyError, TypeError, IndexError) as exc:
        raise ParseError(f"malformed plan payload: {exc!r}") from exc


def save_plan(path, plan: AssemblyPlan, assembly_id: str = "") -> None:
    Path(path).write_text(
        json.dumps(plan_to_dict(plan, assembly_id), indent=1), encoding="utf-8"
    )


def load_plan(path) -> tuple[AssemblyPlan, str]:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return plan_from_dict(data)


# ---------------------------------------------------------------------------
# record directory layout
# ---------------------------------------------------------------------------


def save_record(directory, record: AssemblyRecord) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "clouds").mkdir(exist_ok=True)
    (directory / "meshes").mkdir(exist_ok=True)
    part_entries = []
    for pid in sorted(record.parts):
        part = record.parts[pid]
        cloud_rel = f"clouds/part_{pid:03d}.apc"
        mesh_rel = f"meshes/part_{pid:03d}.obj"
        save_point_cloud(directory / cloud_rel, part.points)
        save_obj(directory / mesh_rel, part.mesh)
        entry = {"part_id": pid, "cloud": cloud_rel, "mesh": mesh_rel}
        if record.category_tags and pid in record.category_tags:
            entry["category"] = record.category_tags[pid]
        part_entries.append(entry)
    save_plan(directory / "gt_plan.json", record.gt_plan, record.id)
    meta = {
        "id": record.id,
        "T": record.gt_plan.t_len,
        "parts": part_entries,
        "gt_plan": "gt_plan.json",
    }
    if record.normalization is not None:
        meta["normalization"] = {
            "scale": record.normalization.scale,
            "center": list(record.normalization.center),
        }
    (directory / "record.json").write_text(json.dumps(meta, indent=1), encoding="utf-8")
    return directory / "record.json"


def load_record(directory) -> AssemblyRecord:
    directory = Path(directory)
    meta_path = directory / "record.json"
    if not meta_path.exists():
        raise ParseError(f"{meta_path}: not found")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{meta_path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    parts = {}
    categories = {}
    for entry in meta["parts"]:
        pid = int(entry["part_id"])
        # point clouds are stored as float32; meshes round-trip through text
        points = load_point_cloud(directory / entry["cloud"])
        mesh = load_obj(directory / entry["mesh"])
        parts[pid] = PartGeometry(pid, mesh, points)
        if "category" in entry:
            categories[pid] = entry["category"]
    plan, _ = load_plan(directory / meta["gt_plan"])
    norm = None
    if "normalization" in meta:
        norm = NormalizationTransform(
            float(meta["normalization"]["scale"]),
            tuple(float(c) for c in meta["normalization"]["center"]),
        )
    return AssemblyRecord(
        id=str(meta["id"]),
        parts=parts,
        gt_plan=plan,
        normalization=norm,
        category_tags=categories or None,
    )


def list_record_dirs(dataset_dir) -> list[Path]:
    root = Path(dataset_dir)
    if not root.exists():
        raise InvalidArgumentError(f"dataset directory {root} does not exist")
    return sorted(p.parent for p in root.glob("*/record.json"))
