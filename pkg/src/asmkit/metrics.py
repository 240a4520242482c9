"""Evaluation measures for assembly predictions.

Order correlation (Kendall's tau), shape chamfer distance on the assembled
union, part accuracy and success rate at a part-wise chamfer threshold,
per-trajectory average/final chamfer distances, quartile summaries, and the
per-frame translation deviation profile.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .geometry import PartGeometry, Pose, Trajectory, apply_pose, chamfer

#: Part-wise chamfer threshold under which a part counts as correctly placed.
DEFAULT_CD_THRESHOLD = 1e-2


@dataclass(frozen=True)
class PartThreshold:
    cd_threshold: float = DEFAULT_CD_THRESHOLD

    def __post_init__(self):
        if not self.cd_threshold > 0:
            raise InvalidArgumentError("cd_threshold must be positive")


def _check_permutation(order: Sequence[int], name: str) -> np.ndarray:
    arr = np.asarray(order, dtype=np.int64)
    if arr.ndim != 1 or sorted(arr.tolist()) != list(range(arr.shape[0])):
        raise InvalidArgumentError(f"{name} is not a permutation of 0..n-1: {order!r}")
    return arr


def kendall_tau(predicted_order: Sequence[int], gt_order: Sequence[int]) -> float:
    """Rank correlation (concordant - discordant) / (n choose 2).

    Both arguments list part indices in assembly order. Discordant pairs are
    counted as inversions of the predicted sequence re-expressed in
    ground-truth positions (merge-sort count), so the evaluation stays
    O(n log n) and exact.
    """
    pred = _check_permutation(predicted_order, "predicted_order")
    gt = _check_permutation(gt_order, "gt_order")
    n = pred.shape[0]
    if n != gt.shape[0] or n < 2:
        raise InvalidArgumentError("orders must share length n >= 2")
    pos_gt = np.empty(n, dtype=np.int64)
    pos_gt[gt] = np.arange(n)
    seq = pos_gt[pred]
    inversions = _count_inversions(seq.tolist())
    total = n * (n - 1) // 2
    return (total - 2 * inversions) / total


def _count_inversions(seq: list[int]) -> int:
    if len(seq) < 2:
        return 0
    mid = len(seq) // 2
    left, right = seq[:mid], seq[mid:]
    count = _count_inversions(left) + _count_inversions(right)
    merged = []
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            count += len(left) - i
            merged.append(right[j])
            j += 1
    seq[:] = merged + left[i:] + right[j:]
    return count


def _union_cloud(poses: Mapping[int, Pose], parts: Mapping[int, PartGeometry]) -> np.ndarray:
    return np.concatenate(
        [apply_pose(poses[pid], parts[pid].points) for pid in sorted(poses)]
    )


def shape_chamfer(
    pred_final: Mapping[int, Pose],
    gt_final: Mapping[int, Pose],
    parts: Mapping[int, PartGeometry],
) -> float:
    """Chamfer between the assembled unions at predicted vs GT final poses."""
    if set(pred_final) != set(gt_final) or not set(pred_final) <= set(parts):
        raise InvalidArgumentError("predicted/GT/part id sets do not match")
    if not pred_final:
        raise InvalidArgumentError("no parts to evaluate")
    return chamfer(_union_cloud(pred_final, parts), _union_cloud(gt_final, parts))


def per_part_chamfer(
    pred_final: Mapping[int, Pose],
    gt_final: Mapping[int, Pose],
    parts: Mapping[int, PartGeometry],
) -> dict[int, float]:
    """Part-wise chamfer between each part's own predicted vs GT placement."""
    if set(pred_final) != set(gt_final) or not set(pred_final) <= set(parts):
        raise InvalidArgumentError("predicted/GT/part id sets do not match")
    return {
        pid: chamfer(
            apply_pose(pred_final[pid], parts[pid].points),
            apply_pose(gt_final[pid], parts[pid].points),
        )
        for pid in sorted(pred_final)
    }


def part_accuracy(
    per_part_cd: Iterable[float], threshold: PartThreshold = PartThreshold()
) -> float:
    """Fraction of parts with CD strictly below the threshold."""
    cds = np.asarray(list(per_part_cd), dtype=np.float64)
    if cds.size == 0:
        raise InvalidArgumentError("per_part_cd is empty")
    return float(np.count_nonzero(cds < threshold.cd_threshold) / cds.size)


def success_rate(
    per_assembly_cds: Iterable[Iterable[float]],
    threshold: PartThreshold = PartThreshold(),
) -> float:
    """Fraction of assemblies in which every part passes the CD threshold."""
    assemblies = [np.asarray(list(cds), dtype=np.float64) for cds in per_assembly_cds]
    if not assemblies:
        raise InvalidArgumentError("no assemblies to evaluate")
    ok = sum(
        1
        for cds in assemblies
        if cds.size and bool(np.all(cds < threshold.cd_threshold))
    )
    return ok / len(assemblies)


def _per_frame_cds(executed: Trajectory, gt: Trajectory, part: PartGeometry) -> np.ndarray:
    if len(executed) != len(gt):
        raise InvalidArgumentError(
            f"trajectory lengths differ: {len(executed)} vs {len(gt)}"
        )
    return np.array(
        [
            chamfer(apply_pose(pe, part.points), apply_pose(pg, part.points))
            for pe, pg in zip(executed.poses, gt.poses)
        ]
    )


def acd(executed: Trajectory, gt: Trajectory, part: PartGeometry) -> float:
    """Chamfer between executed and GT placements, averaged over all frames."""
    return float(np.mean(_per_frame_cds(executed, gt, part)))


def fcd(executed: Trajectory, gt: Trajectory, part: PartGeometry) -> float:
    """Chamfer between executed and GT placements at the final frame only."""
    if len(executed) != len(gt):
        raise InvalidArgumentError(
            f"trajectory lengths differ: {len(executed)} vs {len(gt)}"
        )
    return chamfer(
        apply_pose(executed.final, part.points), apply_pose(gt.final, part.points)
    )


def quartiles(values: Iterable[float]) -> tuple[float, float, float]:
    """(q25, q50, q75) with linear interpolation between order statistics."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise InvalidArgumentError("cannot take quartiles of an empty list")
    q = np.percentile(arr, [25.0, 50.0, 75.0], method="linear")
    return float(q[0]), float(q[1]), float(q[2])


def deviation_profile(
    executed_set: Sequence[Trajectory],
    predicted_set: Sequence[Trajectory],
    gt_set: Sequence[Trajectory],
) -> dict[str, list[tuple[float, float, float]]]:
    """Per-frame quartiles of translation error against ground truth.

    Computed over all parts, separately for executed and predicted
    trajectories; this is the data behind the frame-vs-error deviation plot.
    """
    if not (len(executed_set) == len(predicted_set) == len(gt_set)) or not gt_set:
        raise InvalidArgumentError("trajectory sets must be non-empty, equal length")
    t_len = len(gt_set[0])
    for traj in (*executed_set, *predicted_set, *gt_set):
        if len(traj) != t_len:
            raise InvalidArgumentError("all trajectories must share T")

    def profile(trajs: Sequence[Trajectory]) -> list[tuple[float, float, float]]:
        errs = np.array(
            [
                np.linalg.norm(t.translations() - g.translations(), axis=1)
                for t, g in zip(trajs, gt_set)
            ]
        )  # (n_parts, T)
        return [quartiles(errs[:, k]) for k in range(t_len)]

    return {"executed": profile(executed_set), "predicted": profile(predicted_set)}


@dataclass(frozen=True)
class MetricsReport:
    """Bundle of all evaluation measures plus the deviation profile."""

    kd: float | None = None
    scd: float | None = None
    pa: float | None = None
    sr: float | None = None
    acd_quartiles: tuple[float, float, float] | None = None
    fcd_quartiles: tuple[float, float, float] | None = None
    deviation_profile: dict[str, list[tuple[float, float, float]]] | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("acd_quartiles", "fcd_quartiles"):
            triple = getattr(self, name)
            if triple is not None and not (triple[0] <= triple[1] <= triple[2]):
                raise InvalidArgumentError(f"{name} must be sorted: {triple}")
        for frac_name in ("pa", "sr"):
            v = getattr(self, frac_name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise InvalidArgumentError(f"{frac_name} must lie in [0, 1], got {v}")

    def to_dict(self) -> dict:
        out: dict = {}
        for key in ("kd", "scd", "pa", "sr"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        for key, triple in (
            ("acd", self.acd_quartiles),
            ("fcd", self.fcd_quartiles),
        ):
            if triple is not None:
                out[f"{key}_q25"], out[f"{key}_q50"], out[f"{key}_q75"] = triple
        if self.deviation_profile is not None:
            out["deviation_profile"] = {
                k: [list(t) for t in v] for k, v in self.deviation_profile.items()
            }
        out.update(self.extra)
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    @staticmethod
    def from_dict(data: Mapping) -> "MetricsReport":
        def triple(prefix: str):
            keys = [f"{prefix}_q25", f"{prefix}_q50", f"{prefix}_q75"]
            if all(k in data for k in keys):
                return tuple(float(data[k]) for k in keys)
            return None

        profile = None
        if "deviation_profile" in data:
            profile = {
                k: [tuple(t) for t in v] for k, v in data["deviation_profile"].items()
            }
        known = {"kd", "scd", "pa", "sr", "deviation_profile"} | {
            f"{p}_q{q}" for p in ("acd", "fcd") for q in (25, 50, 75)
        }
        return MetricsReport(
            kd=data.get("kd"),
            scd=data.get("scd"),
            pa=data.get("pa"),
            sr=data.get("sr"),
            acd_quartiles=triple("acd"),
            fcd_quartiles=triple("fcd"),
            deviation_profile=profile,
            extra={k: v for k, v in data.items() if k not in known},
        )
