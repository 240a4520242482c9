"""Training objectives as pure numeric scores (values only, no gradients).

Five trajectory terms plus a contrastive order term, composable into one
weighted total. All of them are zero at ground truth and usable as analysis
scores for any candidate plan. Rotation error is measured by chamfer
distance so parts with rotational symmetries are not penalized for
equivalent orientations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import quaternions as quat
from .errors import InvalidArgumentError
from .geometry import PartGeometry, Pose, Trajectory, chamfer
from .metrics import shape_chamfer
from .ordering import maxpool_patches

#: Reference loss weights (lambda_p, lambda_t, lambda_r, lambda_st, lambda_sr).
DEFAULT_WEIGHTS = (20.0, 1.0, 20.0, 1.0, 20.0)


@dataclass(frozen=True)
class ObjectiveConfig:
    lambda_p: float = DEFAULT_WEIGHTS[0]
    lambda_t: float = DEFAULT_WEIGHTS[1]
    lambda_r: float = DEFAULT_WEIGHTS[2]
    lambda_st: float = DEFAULT_WEIGHTS[3]
    lambda_sr: float = DEFAULT_WEIGHTS[4]
    tau: float = 1.0

    def __post_init__(self):
        weights = (self.lambda_p, self.lambda_t, self.lambda_r, self.lambda_st, self.lambda_sr)
        if any(not math.isfinite(w) or w < 0 for w in weights):
            raise InvalidArgumentError(f"weights must be finite and >= 0: {weights}")
        if not self.tau > 0:
            raise InvalidArgumentError(f"temperature must be positive, got {self.tau}")

    @staticmethod
    def from_mapping(values: Mapping[str, float]) -> "ObjectiveConfig":
        known = {f.name for f in ObjectiveConfig.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(values) - known
        if unknown:
            raise InvalidArgumentError(f"unknown objective keys: {sorted(unknown)}")
        return ObjectiveConfig(**{k: float(v) for k, v in values.items()})


def _cosine_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity between rows of a and rows of b."""
    na = np.linalg.norm(a, axis=1, keepdims=True)
    nb = np.linalg.norm(b, axis=1, keepdims=True)
    na[na == 0] = 1.0
    nb[nb == 0] = 1.0
    return (a / na) @ (b / nb).T


def infonce_order_loss(
    part_feats,
    instr_feats,
    sigma: Sequence[int],
    config: ObjectiveConfig = ObjectiveConfig(),
) -> float:
    """Contrastive order loss over B instruction/part pairs.

    sigma maps instruction row i to its matching part row sigma(i); the
    similarity is cosine, softmax-normalized at temperature tau over all
    instruction rows.
    """
    parts = np.asarray(part_feats, dtype=np.float64)
    instrs = np.asarray(instr_feats, dtype=np.float64)
    if instrs.ndim == 3:
        instrs = maxpool_patches(instrs)
    if parts.ndim != 2 or instrs.ndim != 2:
        raise InvalidArgumentError("features must be (n, d) or (n, k, d) arrays")
    if parts.shape != instrs.shape:
        raise InvalidArgumentError(
            f"feature shapes differ: {parts.shape} vs {instrs.shape}"
        )
    if not (np.all(np.isfinite(parts)) and np.all(np.isfinite(instrs))):
        raise InvalidArgumentError("features contain non-finite values")
    b = parts.shape[0]
    sig = np.asarray(sigma, dtype=np.int64)
    if sorted(sig.tolist()) != list(range(b)):
        raise InvalidArgumentError(f"sigma is not a permutation of 0..{b - 1}")

    logits = _cosine_rows(parts[sig], instrs) / config.tau  # (B, B)
    # row i: positive is instruction i for part sigma(i)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_softmax = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-np.mean(log_softmax[np.arange(b), np.arange(b)]))


def loss_point_cloud(
    pred_final: Mapping[int, Pose],
    gt_final: Mapping[int, Pose],
    parts: Mapping[int, PartGeometry],
) -> float:
    """Chamfer between predicted and GT assembled unions (same as SCD)."""
    return shape_chamfer(pred_final, gt_final, parts)


def _matched_trajectories(
    pred: Sequence[Trajectory], gt: Sequence[Trajectory]
) -> list[tuple[Trajectory, Trajectory]]:
    by_id_pred = {t.part_id: t for t in pred}
    by_id_gt = {t.part_id: t for t in gt}
    if set(by_id_pred) != set(by_id_gt) or not by_id_pred:
        raise InvalidArgumentError("trajectory part sets do not match")
    pairs = [(by_id_pred[pid], by_id_gt[pid]) for pid in sorted(by_id_pred)]
    t_len = len(pairs[0][0])
    if any(len(a) != t_len or len(b) != t_len for a, b in pairs):
        raise InvalidArgumentError("all trajectories must share the same T")
    return pairs


def loss_translation(pred: Sequence[Trajectory], gt: Sequence[Trajectory]) -> float:
    """Mean unsquared Euclidean translation error over all parts and frames."""
    pairs = _matched_trajectories(pred, gt)
    total = 0.0
    count = 0
    for p, g in pairs:
        total += float(np.linalg.norm(p.translations() - g.translations(), axis=1).sum())
        count += len(p)
    return total / count


def loss_rotation(
    pred: Sequence[Trajectory],
    gt: Sequence[Trajectory],
    parts: Mapping[int, PartGeometry],
) -> float:
    """Mean chamfer between rotation-only placements over parts and frames.

    Translation is excluded so the measure is purely orientational; chamfer
    makes it invariant to each part's discrete rotational symmetries.
    """
    pairs = _matched_trajectories(pred, gt)
    if not set(t.part_id for t, _ in pairs) <= set(parts):
        raise InvalidArgumentError("missing part geometry for some trajectory")
    total = 0.0
    count = 0
    for p, g in pairs:
        cloud = parts[p.part_id].points
        for pose_p, pose_g in zip(p.poses, g.poses):
            total += chamfer(
                quat.rotate(pose_p.rotation, cloud), quat.rotate(pose_g.rotation, cloud)
            )
            count += 1
    return total / count


def _smoothness(seqs: list[np.ndarray]) -> float:
    total = 0.0
    count = 0
    for arr in seqs:
        if arr.shape[0] < 2:
            raise InvalidArgumentError("smoothness needs trajectories with T >= 2")
        diffs = np.diff(arr, axis=0)
        total += float(np.sum(diffs * diffs))
        count += diffs.shape[0]
    return total / count


def loss_smooth_translation(pred: Sequence[Trajectory]) -> float:
    """Mean squared frame-to-frame translation difference."""
    if not pred:
        raise InvalidArgumentError("no trajectories given")
    return _smoothness([t.translations() for t in pred])


def loss_smooth_rotation(pred: Sequence[Trajectory]) -> float:
    """Mean squared frame-to-frame quaternion difference.

    Pose quaternions are sign-canonical by construction, so consecutive
    differences never see spurious double-cover flips.
    """
    if not pred:
        raise InvalidArgumentError("no trajectories given")
    return _smoothness([t.rotations() for t in pred])


def total_loss(
    l_p: float,
    l_t: float,
    l_r: float,
    l_st: float,
    l_sr: float,
    config: ObjectiveConfig = ObjectiveConfig(),
) -> float:
    """Weighted sum of the five trajectory objectives."""
    components = (l_p, l_t, l_r, l_st, l_sr)
    if any(not math.isfinite(c) for c in components):
        raise InvalidArgumentError(f"non-finite loss component: {components}")
    weights = (config.lambda_p, config.lambda_t, config.lambda_r, config.lambda_st, config.lambda_sr)
    return float(math.fsum(w * c for w, c in zip(weights, components)))
