"""Assembly plans: a part order plus one trajectory per step."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import InvalidArgumentError
from .geometry import Pose, Trajectory


@dataclass(frozen=True)
class AssemblyPlan:
    """Part order and the motion trajectory executed at each step.

    ``order`` lists part ids in assembly order; ``trajectories`` is indexed
    by step and must carry matching part ids.
    """

    order: tuple[int, ...]
    trajectories: tuple[Trajectory, ...]

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        trajs = tuple(self.trajectories)
        if len(order) != len(set(order)):
            raise InvalidArgumentError(f"order has duplicate part ids: {order}")
        if len(order) != len(trajs):
            raise InvalidArgumentError("one trajectory per ordered step is required")
        for pid, traj in zip(order, trajs):
            if traj.part_id != pid:
                raise InvalidArgumentError(
                    f"trajectory part id {traj.part_id} does not match step part {pid}"
                )
        lengths = {len(t) for t in trajs}
        if len(lengths) > 1:
            raise InvalidArgumentError(f"trajectories have mixed lengths: {lengths}")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "trajectories", trajs)

    @property
    def num_steps(self) -> int:
        return len(self.order)

    @property
    def t_len(self) -> int:
        return len(self.trajectories[0]) if self.trajectories else 0

    def validate(self, part_ids: Iterable[int]) -> None:
        missing = set(self.order) - set(part_ids)
        if missing:
            raise InvalidArgumentError(f"plan references unknown parts: {sorted(missing)}")

    def trajectory_for(self, part_id: int) -> Trajectory:
        for traj in self.trajectories:
            if traj.part_id == part_id:
                return traj
        raise InvalidArgumentError(f"no trajectory for part {part_id}")

    def final_poses(self) -> dict[int, Pose]:
        return {t.part_id: t.final for t in self.trajectories}

    def initial_poses(self) -> dict[int, Pose]:
        return {t.part_id: t.first for t in self.trajectories}

    def reversed(self) -> "AssemblyPlan":
        """Reverse both the step order and every trajectory's time axis."""
        return AssemblyPlan(
            tuple(reversed(self.order)),
            tuple(t.reversed() for t in reversed(self.trajectories)),
        )
