"""asmkit: rigid-body assembly trajectories, planners, and physics-checked evaluation."""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    Aabb,
    PartGeometry,
    Pose,
    Trajectory,
    apply_pose,
    bbox_diagonal,
    bbox_of,
    chamfer,
    pose_interpolation_velocity,
)
from .metrics import MetricsReport  # noqa: F401
