"""Exception hierarchy shared by all asmkit modules."""


class AsmkitError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(AsmkitError, ValueError):
    """An argument violates a documented precondition."""


class InvalidGeometryError(AsmkitError, ValueError):
    """Geometry input is malformed (non-finite, empty, degenerate triangles)."""


class ParseError(AsmkitError, ValueError):
    """A file could not be parsed; message carries file and line context."""


class SimulationDivergedError(AsmkitError):
    """The integrator produced a non-finite state."""

    def __init__(self, message: str, substep: int):
        super().__init__(f"{message} (substep {substep})")
        self.substep = substep


class PlanningTimeoutError(AsmkitError):
    """A planner exhausted its budget. ``partial`` holds whatever progress was made."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class PlanningInfeasibleError(AsmkitError):
    """No feasible plan exists under the planner's search rules."""


class GoalInCollisionError(AsmkitError):
    """A motion-planning goal pose interpenetrates static geometry."""


class GenerationFailedError(AsmkitError):
    """A synthetic instance failed its generation-time verification."""
