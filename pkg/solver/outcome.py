from dataclasses import dataclass
from enum import Enum

from placement.solution import PlacementSolution


class SolverError(RuntimeError):
    """A solver backend could not produce a valid placement"""


class SolverTimeoutError(SolverError):
    """The time limit expired before any incumbent was found"""


class OracleGuardError(SolverError, ValueError):
    """Instance too large for exhaustive enumeration"""


class SolveStatus(str, Enum):
    OPTIMAL = "OPTIMAL"
    FEASIBLE = "FEASIBLE"
    TIMEOUT = "TIMEOUT"


@dataclass(frozen=True)
class SolveOutcome:
    solution: PlacementSolution
    status: SolveStatus
    nodes_explored: int
    wall_time: float

    @property
    def objective(self) -> int:
        return self.solution.objective
