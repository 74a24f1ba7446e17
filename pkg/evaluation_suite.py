import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

from tqdm import tqdm

from failure.independence import FailureIndependenceMatrix, build_independence_matrix
from metrics.report import (
    MetricsReport,
    SweepCell,
    SweepResult,
    build_metrics,
    capacity_reduction,
    server_efficiency,
)
from placement.model import PlacementInstance, PlacementModelBuilder, PlacementParams
from placement.solution import check_solution
from routing.secondary_paths import SecondaryPathSet, compute_secondary_paths
from solver.outcome import SolveOutcome, SolverError, SolveStatus
from topology.network import Topology

# (model-ready instance) -> outcome
SolveFn = Callable[[PlacementInstance], SolveOutcome]


@dataclass(frozen=True)
class SweepGrid:
    alphas: Tuple[float, ...]
    lworst_values: Tuple[float, ...]
    gammas: Tuple[int, ...]

    def __post_init__(self):
        for name in ("alphas", "lworst_values", "gammas"):
            if not getattr(self, name):
                raise ValueError(f"sweep list '{name}' must not be empty")
            if len(set(getattr(self, name))) != len(getattr(self, name)):
                raise ValueError(f"sweep list '{name}' repeats a value")

    def points(self) -> List[Tuple[float, float, int]]:
        """alpha outermost, gamma innermost"""
        return list(itertools.product(self.alphas, self.lworst_values, self.gammas))


class EvaluationSuite:
    """Runs the placement over a parameter grid, reusing the matrix and secondary paths"""

    def __init__(self, topology: Topology, solve: SolveFn, bandwidth_mbps: float,
                 umax=None, show_progress: bool = True):
        """
        Initialize the suite for one topology.

        Args:
            topology (Topology): The WAN to place servers in.
            solve (SolveFn): Backend mapping a PlacementInstance to a SolveOutcome.
            bandwidth_mbps (float): Replication bandwidth B per server.
            umax (int, optional): Limit on active sites. Defaults to None (unbounded).
            show_progress (bool, optional): Whether to show a tqdm bar. Defaults to True.
        """
        self.topology = topology
        self.solve = solve
        self.bandwidth_mbps = bandwidth_mbps
        self.umax = umax
        self.show_progress = show_progress
        self.logger = logging.getLogger(__name__)
        self.matrix: FailureIndependenceMatrix = build_independence_matrix(topology)
        self.paths: SecondaryPathSet = compute_secondary_paths(topology)
        self.reports: Dict[Tuple[float, float, int], MetricsReport] = {}

    def run_cell(self, alpha: float, lworst_ms: float, gamma: int) -> SweepCell:
        cell = SweepCell(alpha=alpha, lworst_ms=lworst_ms, gamma=gamma, status="FAILED")
        try:
            params = PlacementParams(alpha=alpha, lworst_ms=lworst_ms, bandwidth_mbps=self.bandwidth_mbps,
                                     umax=self.umax, use_secondary_paths=gamma)
            instance = PlacementInstance(self.topology, self.matrix, self.paths, params)
            outcome = self.solve(instance)
            violations = check_solution(outcome.solution, self.topology, self.matrix, self.paths, params)
            if violations:
                raise SolverError(f"solution fails the checker: {violations[0]}")
        except (ValueError, SolverError) as e:
            self.logger.warning(f"Cell alpha={alpha:g} lworst={lworst_ms:g} gamma={gamma} failed: {e}")
            cell.error = str(e)
            return cell

        metrics = build_metrics(outcome, instance)
        self.reports[cell.key] = metrics
        cell.status = outcome.status.value
        cell.total_primary = outcome.solution.total_primary
        cell.total_backup = outcome.solution.total_backup
        cell.server_efficiency = server_efficiency(outcome.solution)
        cell.replicating_pairs = len(metrics.latency.samples) + metrics.latency.absent_pairs
        cell.absent_pairs = metrics.latency.absent_pairs
        cell.fraction_meeting = metrics.latency.fraction_meeting
        return cell

    def run(self, grid: SweepGrid) -> SweepResult:
        """Solve every grid point in order, then join the gamma pairs for capacity reduction"""
        result = SweepResult(gammas=tuple(grid.gammas))
        points = grid.points()
        for alpha, lworst_ms, gamma in tqdm(points, desc="Sweep", disable=not self.show_progress):
            result.cells.append(self.run_cell(alpha, lworst_ms, gamma))

        if result.has_capacity_reduction:
            self._fill_capacity_reduction(result, grid)
        self.audit_monotonicity(result, grid)
        failed = sum(1 for cell in result.cells if cell.status == "FAILED")
        self.logger.info(f"Sweep finished: {len(result.cells)} cell(s), {failed} failed")
        return result

    def _fill_capacity_reduction(self, result: SweepResult, grid: SweepGrid):
        for alpha, lworst_ms in itertools.product(grid.alphas, grid.lworst_values):
            protected = result.cell(alpha, lworst_ms, 1)
            unprotected = result.cell(alpha, lworst_ms, 0)
            if not (protected.status == unprotected.status == SolveStatus.OPTIMAL.value):
                continue
            try:
                reduction = capacity_reduction(protected.total_primary, unprotected.total_primary)
            except ValueError as e:
                self.logger.warning(f"alpha={alpha:g} lworst={lworst_ms:g}: {e}")
                continue
            protected.capacity_reduction = reduction
            unprotected.capacity_reduction = reduction

    def audit_monotonicity(self, result: SweepResult, grid: SweepGrid) -> List[str]:
        """Sum x should not fall as alpha or lworst grows; breaches are only reported"""
        breaches = []

        def scan(axis: Sequence, cell_at: Callable, label: str):
            previous = None
            for value in sorted(axis):
                cell = cell_at(value)
                if cell.status != SolveStatus.OPTIMAL.value:
                    continue
                if previous is not None and cell.total_primary < previous[1]:
                    breaches.append(f"{label}: sum x fell from {previous[1]} at {previous[0]:g} "
                                    f"to {cell.total_primary} at {value:g}")
                previous = (value, cell.total_primary)

        for lworst_ms, gamma in itertools.product(grid.lworst_values, grid.gammas):
            scan(grid.alphas, lambda a: result.cell(a, lworst_ms, gamma),
                 f"alpha axis (lworst={lworst_ms:g}, gamma={gamma})")
        for alpha, gamma in itertools.product(grid.alphas, grid.gammas):
            scan(grid.lworst_values, lambda lw: result.cell(alpha, lw, gamma),
                 f"lworst axis (alpha={alpha:g}, gamma={gamma})")

        for breach in breaches:
            self.logger.warning(f"Monotonicity breach on {breach}")
        return breaches


def model_solver(backend: Callable) -> SolveFn:
    """Adapt a model-level backend (solve_exact, solve_greedy) to a SolveFn"""

    def solve(instance: PlacementInstance) -> SolveOutcome:
        return backend(PlacementModelBuilder(instance).build())

    return solve
