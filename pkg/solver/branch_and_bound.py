import logging
import math
import time
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from placement.model import MILPModel, ceil_tol
from placement.solution import PlacementSolution
from solver.outcome import SolveOutcome, SolverError, SolverTimeoutError, SolveStatus

DEFAULT_TIME_LIMIT_S = 300.0
INTEGRALITY_TOLERANCE = 1e-6
BOUND_TOLERANCE = 1e-6

# linprog status codes
LP_OPTIMAL = 0
LP_INFEASIBLE = 2


@dataclass
class SearchNode:
    lower: np.ndarray
    upper: np.ndarray
    depth: int


@dataclass(frozen=True)
class LinearForm:
    """The model as min c^T v subject to A_ub v <= b_ub, A_eq v = b_eq"""
    cost: np.ndarray
    a_ub: Optional[csr_matrix]
    b_ub: Optional[np.ndarray]
    a_eq: Optional[csr_matrix]
    b_eq: Optional[np.ndarray]
    lower: np.ndarray
    upper: np.ndarray


def _sparse(rows: List[List[Tuple[int, float]]], size: int) -> Optional[csr_matrix]:
    if not rows:
        return None
    data, row_idx, col_idx = [], [], []
    for r, terms in enumerate(rows):
        for col, coef in terms:
            row_idx.append(r)
            col_idx.append(col)
            data.append(coef)
    return csr_matrix((data, (row_idx, col_idx)), shape=(len(rows), size))


def lexicographic_weight(model: MILPModel) -> int:
    """K such that K * sum(x - b) + sum(x) ranks placements by objective, then by sum(x)"""
    return 1 + int(sum(var.upper for var in model.variables if var.family == "x"))


def linear_form(model: MILPModel) -> LinearForm:
    size = len(model.variables)
    upper = np.array([var.upper for var in model.variables], dtype=float)
    if not np.all(np.isfinite(upper)):
        names = [var.name for var in model.variables if not math.isfinite(var.upper)]
        raise SolverError(f"model has unbounded variables: {', '.join(names[:5])}")
    lower = np.array([var.lower for var in model.variables], dtype=float)

    weight = lexicographic_weight(model)
    cost = np.zeros(size)
    for idx, coef in model.objective:
        cost[idx] -= weight * coef
    for var_idx, var in enumerate(model.variables):
        if var.family == "x":
            cost[var_idx] -= 1.0

    ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
    for con in model.constraints:
        terms = list(con.terms)
        if con.sense == "==":
            eq_rows.append(terms)
            eq_rhs.append(con.rhs)
        elif con.sense == "<=":
            ub_rows.append(terms)
            ub_rhs.append(con.rhs)
        else:
            ub_rows.append([(idx, -coef) for idx, coef in terms])
            ub_rhs.append(-con.rhs)

    return LinearForm(
        cost=cost,
        a_ub=_sparse(ub_rows, size),
        b_ub=np.array(ub_rhs) if ub_rows else None,
        a_eq=_sparse(eq_rows, size),
        b_eq=np.array(eq_rhs) if eq_rows else None,
        lower=lower,
        upper=upper,
    )


class BranchAndBoundSolver:
    """
    Depth-first branch-and-bound over HiGHS linear relaxations.

    Branches on the most fractional integer variable (lowest index on ties)
    and explores the rounded-up child first. Objective values are integral,
    so a node is pruned once floor(relaxation bound) cannot beat the incumbent.
    """

    def __init__(self, model: MILPModel, time_limit: float = DEFAULT_TIME_LIMIT_S):
        """
        Initialize the solver for one placement model.

        Args:
            model (MILPModel): Built placement model with finite variable bounds.
            time_limit (float, optional): Wall-clock limit in seconds. Defaults to DEFAULT_TIME_LIMIT_S.

        Raises:
            SolverError: A variable has no finite upper bound.
        """
        self.model = model
        self.time_limit = time_limit
        self.logger = logging.getLogger(__name__)
        self.form = linear_form(model)
        self.node_count = 0
        self.best_value: Optional[float] = None
        self.best_vector: Optional[np.ndarray] = None

    def _relax(self, node: SearchNode) -> Optional[Tuple[float, np.ndarray]]:
        form = self.form
        result = linprog(
            form.cost,
            A_ub=form.a_ub, b_ub=form.b_ub,
            A_eq=form.a_eq, b_eq=form.b_eq,
            bounds=np.column_stack([node.lower, node.upper]),
            method="highs",
        )
        if result.status == LP_INFEASIBLE:
            return None
        if result.status != LP_OPTIMAL:
            raise SolverError(f"LP relaxation failed: {result.message}")
        return -float(result.fun), np.asarray(result.x)

    def _branch_variable(self, vector: np.ndarray) -> Optional[int]:
        fractional = np.abs(vector - np.round(vector))
        if fractional.max(initial=0.0) <= INTEGRALITY_TOLERANCE:
            return None
        # argmax returns the first index among equally fractional variables
        return int(np.argmax(fractional))

    def solve(self) -> SolveOutcome:
        """Depth-first search to the lexicographic optimum, or the incumbent at timeout"""
        start = time.time()
        stack: List[SearchNode] = [SearchNode(self.form.lower.copy(), self.form.upper.copy(), 0)]
        timed_out = False

        while stack:
            if time.time() - start > self.time_limit:
                timed_out = True
                break
            node = stack.pop()
            self.node_count += 1
            relaxed = self._relax(node)
            if relaxed is None:
                continue
            bound, vector = relaxed
            if self.best_value is not None and math.floor(bound + BOUND_TOLERANCE) <= self.best_value:
                continue

            branch_idx = self._branch_variable(vector)
            if branch_idx is None:
                value = round(bound)
                if self.best_value is None or value > self.best_value:
                    self.best_value = value
                    self.best_vector = np.round(vector)
                    self.logger.debug(f"Node {self.node_count}: incumbent {value} at depth {node.depth}")
                continue

            level = vector[branch_idx]
            down = SearchNode(node.lower.copy(), node.upper.copy(), node.depth + 1)
            down.upper[branch_idx] = math.floor(level)
            up = SearchNode(node.lower.copy(), node.upper.copy(), node.depth + 1)
            up.lower[branch_idx] = math.ceil(level)
            stack.append(down)
            stack.append(up)

        wall_time = time.time() - start
        if self.best_vector is None:
            if timed_out:
                raise SolverTimeoutError(
                    f"no incumbent after {self.time_limit:g} s ({self.node_count} nodes)")
            raise SolverError("placement model is infeasible")

        status = SolveStatus.TIMEOUT if timed_out else SolveStatus.OPTIMAL
        if timed_out:
            self.logger.warning(f"Time limit of {self.time_limit:g} s reached after {self.node_count} nodes; "
                                f"returning incumbent")
        solution = decode_solution(self.model, self.best_vector)
        self.logger.info(f"Exact search {status.value}: objective {solution.objective}, "
                         f"{self.node_count} nodes, {wall_time:.2f} s")
        return SolveOutcome(solution=solution, status=status,
                            nodes_explored=self.node_count, wall_time=wall_time)


def decode_solution(model: MILPModel, vector: np.ndarray) -> PlacementSolution:
    """Map an integral variable vector back onto placement variables"""
    solution = PlacementSolution()
    for idx, var in enumerate(model.variables):
        value = int(round(vector[idx]))
        key = var.key[0] if len(var.key) == 1 else var.key
        getattr(solution, var.family)[key] = value
    # r is free between B c_ij and its capacity bound; report the smallest rate
    bandwidth = model.instance.params.bandwidth_mbps
    solution.r = {pair: ceil_tol(bandwidth * count) for pair, count in solution.c.items()}
    return solution


def solve_exact(model: MILPModel, time_limit: float = DEFAULT_TIME_LIMIT_S) -> SolveOutcome:
    """Exact optimum of model by branch-and-bound"""
    return BranchAndBoundSolver(model, time_limit=time_limit).solve()
