import itertools
import logging
import math
import time
from typing import Dict, List, Tuple

from failure.independence import FailureIndependenceMatrix
from placement.model import PlacementInstance, PlacementParams, variable_bounds
from placement.solution import PlacementSolution, check_solution
from routing.secondary_paths import SecondaryPathSet
from solver.outcome import OracleGuardError, SolveOutcome, SolveStatus
from topology.network import Topology

logger = logging.getLogger(__name__)

MAX_ORACLE_SITES = 6
MAX_ORACLE_C = 3
MAX_ORACLE_CANDIDATES = 500_000

Pair = Tuple[str, str]


def _rank(counts: Tuple[int, ...], pairs: List[Pair]) -> Tuple[int, int]:
    """(objective, sum x) of the placement implied by the counts, tight b"""
    incoming: Dict[str, int] = {}
    total = 0
    for (_, j), count in zip(pairs, counts):
        total += count
        if count > incoming.get(j, 0):
            incoming[j] = count
    return total - sum(incoming.values()), total


def brute_force_oracle(topology: Topology, matrix: FailureIndependenceMatrix, paths: SecondaryPathSet,
                       params: PlacementParams, max_c: int) -> SolveOutcome:
    """
    Exhaustive search over every replication matrix with entries <= max_c.

    Feasibility is downward closed in c (lowering any count only relaxes
    Eqs. 9, 12 and 16), so a count that fails check_solution on its own is
    dropped from the per-pair range first. The remaining candidates are
    visited by decreasing (objective, sum x), each one derived in full and
    verified with check_solution; the first that passes is optimal.
    """
    if len(topology.sites) > MAX_ORACLE_SITES:
        raise OracleGuardError(f"oracle limited to {MAX_ORACLE_SITES} sites, topology has {len(topology.sites)}")
    if not 0 <= max_c <= MAX_ORACLE_C:
        raise OracleGuardError(f"oracle limited to max_c <= {MAX_ORACLE_C}, got {max_c}")

    start = time.time()
    instance = PlacementInstance(topology, matrix, paths, params)
    bounds = variable_bounds(topology, params)
    pairs = topology.directed_pairs()

    def feasible(counts: Dict[Pair, int]) -> bool:
        candidate = PlacementSolution.from_replications(instance, counts)
        return not check_solution(candidate, topology, matrix, paths, params)

    ranges = []
    for pair in pairs:
        top = min(max_c, bounds.c[pair])
        allowed = [value for value in range(top, 0, -1) if feasible({pair: value})]
        ranges.append(allowed + [0])

    space = math.prod(len(values) for values in ranges)
    if space > MAX_ORACLE_CANDIDATES:
        raise OracleGuardError(f"oracle search space of {space} candidates exceeds {MAX_ORACLE_CANDIDATES}")

    candidates = sorted(itertools.product(*ranges), key=lambda counts: _rank(counts, pairs), reverse=True)
    logger.debug(f"Oracle: {len(candidates)} candidate replication matrices")

    checked = 0
    for counts in candidates:
        checked += 1
        chosen = dict(zip(pairs, counts))
        if feasible(chosen):
            solution = PlacementSolution.from_replications(instance, chosen)
            break
    else:
        solution = PlacementSolution.zero(instance)

    wall_time = time.time() - start
    logger.info(f"Oracle OPTIMAL: objective {solution.objective} after {checked} check(s), {wall_time:.2f} s")
    return SolveOutcome(solution=solution, status=SolveStatus.OPTIMAL,
                        nodes_explored=len(candidates), wall_time=wall_time)
