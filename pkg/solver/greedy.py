import logging
import time
from typing import Dict, Optional, Tuple

from placement.model import MILPModel, PlacementInstance
from placement.solution import PlacementSolution, check_solution
from solver.outcome import SolveOutcome, SolverError, SolveStatus

Pair = Tuple[str, str]


class GreedyPlacer:
    """
    Adds one replication at a time, always the one that raises the objective
    most. A replication into a site whose backup pool already covers it is
    free (gain 1); any other raises x and b together (gain 0). Ties go to
    the first pair in site order.
    """

    def __init__(self, model: MILPModel):
        self.instance: PlacementInstance = model.instance
        self.logger = logging.getLogger(__name__)
        self.counts: Dict[Pair, int] = {pair: 0 for pair in self.instance.pairs}
        self.incoming_max: Dict[str, int] = {site: 0 for site in self.instance.site_ids}
        self.outgoing: Dict[str, int] = {site: 0 for site in self.instance.site_ids}
        self.steps = 0

    def _protected_max(self, i: str, j: str, override: Optional[Tuple[Pair, int]] = None) -> int:
        worst = 0
        for pair in self.instance.paths.pairs_through(i, j):
            count = override[1] if override and pair == override[0] else self.counts[pair]
            worst = max(worst, count)
        return worst

    def _active_sites(self, extra: Pair) -> int:
        active = {site for site in self.instance.site_ids
                  if self.outgoing[site] or self.incoming_max[site]}
        return len(active | set(extra))

    def _can_add(self, i: str, j: str) -> bool:
        inst = self.instance
        count = self.counts[(i, j)] + 1
        if not inst.replication_eligible(i, j) or count > inst.bounds.c[(i, j)]:
            return False
        if count == 1:
            # Eq. 9: a new sender must be independent of every current sender to j
            for (h, k), existing in self.counts.items():
                if k == j and existing and inst.dependent(h, i):
                    return False
        umax = inst.params.umax
        if umax is not None and self._active_sites((i, j)) > umax:
            return False
        if not inst.link_allows(i, j, count, self._protected_max(i, j)):
            return False
        if inst.params.gamma == 1:
            path = inst.paths.get(i, j)
            for p, q in path.edges():
                if not inst.link_allows(p, q, self.counts.get((p, q), 0),
                                        self._protected_max(p, q, override=((i, j), count))):
                    return False
        return True

    def _gain(self, i: str, j: str) -> int:
        return 1 if self.counts[(i, j)] + 1 <= self.incoming_max[j] else 0

    def run(self) -> PlacementSolution:
        while True:
            best = None
            for pair in self.instance.pairs:
                if not self._can_add(*pair):
                    continue
                gain = self._gain(*pair)
                if best is None or gain > best[0]:
                    best = (gain, pair)
            if best is None:
                break
            i, j = best[1]
            self.counts[(i, j)] += 1
            self.outgoing[i] += 1
            self.incoming_max[j] = max(self.incoming_max[j], self.counts[(i, j)])
            self.steps += 1
        return PlacementSolution.from_replications(self.instance, self.counts)


def solve_greedy(model: MILPModel) -> SolveOutcome:
    """Feasible placement built one replication at a time; a lower bound on the optimum"""
    start = time.time()
    placer = GreedyPlacer(model)
    solution = placer.run()
    inst = model.instance
    violations = check_solution(solution, inst.topology, inst.matrix, inst.paths, inst.params)
    if violations:
        raise SolverError(f"greedy placement violates {violations[0]}")
    wall_time = time.time() - start
    placer.logger.info(f"Greedy FEASIBLE: objective {solution.objective} after {placer.steps} step(s)")
    return SolveOutcome(solution=solution, status=SolveStatus.FEASIBLE,
                        nodes_explored=placer.steps, wall_time=wall_time)
