from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Tuple

from failure.independence import FailureIndependenceMatrix
from placement.model import PlacementInstance, PlacementParams, ceil_tol
from routing.secondary_paths import SecondaryPathSet
from topology.network import Topology

Pair = Tuple[str, str]
TOLERANCE = 1e-6


@dataclass
class PlacementSolution:
    """Values of every placement variable; missing keys read as zero"""
    x: Dict[str, int] = field(default_factory=dict)
    b: Dict[str, int] = field(default_factory=dict)
    u: Dict[str, int] = field(default_factory=dict)
    c: Dict[Pair, int] = field(default_factory=dict)
    e: Dict[Pair, int] = field(default_factory=dict)
    r: Dict[Pair, int] = field(default_factory=dict)
    y: Dict[Tuple[str, str, str], int] = field(default_factory=dict)

    @property
    def total_primary(self) -> int:
        return sum(self.x.values())

    @property
    def total_backup(self) -> int:
        return sum(self.b.values())

    @property
    def active_sites(self) -> int:
        return sum(self.u.values())

    @property
    def objective(self) -> int:
        return self.total_primary - self.total_backup

    def replications(self) -> List[Tuple[str, str, int]]:
        return [(i, j, count) for (i, j), count in self.c.items() if count > 0]

    @classmethod
    def zero(cls, instance: PlacementInstance) -> "PlacementSolution":
        return cls.from_replications(instance, {})

    @classmethod
    def from_replications(cls, instance: PlacementInstance, c: Mapping[Pair, int]) -> "PlacementSolution":
        """
        Complete a placement from its replication counts: x by Eq. 3, b as the
        largest incoming count (tight Eq. 10), e/u/y as indicator closures and
        r as the smallest integral rate carrying the replications.
        """
        sites = instance.site_ids
        pairs = instance.pairs
        counts = {pair: int(c.get(pair, 0)) for pair in pairs}
        for pair, count in c.items():
            if pair not in counts and count:
                counts[pair] = int(count)

        x = {site: 0 for site in sites}
        b = {site: 0 for site in sites}
        for (i, j), count in counts.items():
            x[i] += count
            b[j] = max(b[j], count)
        e = {pair: int(count > 0) for pair, count in counts.items()}
        u = {site: int(x[site] + b[site] > 0) for site in sites}

        # smallest rate Eq. 11 allows
        r = {pair: ceil_tol(instance.params.bandwidth_mbps * count) for pair, count in counts.items()}

        y = {}
        for k in sites:
            senders = [i for i in sites if (i, k) in e]
            for pos, i in enumerate(senders):
                for j in senders[pos + 1:]:
                    y[(k, i, j)] = int(e.get((i, k), 0) and e.get((j, k), 0))
        return cls(x=x, b=b, u=u, c=counts, e=e, r=r, y=y)


@dataclass(frozen=True)
class Violation:
    """A constraint that does not hold: lhs <sense> rhs is false"""
    equation: str
    indices: Tuple[str, ...]
    lhs: float
    rhs: float
    message: str

    def __str__(self):
        where = ",".join(self.indices)
        return f"{self.equation}[{where}]: {self.message} (lhs={self.lhs:g}, rhs={self.rhs:g})"


class SolutionChecker:
    """Verifies a placement against Eqs. 2-18 without using the model builder"""

    def __init__(self, topology: Topology, matrix: FailureIndependenceMatrix,
                 paths: SecondaryPathSet, params: PlacementParams):
        self.topology = topology
        self.matrix = matrix
        self.paths = paths
        self.params = params
        self.violations: List[Violation] = []

    def _flag(self, equation: str, indices, lhs: float, rhs: float, message: str):
        self.violations.append(Violation(equation, tuple(indices), float(lhs), float(rhs), message))

    def check(self, solution: PlacementSolution) -> List[Violation]:
        """Every violated constraint of solution; empty when feasible"""
        self.violations = []
        self._check_domains(solution)
        self._check_replications(solution)
        self._check_sharing(solution)
        self._check_bandwidth(solution)
        self._check_activity(solution)
        return self.violations

    def _check_domains(self, s: PlacementSolution):
        sites = set(self.topology.site_ids)
        for family, values, binary in (("x", s.x, False), ("b", s.b, False), ("u", s.u, True),
                                       ("c", s.c, False), ("e", s.e, True), ("r", s.r, False),
                                       ("y", s.y, True)):
            for key, value in values.items():
                indices = key if isinstance(key, tuple) else (key,)
                if any(site not in sites for site in indices):
                    self._flag("eq18", (family, *indices), value, 0, "entry names an unknown site")
                    continue
                if value < 0:
                    self._flag("eq17", (family, *indices), value, 0, f"{family} must be non-negative")
                if value != int(value):
                    self._flag("eq18", (family, *indices), value, round(value), f"{family} must be integral")
                elif binary and value not in (0, 1):
                    self._flag("eq18", (family, *indices), value, 1, f"{family} must be binary")

    def _check_replications(self, s: PlacementSolution):
        params = self.params
        sites = self.topology.site_ids
        for i in sites:
            sent = sum(count for (src, _), count in s.c.items() if src == i)
            if sent != s.x.get(i, 0):
                self._flag("eq3", (i,), sent, s.x.get(i, 0), "backups sent must equal primary servers")

        for (i, j) in sorted(set(s.c) | set(s.e)):
            count = s.c.get((i, j), 0)
            flag = s.e.get((i, j), 0)
            if i not in self.matrix.order or j not in self.matrix.order:
                continue
            if count > 0 and self.matrix.dependent(i, j):
                self._flag("eq2", (i, j), count, 0, "replication between sites that can fail together")
            if count > params.big_m * flag:
                self._flag("eq4", (i, j), count, params.big_m * flag, "c_ij > 0 requires e_ij = 1")
            if flag > count:
                self._flag("eq5", (i, j), flag, count, "e_ij = 1 requires c_ij > 0")
            if flag:
                if not self.topology.adjacent(i, j):
                    self._flag("eq13", (i, j), flag, params.lworst_ms,
                               "replication link latency undefined for non-adjacent sites")
                elif flag * self.topology.latency(i, j) > params.lworst_ms + TOLERANCE:
                    self._flag("eq13", (i, j), self.topology.latency(i, j), params.lworst_ms,
                               "replication link exceeds the latency limit")
            b_j = s.b.get(j, 0)
            if b_j < count:
                self._flag("eq10", (i, j), b_j, count, "backup servers at the destination below c_ij")

    def _check_sharing(self, s: PlacementSolution):
        sites = self.topology.site_ids
        for k in sites:
            dependent_sum = 0
            for pos, i in enumerate(sites):
                e_ik = s.e.get((i, k), 0)
                for j in sites[pos + 1:]:
                    e_jk = s.e.get((j, k), 0)
                    y = s.y.get((k, i, j), 0)
                    if y < e_ik + e_jk - 1:
                        self._flag("eq6", (k, i, j), y, e_ik + e_jk - 1, "y_kij must be 1 when both send to k")
                    if y > e_ik:
                        self._flag("eq7", (k, i, j), y, e_ik, "y_kij exceeds e_ik")
                    if y > e_jk:
                        self._flag("eq8", (k, i, j), y, e_jk, "y_kij exceeds e_jk")
                    if self.matrix.dependent(i, j):
                        dependent_sum += y
            if dependent_sum != 0:
                self._flag("eq9", (k,), dependent_sum, 0, "dependent senders share backup site")

    def _check_bandwidth(self, s: PlacementSolution):
        params = self.params
        bandwidth = params.bandwidth_mbps
        for (i, j) in sorted(set(s.c) | set(s.r)):
            count = s.c.get((i, j), 0)
            rate = s.r.get((i, j), 0)
            if bandwidth * count > rate + TOLERANCE:
                self._flag("eq11", (i, j), bandwidth * count, rate, "replication demand exceeds r_ij")
            capacity = params.alpha * self.topology.capacity(i, j)
            if rate > capacity + TOLERANCE:
                self._flag("eq12", (i, j), rate, capacity, "r_ij exceeds alpha W_ij")
            if count > 0 and not self.topology.adjacent(i, j):
                self._flag("eq12", (i, j), count, 0, "replication over a non-adjacent pair")
            if count > 0 and params.gamma == 1 and self.paths.absent(i, j):
                self._flag("eq12", (i, j), count, 0, "replication link has no secondary path")
            if params.gamma == 1:
                for k, m in self.paths.pairs_through(i, j):
                    reserved = bandwidth * s.c.get((k, m), 0)
                    if rate > capacity - reserved + TOLERANCE:
                        self._flag("eq12", (i, j, k, m), rate, capacity - reserved,
                                   "r_ij exceeds capacity left by the secondary path of (k, m)")

        # min-form restatement on every directed link
        for i, j in self.topology.directed_pairs():
            protected = max((s.c.get(pair, 0) for pair in self.paths.pairs_through(i, j)), default=0)
            load = bandwidth * s.c.get((i, j), 0) + params.gamma * bandwidth * protected
            capacity = params.alpha * self.topology.capacity(i, j)
            if load > capacity + TOLERANCE:
                self._flag("audit", (i, j), load, capacity, "directed link over-subscribed")

    def _check_activity(self, s: PlacementSolution):
        params = self.params
        for i in self.topology.site_ids:
            load = s.x.get(i, 0) + s.b.get(i, 0)
            active = s.u.get(i, 0)
            if load > params.big_m * active:
                self._flag("eq14", (i,), load, params.big_m * active, "site hosts servers but u_i = 0")
            if active > load:
                self._flag("eq15", (i,), active, load, "u_i = 1 on an empty site")
        if params.umax is not None and s.active_sites > params.umax:
            self._flag("eq16", (), s.active_sites, params.umax, "too many active sites")


def check_solution(solution: PlacementSolution, topology: Topology, matrix: FailureIndependenceMatrix,
                   paths: SecondaryPathSet, params: PlacementParams) -> List[Violation]:
    return SolutionChecker(topology, matrix, paths, params).check(solution)
