import logging
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Tuple

from failure.independence import FailureIndependenceMatrix
from routing.secondary_paths import SecondaryPathSet
from topology.network import Topology

logger = logging.getLogger(__name__)

DEFAULT_BANDWIDTH_MBPS = 240.0
DEFAULT_BIG_M = 1e9
FLOOR_TOLERANCE = 1e-9

Pair = Tuple[str, str]


class ModelError(ValueError):
    """Placement inputs that cannot form a model"""


def floor_tol(value: float) -> int:
    """floor() that absorbs representation error such as 0.05 * 4800 = 240.00000000000003"""
    return math.floor(value + FLOOR_TOLERANCE)


def ceil_tol(value: float) -> int:
    return math.ceil(value - FLOOR_TOLERANCE)


@dataclass(frozen=True)
class PlacementParams:
    """Scalar parameters of the placement problem; umax None means unbounded"""
    alpha: float
    lworst_ms: float
    bandwidth_mbps: float = DEFAULT_BANDWIDTH_MBPS
    umax: Optional[int] = None
    use_secondary_paths: int = 1
    big_m: float = DEFAULT_BIG_M

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.bandwidth_mbps <= 0:
            raise ValueError(f"bandwidth_mbps must be positive, got {self.bandwidth_mbps}")
        if self.lworst_ms < 0:
            raise ValueError(f"lworst_ms must be non-negative, got {self.lworst_ms}")
        if self.umax is not None and (int(self.umax) != self.umax or self.umax < 1):
            raise ValueError(f"umax must be a positive integer or unbounded, got {self.umax}")
        if self.use_secondary_paths not in (0, 1):
            raise ValueError(f"use_secondary_paths (gamma) must be 0 or 1, got {self.use_secondary_paths}")
        if self.big_m <= 0:
            raise ValueError(f"big_m must be positive, got {self.big_m}")

    @property
    def gamma(self) -> int:
        return int(self.use_secondary_paths)

    def to_dict(self) -> Dict[str, object]:
        return {
            "alpha": self.alpha,
            "bandwidth_mbps": self.bandwidth_mbps,
            "lworst_ms": self.lworst_ms,
            "umax": "unbounded" if self.umax is None else int(self.umax),
            "gamma": self.gamma,
            "big_m": self.big_m,
        }


@dataclass(frozen=True)
class VariableBounds:
    """Finite upper bounds of the integer variables"""
    x: Dict[str, int]
    b: Dict[str, int]
    c: Dict[Pair, int]
    r: Dict[Pair, int]

    def to_rows(self) -> List[Tuple[str, str, str, int]]:
        rows = [("x", site, "", bound) for site, bound in self.x.items()]
        rows += [("b", site, "", bound) for site, bound in self.b.items()]
        rows += [("c", i, j, bound) for (i, j), bound in self.c.items()]
        rows += [("r", i, j, bound) for (i, j), bound in self.r.items()]
        return rows


def variable_bounds(topology: Topology, params: PlacementParams) -> VariableBounds:
    """
    c_ij <= floor(alpha W_ij / B), x_i sums its outgoing c bounds, b_j takes the
    largest incoming c bound and r_ij <= floor(alpha W_ij).
    """
    c = {
        (i, j): floor_tol(params.alpha * topology.capacity(i, j) / params.bandwidth_mbps)
        for i, j in topology.directed_pairs()
    }
    r = {
        (i, j): floor_tol(params.alpha * topology.capacity(i, j))
        for i, j in topology.directed_pairs()
    }
    x = {site: 0 for site in topology.site_ids}
    b = {site: 0 for site in topology.site_ids}
    for (i, j), bound in c.items():
        x[i] += bound
        b[j] = max(b[j], bound)
    return VariableBounds(x=x, b=b, c=c, r=r)


@dataclass(frozen=True, eq=False)
class PlacementInstance:
    """The four placement inputs, checked for mutual consistency"""
    topology: Topology
    matrix: FailureIndependenceMatrix
    paths: SecondaryPathSet
    params: PlacementParams

    def __post_init__(self):
        sites = set(self.topology.site_ids)
        if set(self.matrix.order) != sites or len(self.matrix.order) != len(sites):
            raise ModelError("independence matrix and topology cover different site sets")
        pairs = set(self.topology.directed_pairs())
        path_pairs = {pair for pair, _ in self.paths}
        if path_pairs != pairs:
            raise ModelError("secondary paths and topology cover different adjacent pairs")

    @cached_property
    def bounds(self) -> VariableBounds:
        return variable_bounds(self.topology, self.params)

    @cached_property
    def site_ids(self) -> Tuple[str, ...]:
        return self.topology.site_ids

    @cached_property
    def pairs(self) -> List[Pair]:
        return self.topology.directed_pairs()

    def dependent(self, i: str, j: str) -> bool:
        return self.matrix.dependent(i, j)

    def protectable(self, i: str, j: str) -> bool:
        """False when gamma = 1 and the replication link has no secondary path"""
        return not (self.params.gamma == 1 and self.paths.absent(i, j))

    def replication_eligible(self, i: str, j: str) -> bool:
        """Static conditions for c_ij > 0: Eqs. 2, 13, adjacency and protectability"""
        return (
            self.topology.adjacent(i, j)
            and not self.dependent(i, j)
            and self.topology.latency(i, j) <= self.params.lworst_ms
            and self.protectable(i, j)
            and self.bounds.c[(i, j)] > 0
        )

    def link_allows(self, i: str, j: str, direct: int, protected_max: int) -> bool:
        """Eqs. 11-12 on directed link (i, j) carrying `direct` replications and the worst detour"""
        params = self.params
        budget = params.alpha * self.topology.capacity(i, j) - params.gamma * params.bandwidth_mbps * protected_max
        if budget < -FLOOR_TOLERANCE:
            return False
        return params.bandwidth_mbps * direct <= floor_tol(budget) + FLOOR_TOLERANCE


@dataclass(frozen=True)
class Variable:
    name: str
    family: str
    key: Tuple[str, ...]
    upper: float
    binary: bool = False
    lower: float = 0.0


@dataclass(frozen=True)
class Constraint:
    """sum(coef * var) <sense> rhs, tagged with the equation it transcribes"""
    tag: str
    name: str
    terms: Tuple[Tuple[int, float], ...]
    sense: str
    rhs: float


@dataclass(frozen=True, eq=False)
class MILPModel:
    """Integer program of the placement problem: maximize sum(x_i - b_i)"""
    instance: PlacementInstance
    variables: Tuple[Variable, ...]
    constraints: Tuple[Constraint, ...]
    objective: Tuple[Tuple[int, float], ...]
    index: Dict[Tuple[str, Tuple[str, ...]], int] = field(repr=False)

    def var(self, family: str, *key: str) -> Optional[int]:
        return self.index.get((family, tuple(key)))

    def constraints_tagged(self, tag: str) -> List[Constraint]:
        return [con for con in self.constraints if con.tag == tag]

    @property
    def tags(self) -> List[str]:
        return sorted({con.tag for con in self.constraints}, key=lambda tag: int(tag[2:]))

    def to_lp_text(self) -> str:
        """Human-auditable LP-format listing, one named row per constraint"""

        def render(terms) -> str:
            parts = []
            for idx, coef in terms:
                name = self.variables[idx].name
                sign = "-" if coef < 0 else "+"
                magnitude = abs(coef)
                body = name if magnitude == 1 else f"{magnitude:g} {name}"
                parts.append(f"{sign} {body}")
            text = " ".join(parts) if parts else "0"
            return text[2:] if text.startswith("+ ") else text

        sense_text = {"<=": "<=", ">=": ">=", "==": "="}
        lines = [f"\\ placement model for topology '{self.instance.topology.name}'", "Maximize",
                 f" obj: {render(self.objective)}", "Subject To"]
        for con in self.constraints:
            lines.append(f" {con.name}: {render(con.terms)} {sense_text[con.sense]} {con.rhs:g}")
        lines.append("Bounds")
        for var in self.variables:
            if not var.binary:
                lines.append(f" {var.lower:g} <= {var.name} <= {var.upper:g}")
        lines.append("General")
        lines.extend(f" {var.name}" for var in self.variables if not var.binary)
        lines.append("Binary")
        lines.extend(f" {var.name}" for var in self.variables if var.binary)
        lines.append("End")
        return "\n".join(lines) + "\n"


def _lp_name(*parts: str) -> str:
    return "_".join(re.sub(r"[^A-Za-z0-9]", "_", part) for part in parts)


class PlacementModelBuilder:
    """Transcribes the placement ILP (objective and Eqs. 2-18) for one instance"""

    def __init__(self, instance: PlacementInstance):
        self.instance = instance
        self.logger = logging.getLogger(__name__)
        self._variables: List[Variable] = []
        self._constraints: List[Constraint] = []
        self._index: Dict[Tuple[str, Tuple[str, ...]], int] = {}

    def _add_var(self, family: str, key: Tuple[str, ...], upper: float, binary: bool = False) -> int:
        idx = len(self._variables)
        self._variables.append(Variable(
            name=_lp_name(family, *key), family=family, key=key, upper=upper, binary=binary))
        self._index[(family, key)] = idx
        return idx

    def _add_row(self, tag: str, key: Tuple[str, ...], terms, sense: str, rhs: float):
        self._constraints.append(Constraint(
            tag=tag,
            name=_lp_name(tag, *key) if key else tag,
            terms=tuple((idx, float(coef)) for idx, coef in terms),
            sense=sense,
            rhs=float(rhs),
        ))

    def build(self) -> MILPModel:
        """Emit every variable family and every constraint row for the instance"""
        inst = self.instance
        params = inst.params
        topology = inst.topology
        bounds = inst.bounds
        sites = inst.site_ids
        pairs = inst.pairs

        x = {i: self._add_var("x", (i,), bounds.x[i]) for i in sites}
        b = {i: self._add_var("b", (i,), bounds.b[i]) for i in sites}
        u = {i: self._add_var("u", (i,), 1, binary=True) for i in sites}
        # unprotectable replication links are fixed to zero
        c = {
            (i, j): self._add_var("c", (i, j), bounds.c[(i, j)] if inst.protectable(i, j) else 0)
            for i, j in pairs
        }
        e = {(i, j): self._add_var("e", (i, j), 1, binary=True) for i, j in pairs}
        r = {(i, j): self._add_var("r", (i, j), bounds.r[(i, j)]) for i, j in pairs}
        y = {}
        for k in sites:
            senders = [i for i in sites if (i, k) in e]
            for pos, i in enumerate(senders):
                for j in senders[pos + 1:]:
                    y[(k, i, j)] = self._add_var("y", (k, i, j), 1, binary=True)

        # Eq. 2: c_ij I_ij = 0
        for i, j in pairs:
            if inst.dependent(i, j):
                self._add_row("eq2", (i, j), [(c[(i, j)], 1)], "==", 0)
        # Eq. 3: sum_j c_ij = x_i
        for i in sites:
            terms = [(c[(i, j)], 1) for j in sites if (i, j) in c]
            self._add_row("eq3", (i,), terms + [(x[i], -1)], "==", 0)
        for i, j in pairs:
            # Eq. 4: M e_ij - c_ij >= 0, with M no larger than the finite c bound
            big_m = min(params.big_m, max(bounds.c[(i, j)], 1))
            self._add_row("eq4", (i, j), [(e[(i, j)], big_m), (c[(i, j)], -1)], ">=", 0)
            # Eq. 5: e_ij <= c_ij
            self._add_row("eq5", (i, j), [(e[(i, j)], 1), (c[(i, j)], -1)], "<=", 0)
        # Eqs. 6-8: y_kij = e_ik AND e_jk
        for (k, i, j), idx in y.items():
            self._add_row("eq6", (k, i, j), [(idx, 1), (e[(i, k)], -1), (e[(j, k)], -1)], ">=", -1)
            self._add_row("eq7", (k, i, j), [(idx, 1), (e[(i, k)], -1)], "<=", 0)
            self._add_row("eq8", (k, i, j), [(idx, 1), (e[(j, k)], -1)], "<=", 0)
        # Eq. 9: no shared backup site for dependent senders
        for k in sites:
            terms = [(idx, 1) for (kk, i, j), idx in y.items() if kk == k and inst.dependent(i, j)]
            if terms:
                self._add_row("eq9", (k,), terms, "==", 0)
        # Eq. 10: b_j >= c_ij
        for i, j in pairs:
            self._add_row("eq10", (i, j), [(b[j], 1), (c[(i, j)], -1)], ">=", 0)
        # Eq. 11: B c_ij <= r_ij
        for i, j in pairs:
            self._add_row("eq11", (i, j), [(c[(i, j)], params.bandwidth_mbps), (r[(i, j)], -1)], "<=", 0)
        # Eq. 12: r_ij <= alpha W_ij - gamma B c_km s^km_ij
        for i, j in pairs:
            capacity = params.alpha * topology.capacity(i, j)
            self._add_row("eq12", (i, j), [(r[(i, j)], 1)], "<=", capacity)
            if params.gamma == 0:
                continue
            for k, m in inst.paths.pairs_through(i, j):
                self._add_row("eq12", (i, j, k, m),
                              [(r[(i, j)], 1), (c[(k, m)], params.bandwidth_mbps)], "<=", capacity)
        # Eq. 13: e_ij Delta_ij <= L_worst
        for i, j in pairs:
            self._add_row("eq13", (i, j), [(e[(i, j)], topology.latency(i, j))], "<=", params.lworst_ms)
        for i in sites:
            # Eq. 14: M u_i - (x_i + b_i) >= 0
            big_m = min(params.big_m, max(bounds.x[i] + bounds.b[i], 1))
            self._add_row("eq14", (i,), [(u[i], big_m), (x[i], -1), (b[i], -1)], ">=", 0)
            # Eq. 15: u_i <= x_i + b_i
            self._add_row("eq15", (i,), [(u[i], 1), (x[i], -1), (b[i], -1)], "<=", 0)
        # Eq. 16: sum u_i <= U_max
        umax = len(sites) if params.umax is None else params.umax
        self._add_row("eq16", (), [(u[i], 1) for i in sites], "<=", umax)

        objective = tuple([(x[i], 1.0) for i in sites] + [(b[i], -1.0) for i in sites])
        model = MILPModel(
            instance=inst,
            variables=tuple(self._variables),
            constraints=tuple(self._constraints),
            objective=objective,
            index=dict(self._index),
        )
        self.logger.info(f"Built placement model: {len(model.variables)} variables, "
                         f"{len(model.constraints)} constraints")
        return model


def build_model(topology: Topology, matrix: FailureIndependenceMatrix,
                paths: SecondaryPathSet, params: PlacementParams) -> MILPModel:
    """Validate the inputs as a PlacementInstance and build its model"""
    return PlacementModelBuilder(PlacementInstance(topology, matrix, paths, params)).build()
