import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from placement.model import PlacementInstance, PlacementParams
from placement.solution import PlacementSolution
from routing.secondary_paths import SecondaryPathSet
from solver.outcome import SolveOutcome

logger = logging.getLogger(__name__)

NOT_APPLICABLE = "NOT-APPLICABLE"
ABSENT = "ABSENT"

SWEEP_HEADER = ["alpha", "lworst_ms", "gamma", "total_primary", "total_backup", "server_efficiency", "status"]
LATENCY_HEADER = ["alpha", "lworst_ms", "gamma", "replicating_pairs", "absent_pairs", "fraction_meeting_lworst"]


class ReportError(OSError):
    """A report or CSV could not be written"""


def server_efficiency(solution: PlacementSolution) -> Optional[float]:
    """1 - sum(b) / sum(x); None when no primary server is placed"""
    if solution.total_primary == 0:
        return None
    return 1.0 - solution.total_backup / solution.total_primary


def capacity_reduction(s: int, s_prime: int) -> Optional[float]:
    """
    Fraction of primary servers lost by reserving secondary-path bandwidth:
    1 - S/S', with S placed under gamma = 1 and S' under gamma = 0.
    """
    if s_prime == 0:
        return None
    if s < 0 or s > s_prime:
        raise ValueError(f"primary count with secondary paths ({s}) exceeds the count without ({s_prime})")
    return 1.0 - s / s_prime


@dataclass(frozen=True)
class LatencyStats:
    samples: Tuple[float, ...]
    cdf: Tuple[Tuple[float, float], ...]
    fraction_meeting: Optional[float]
    absent_pairs: int


def empirical_cdf(samples) -> List[Tuple[float, float]]:
    """Right-continuous step points (value, fraction <= value)"""
    if len(samples) == 0:
        return []
    values, counts = np.unique(np.asarray(samples, dtype=float), return_counts=True)
    fractions = np.cumsum(counts) / len(samples)
    return [(float(v), float(f)) for v, f in zip(values, fractions)]


def secondary_latency_stats(solution: PlacementSolution, paths: SecondaryPathSet,
                            lworst_ms: float) -> LatencyStats:
    """Secondary-path latency over replicating pairs; ABSENT paths are counted, not sampled"""
    samples = []
    absent = 0
    for (i, j), flag in solution.e.items():
        if not flag:
            continue
        path = paths.get(i, j)
        if path is None:
            absent += 1
            continue
        samples.append(path.latency_ms)
    samples.sort()

    fraction = None
    if samples:
        fraction = float(np.count_nonzero(np.asarray(samples) <= lworst_ms)) / len(samples)
    return LatencyStats(
        samples=tuple(samples),
        cdf=tuple(empirical_cdf(samples)),
        fraction_meeting=fraction,
        absent_pairs=absent,
    )


@dataclass(frozen=True)
class MetricsReport:
    params: PlacementParams
    status: str
    total_primary: int
    total_backup: int
    active_sites: int
    objective: int
    server_efficiency: Optional[float]
    placement: Tuple[Dict[str, Any], ...]
    replications: Tuple[Dict[str, Any], ...]
    latency: LatencyStats


def build_metrics(outcome: SolveOutcome, instance: PlacementInstance) -> MetricsReport:
    """Collect totals, efficiency and secondary-path latency statistics for one outcome"""
    solution = outcome.solution
    topology = instance.topology
    placement = tuple(
        {"site": site, "x": solution.x.get(site, 0), "b": solution.b.get(site, 0)}
        for site in instance.site_ids
    )
    replications = []
    for i, j in instance.pairs:
        count = solution.c.get((i, j), 0)
        if count <= 0:
            continue
        path = instance.paths.get(i, j)
        replications.append({
            "from": i,
            "to": j,
            "count": count,
            "link_latency_ms": topology.latency(i, j),
            "secondary_latency_ms": ABSENT if path is None else path.latency_ms,
        })
    return MetricsReport(
        params=instance.params,
        status=outcome.status.value,
        total_primary=solution.total_primary,
        total_backup=solution.total_backup,
        active_sites=solution.active_sites,
        objective=solution.objective,
        server_efficiency=server_efficiency(solution),
        placement=placement,
        replications=tuple(replications),
        latency=secondary_latency_stats(solution, instance.paths, instance.params.lworst_ms),
    )


def _or_not_applicable(value):
    return NOT_APPLICABLE if value is None else value


def report_payload(metrics: MetricsReport) -> Dict[str, Any]:
    return {
        "params": metrics.params.to_dict(),
        "status": metrics.status,
        "totals": {
            "primary": metrics.total_primary,
            "backup": metrics.total_backup,
            "active_sites": metrics.active_sites,
            "objective": metrics.objective,
        },
        "server_efficiency": _or_not_applicable(metrics.server_efficiency),
        "placement": [dict(row) for row in metrics.placement],
        "replications": [dict(row) for row in metrics.replications],
        "secondary_cdf": [[latency, fraction] for latency, fraction in metrics.latency.cdf],
    }


def render_report(metrics: MetricsReport) -> str:
    """Deterministic JSON report text"""
    return json.dumps(report_payload(metrics), indent=2) + "\n"


def write_text(text: str, destination: Optional[Union[str, Path]]):
    if destination is None or str(destination) == "-":
        sys.stdout.write(text)
        return
    path = Path(destination)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise ReportError(f"cannot write {path}: {e.strerror or e}") from e


def emit_report(metrics: MetricsReport, destination: Optional[Union[str, Path]] = None) -> str:
    """Serialize a run report as JSON; None or '-' writes to standard output"""
    text = render_report(metrics)
    write_text(text, destination)
    if destination not in (None, "-"):
        logger.info(f"Report written to {destination}")
    return text


@dataclass
class SweepCell:
    alpha: float
    lworst_ms: float
    gamma: int
    status: str
    total_primary: Optional[int] = None
    total_backup: Optional[int] = None
    server_efficiency: Optional[float] = None
    capacity_reduction: Optional[float] = None
    replicating_pairs: int = 0
    absent_pairs: int = 0
    fraction_meeting: Optional[float] = None
    error: Optional[str] = None

    @property
    def key(self) -> Tuple[float, float, int]:
        return self.alpha, self.lworst_ms, self.gamma


@dataclass
class SweepResult:
    """One cell per (alpha, lworst_ms, gamma), in grid order"""
    cells: List[SweepCell] = field(default_factory=list)
    gammas: Tuple[int, ...] = ()

    @property
    def has_capacity_reduction(self) -> bool:
        return {0, 1} <= set(self.gammas)

    def cell(self, alpha: float, lworst_ms: float, gamma: int) -> Optional[SweepCell]:
        for cell in self.cells:
            if cell.key == (alpha, lworst_ms, gamma):
                return cell
        return None


def _fixed(value: Optional[float]) -> str:
    return NOT_APPLICABLE if value is None else f"{value:.4f}"


def _count(value: Optional[int]) -> str:
    return NOT_APPLICABLE if value is None else str(value)


def sweep_csv(result: SweepResult) -> str:
    """One CSV row per grid cell, in grid order"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    header = list(SWEEP_HEADER)
    if result.has_capacity_reduction:
        header.append("capacity_reduction")
    writer.writerow(header)
    for cell in result.cells:
        row = [
            f"{cell.alpha:g}",
            f"{cell.lworst_ms:g}",
            cell.gamma,
            _count(cell.total_primary),
            _count(cell.total_backup),
            _fixed(cell.server_efficiency),
            cell.status,
        ]
        if result.has_capacity_reduction:
            row.append(_fixed(cell.capacity_reduction))
        writer.writerow(row)
    return buffer.getvalue()


def latency_csv(result: SweepResult) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(LATENCY_HEADER)
    for cell in result.cells:
        writer.writerow([
            f"{cell.alpha:g}",
            f"{cell.lworst_ms:g}",
            cell.gamma,
            cell.replicating_pairs,
            cell.absent_pairs,
            _fixed(cell.fraction_meeting),
        ])
    return buffer.getvalue()


def write_sweep_csv(result: SweepResult, destination: Optional[Union[str, Path]] = None) -> str:
    text = sweep_csv(result)
    write_text(text, destination)
    return text


def write_latency_csv(result: SweepResult, destination: Union[str, Path]) -> str:
    text = latency_csv(result)
    write_text(text, destination)
    return text
