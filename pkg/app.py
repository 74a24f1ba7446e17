"""
Backup-server placement planner - command-line entry point

Places primary and shared backup servers across a WAN in two steps:
secondary paths for every replication link, then an integer program
that maximizes primary servers net of backups.
"""

import argparse
import csv
import io
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from evaluation_suite import EvaluationSuite, SweepGrid, model_solver  # noqa: E402
from failure.independence import build_independence_matrix  # noqa: E402
from metrics.report import (  # noqa: E402
    ReportError,
    build_metrics,
    emit_report,
    render_report,
    write_latency_csv,
    write_sweep_csv,
    write_text,
)
from placement.model import (  # noqa: E402
    PlacementInstance,
    PlacementModelBuilder,
    PlacementParams,
    variable_bounds,
)
from placement.solution import check_solution  # noqa: E402
from routing.secondary_paths import compute_secondary_paths  # noqa: E402
from solver.branch_and_bound import DEFAULT_TIME_LIMIT_S, solve_exact  # noqa: E402
from solver.greedy import solve_greedy  # noqa: E402
from solver.oracle import brute_force_oracle  # noqa: E402
from solver.outcome import SolveOutcome, SolverError, SolverTimeoutError  # noqa: E402
from topology.loader import load_topology  # noqa: E402

logger = logging.getLogger("app")

EXIT_OK = 0
EXIT_INVALID_INPUT = 2
EXIT_TIMEOUT = 3
EXIT_INTERNAL = 4

SOLVERS = ("exact", "greedy", "oracle")
INSPECT_TARGETS = ("matrix", "paths", "bounds", "model")
LATENCY_CSV_NAME = "secondary_latency.csv"


@dataclass(frozen=True)
class RunConfig:
    command: str
    topology: Path
    params: Optional[PlacementParams] = None
    solver: str = "exact"
    time_limit_s: float = DEFAULT_TIME_LIMIT_S
    out: Optional[Path] = None
    csv: Optional[Path] = None
    lp: Optional[Path] = None
    what: str = "matrix"
    alphas: Tuple[float, ...] = ()
    lworst_values: Tuple[float, ...] = ()
    gammas: Tuple[int, ...] = ()
    bandwidth_mbps: float = 240.0
    umax: Optional[int] = None
    show_progress: bool = True


def parse_umax(text: str) -> Optional[int]:
    """argparse type for --umax: a positive integer or the word unbounded"""
    if text == "unbounded":
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer or 'unbounded', got '{text}'")
    if value < 1:
        raise argparse.ArgumentTypeError(f"umax must be at least 1, got {value}")
    return value


def _float_list(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _gamma_list(text: str) -> Tuple[int, ...]:
    values = _float_list(text)
    if any(value not in (0, 1) for value in values):
        raise argparse.ArgumentTypeError(f"gamma values must be 0 or 1, got '{text}'")
    return tuple(int(value) for value in values)


def build_parser() -> argparse.ArgumentParser:
    """Command-line parser with the place, sweep and inspect subcommands"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--topology", required=True, type=Path, help="topology JSON file")
    common.add_argument("--alpha", type=float, help="fraction of each link reserved for replication")
    common.add_argument("--lworst-ms", type=float, help="largest tolerated replication-link latency")
    common.add_argument("--gamma", type=int, choices=(0, 1), default=1,
                        help="1 reserves secondary-path bandwidth (default), 0 ignores it")
    common.add_argument("--bandwidth-mbps", type=float, default=240.0, help="replication bandwidth per server")
    common.add_argument("--umax", type=parse_umax, default=None, help="max active sites, or 'unbounded'")
    common.add_argument("--log-level", default="WARNING",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"))

    parser = argparse.ArgumentParser(prog="app.py", description=__doc__.strip().splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)

    place = commands.add_parser("place", parents=[common], help="solve one placement")
    place.add_argument("--solver", choices=SOLVERS, default="exact")
    place.add_argument("--time-limit-s", type=float, default=DEFAULT_TIME_LIMIT_S)
    place.add_argument("--out", type=Path, help="report path (default: standard output)")
    place.add_argument("--lp", type=Path, help="also write the model in LP format")

    sweep = commands.add_parser("sweep", parents=[common], help="solve a parameter grid")
    sweep.add_argument("--alpha-list", type=_float_list)
    sweep.add_argument("--lworst-list", type=_float_list)
    sweep.add_argument("--gamma-list", type=_gamma_list)
    sweep.add_argument("--solver", choices=SOLVERS, default="exact")
    sweep.add_argument("--time-limit-s", type=float, default=DEFAULT_TIME_LIMIT_S)
    sweep.add_argument("--out", type=Path, help="directory for per-cell reports")
    sweep.add_argument("--csv", type=Path, help="sweep CSV path (default: standard output)")
    sweep.add_argument("--no-progress", action="store_true", help="hide the progress bar")

    inspect = commands.add_parser("inspect", parents=[common], help="dump an intermediate result")
    inspect.add_argument("--what", choices=INSPECT_TARGETS, default="matrix")
    inspect.add_argument("--out", type=Path, help="output path (default: standard output)")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Validate flag combinations; raises ValueError on invalid input"""
    base = dict(
        command=args.command,
        topology=args.topology,
        bandwidth_mbps=args.bandwidth_mbps,
        umax=args.umax,
        out=args.out,
    )
    if args.command == "place":
        if args.alpha is None or args.lworst_ms is None:
            raise ValueError("place needs --alpha and --lworst-ms")
        params = PlacementParams(alpha=args.alpha, lworst_ms=args.lworst_ms, bandwidth_mbps=args.bandwidth_mbps,
                                 umax=args.umax, use_secondary_paths=args.gamma)
        return RunConfig(params=params, solver=args.solver, time_limit_s=args.time_limit_s, lp=args.lp, **base)

    if args.command == "sweep":
        alphas = args.alpha_list or ((args.alpha,) if args.alpha is not None else ())
        lworst_values = args.lworst_list or ((args.lworst_ms,) if args.lworst_ms is not None else ())
        gammas = args.gamma_list or (args.gamma,)
        if not alphas or not lworst_values:
            raise ValueError("sweep needs --alpha-list (or --alpha) and --lworst-list (or --lworst-ms)")
        return RunConfig(solver=args.solver, time_limit_s=args.time_limit_s, csv=args.csv,
                         alphas=tuple(alphas), lworst_values=tuple(lworst_values), gammas=tuple(gammas),
                         show_progress=not args.no_progress, **base)

    params = None
    if args.what in ("bounds", "model"):
        if args.alpha is None:
            raise ValueError(f"inspect --what {args.what} needs --alpha")
        if args.what == "model" and args.lworst_ms is None:
            raise ValueError("inspect --what model needs --lworst-ms")
        params = PlacementParams(alpha=args.alpha, lworst_ms=args.lworst_ms or 0.0,
                                 bandwidth_mbps=args.bandwidth_mbps, umax=args.umax,
                                 use_secondary_paths=args.gamma)
    return RunConfig(params=params, what=args.what, **base)


def oracle_max_c(instance: PlacementInstance) -> int:
    return max(instance.bounds.c.values(), default=0)


def solve_instance(instance: PlacementInstance, solver: str, time_limit_s: float) -> SolveOutcome:
    """Run the selected backend (exact, oracle or greedy) on one instance"""
    if solver == "oracle":
        return brute_force_oracle(instance.topology, instance.matrix, instance.paths, instance.params,
                                  max_c=oracle_max_c(instance))
    model = PlacementModelBuilder(instance).build()
    if solver == "greedy":
        return solve_greedy(model)
    return solve_exact(model, time_limit=time_limit_s)


def cmd_place(config: RunConfig) -> int:
    """Solve one placement, verify it and emit the JSON report"""
    topology = load_topology(config.topology)
    matrix = build_independence_matrix(topology)
    paths = compute_secondary_paths(topology)
    instance = PlacementInstance(topology, matrix, paths, config.params)

    if config.lp is not None:
        write_text(PlacementModelBuilder(instance).build().to_lp_text(), config.lp)
        logger.info(f"Model written to {config.lp}")

    outcome = solve_instance(instance, config.solver, config.time_limit_s)
    violations = check_solution(outcome.solution, topology, matrix, paths, config.params)
    if violations:
        for violation in violations:
            logger.error(f"Solution check failed: {violation}")
        return EXIT_INTERNAL

    metrics = build_metrics(outcome, instance)
    fraction = metrics.latency.fraction_meeting
    logger.info(f"Secondary paths meeting {config.params.lworst_ms:g} ms: "
                f"{'n/a' if fraction is None else f'{fraction:.4f}'} "
                f"({metrics.latency.absent_pairs} replicating pair(s) without one)")
    emit_report(metrics, config.out)
    return EXIT_OK


def cell_report_name(alpha: float, lworst_ms: float, gamma: int) -> str:
    return f"cell_alpha{alpha:g}_lworst{lworst_ms:g}_gamma{gamma}.json"


def cmd_sweep(config: RunConfig) -> int:
    """Run the parameter grid and write the sweep CSV and per-cell reports"""
    topology = load_topology(config.topology)
    grid = SweepGrid(alphas=config.alphas, lworst_values=config.lworst_values, gammas=config.gammas)

    if config.solver == "oracle":
        def solve(instance):
            return brute_force_oracle(instance.topology, instance.matrix, instance.paths, instance.params,
                                      max_c=oracle_max_c(instance))
    elif config.solver == "greedy":
        solve = model_solver(solve_greedy)
    else:
        solve = model_solver(lambda model: solve_exact(model, time_limit=config.time_limit_s))

    suite = EvaluationSuite(topology, solve, bandwidth_mbps=config.bandwidth_mbps, umax=config.umax,
                            show_progress=config.show_progress)
    result = suite.run(grid)

    if config.out is not None:
        for key, metrics in suite.reports.items():
            write_text(render_report(metrics), config.out / cell_report_name(*key))
        write_latency_csv(result, config.out / LATENCY_CSV_NAME)
    write_sweep_csv(result, config.csv)
    return EXIT_OK


def bounds_csv(rows: Sequence[Tuple[str, str, str, int]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["variable", "i", "j", "upper_bound"])
    writer.writerows(rows)
    return buffer.getvalue()


def cmd_inspect(config: RunConfig) -> int:
    """Print an intermediate artifact: matrix, paths, bounds or model"""
    topology = load_topology(config.topology)
    if config.what == "matrix":
        text = build_independence_matrix(topology).to_csv()
    elif config.what == "paths":
        lines = compute_secondary_paths(topology).to_lines()
        text = "".join(line + "\n" for line in lines)
    elif config.what == "bounds":
        text = bounds_csv(variable_bounds(topology, config.params).to_rows())
    else:
        instance = PlacementInstance(topology, build_independence_matrix(topology),
                                     compute_secondary_paths(topology), config.params)
        text = PlacementModelBuilder(instance).build().to_lp_text()
    write_text(text, config.out)
    return EXIT_OK


COMMANDS = {"place": cmd_place, "sweep": cmd_sweep, "inspect": cmd_inspect}


def main(argv: Optional[List[str]] = None) -> int:
    """CLI entry point; returns the process exit code"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = config_from_args(args)
        return COMMANDS[config.command](config)
    except SolverTimeoutError as e:
        logger.error(f"Solver timeout: {e}")
        return EXIT_TIMEOUT
    except (ValueError, ReportError) as e:
        # TopologyError, ModelError and OracleGuardError are ValueErrors
        logger.error(str(e))
        return EXIT_INVALID_INPUT
    except SolverError as e:
        logger.error(f"Solver failure: {e}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
