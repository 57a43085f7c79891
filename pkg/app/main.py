from __future__ import annotations

import argparse
import asyncio
import logging
import math
import sys
from collections.abc import Sequence
from pathlib import Path

from pydantic import ValidationError

from app.config import Settings, SolverConfig, get_settings
from app.errors import SolverError
from app.logging_config import configure_logging
from app.models import PropertyReport
from app.services.collocation_matrices import build_matrices, property_report, property_violations
from app.services.convergence_service import fit_all, run_sweep, run_sweep_parallel
from app.services.export_service import (
    failed_property_report,
    render_convergence_csv,
    render_fit_summary,
    render_nodes_table,
    render_plot_script,
    render_properties_csv,
    render_solution_csv,
    render_solve_failure,
    render_solve_summary,
)
from app.services.kkt_system import control_at_initial_time, costate_at_initial_time
from app.services.ocp_model import PROBLEMS, get_problem, map_to_reference, time_map_for
from app.services.radau_basis import compute_lgr_scheme
from app.services.solver import solve
from app.utils.text import n_range, parse_n_list

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _positive_int(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer, got {raw!r}") from exc
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {value}")
    return value


def _n_list(raw: str) -> list[int]:
    try:
        values = parse_n_list(raw)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not values:
        raise argparse.ArgumentTypeError("expected at least one N")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radau", description="Flipped Radau pseudospectral optimal control")
    commands = parser.add_subparsers(dest="command", required=True)

    nodes = commands.add_parser("nodes", help="print collocation nodes and weights")
    nodes.add_argument("--n", type=_positive_int, required=True)

    properties = commands.add_parser("properties", help="norms of the inverse collocation matrices")
    properties.add_argument("--n", type=_n_list, default=None, help="comma-separated N values")
    properties.add_argument("--csv", type=Path, default=None)
    properties.add_argument("--parallel", action="store_true")

    solve_cmd = commands.add_parser("solve", help="solve a built-in problem")
    solve_cmd.add_argument("problem", choices=sorted(PROBLEMS))
    solve_cmd.add_argument("--n", type=_positive_int, required=True)
    solve_cmd.add_argument("--csv", type=Path, default=None)
    solve_cmd.add_argument("--extrapolate-initial", action="store_true")

    converge = commands.add_parser("converge", help="error study against the exact solution")
    converge.add_argument("problem", choices=sorted(PROBLEMS))
    converge.add_argument("--n-min", type=_positive_int, default=None)
    converge.add_argument("--n-max", type=_positive_int, default=None)
    converge.add_argument("--step", type=_positive_int, default=None)
    converge.add_argument("--csv", type=Path, default=None)
    converge.add_argument("--plot", type=Path, default=None)
    converge.add_argument("--parallel", action="store_true")

    for sub in (solve_cmd, converge):
        sub.add_argument("--tol", type=float, default=None)
        sub.add_argument("--max-iters", type=_positive_int, default=None)
        sub.add_argument("--allow-failure", action="store_true")
    return parser


def _emit(csv_payload: str, summary: str, csv_path: Path | None) -> None:
    if csv_path is not None:
        csv_path.write_text(csv_payload, encoding="utf-8")
        sys.stdout.write(summary)
    else:
        sys.stdout.write(csv_payload)
        sys.stderr.write(summary)


def _property_row(n_colloc: int) -> PropertyReport:
    try:
        return property_report(build_matrices(compute_lgr_scheme(n_colloc)))
    except SolverError:
        logger.exception("Property row failed", extra={"n_colloc": n_colloc})
        return failed_property_report(n_colloc)


async def _property_rows_parallel(n_values: list[int]) -> list[PropertyReport]:
    return list(await asyncio.gather(*(asyncio.to_thread(_property_row, n) for n in n_values)))


def cmd_nodes(args: argparse.Namespace, settings: Settings) -> int:
    sys.stdout.write(render_nodes_table(compute_lgr_scheme(args.n)))
    return EXIT_OK


def cmd_properties(args: argparse.Namespace, settings: Settings) -> int:
    n_values = args.n or settings.property_n_values
    if args.parallel:
        reports = asyncio.run(_property_rows_parallel(n_values))
    else:
        reports = [_property_row(n) for n in n_values]
    violations = property_violations([report for report in reports if not math.isnan(report.p1_norm)])
    summary = f"rows: {len(reports)}\nviolations: {len(violations)}\n"
    _emit(render_properties_csv(reports), summary, args.csv)
    return EXIT_OK


def _solver_config(args: argparse.Namespace, settings: Settings) -> SolverConfig:
    return settings.solver_config(residual_tol=args.tol, max_iters=args.max_iters)


def cmd_solve(args: argparse.Namespace, settings: Settings) -> int:
    problem, _ = get_problem(args.problem)
    cfg = _solver_config(args, settings)
    try:
        report = solve(problem, args.n, cfg)
    except SolverError as exc:
        logger.exception("Solve aborted", extra={"problem": args.problem, "n_colloc": args.n})
        sys.stderr.write(render_solve_failure(problem.name, args.n, exc))
        return EXIT_OK if args.allow_failure else EXIT_FAILURE

    initial_control = initial_costate = None
    if args.extrapolate_initial:
        p_ref = map_to_reference(problem)
        initial_costate = costate_at_initial_time(report.solution, report.scheme)
        try:
            initial_control = control_at_initial_time(report.solution, p_ref, report.scheme)
        except SolverError:
            logger.exception("Initial control estimate failed", extra={"problem": args.problem})

    csv_payload = render_solution_csv(
        report,
        time_map_for(problem),
        initial_control=initial_control,
        initial_costate=initial_costate,
    )
    _emit(csv_payload, render_solve_summary(problem.name, report), args.csv)
    if not report.converged and not args.allow_failure:
        return EXIT_FAILURE
    return EXIT_OK


def cmd_converge(args: argparse.Namespace, settings: Settings) -> int:
    if args.plot is not None and args.csv is None:
        raise ValueError("--plot reads the CSV, so it needs --csv")
    problem, exact = get_problem(args.problem)
    n_min, n_max, step = settings.converge_range
    n_values = n_range(
        args.n_min if args.n_min is not None else n_min,
        args.n_max if args.n_max is not None else n_max,
        args.step if args.step is not None else step,
    )
    cfg = _solver_config(args, settings)
    if args.parallel:
        rows = asyncio.run(run_sweep_parallel(problem, exact, n_values, cfg))
    else:
        rows = run_sweep(problem, exact, n_values, cfg)

    _emit(render_convergence_csv(rows), render_fit_summary(fit_all(rows), rows), args.csv)

    plot_path = args.plot
    if plot_path is None and args.csv is not None:
        plot_path = args.csv.with_name(f"{args.csv.stem}_plot.py")
    if plot_path is not None:
        plot_path.write_text(render_plot_script(str(args.csv), title=f"{problem.name}: error vs N"), encoding="utf-8")

    if any(not row.converged for row in rows) and not args.allow_failure:
        return EXIT_FAILURE
    return EXIT_OK


COMMANDS = {
    "nodes": cmd_nodes,
    "properties": cmd_properties,
    "solve": cmd_solve,
    "converge": cmd_converge,
}


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    settings = get_settings()
    configure_logging(settings.LOG_LEVEL)
    try:
        return COMMANDS[args.command](args, settings)
    except (ValueError, ValidationError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
