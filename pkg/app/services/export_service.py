from __future__ import annotations

import csv
import io
import math
from collections.abc import Iterable

import numpy as np

from app.models import (
    CollocationScheme,
    ConvergenceRow,
    PropertyReport,
    SlopeFit,
    SolveReport,
    TimeMap,
)
from app.utils.text import format_float, format_row

PROPERTY_COLUMNS = ["N", "p1_norm", "p2_row_norm_max", "p3_norm", "p4_row_norm_max"]
CONVERGENCE_COLUMNS = ["N", "err_state", "err_control", "err_costate", "residual", "iterations"]


def render_nodes_table(scheme: CollocationScheme) -> str:
    lines = ["tau, omega", f"{format_float(scheme.nodes[0], 16)}, not collocated"]
    for tau, weight in zip(scheme.collocation_nodes, scheme.weights):
        lines.append(", ".join(format_row([tau, weight], 16)))
    lines.append(f"sum, {format_float(float(np.sum(scheme.weights)), 16)}")
    return "\n".join(lines) + "\n"


def failed_property_report(n_colloc: int) -> PropertyReport:
    nan = math.nan
    return PropertyReport(N=n_colloc, p1_norm=nan, p2_row_norm_max=nan, p3_norm=nan, p4_row_norm_max=nan)


def render_properties_csv(reports: Iterable[PropertyReport]) -> str:
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(PROPERTY_COLUMNS)
    for report in reports:
        values = [report.p1_norm, report.p2_row_norm_max, report.p3_norm, report.p4_row_norm_max]
        writer.writerow([report.N, *format_row(values)])
    return output.getvalue()


def render_solution_csv(
    report: SolveReport,
    time_map: TimeMap,
    *,
    initial_control: np.ndarray | None = None,
    initial_costate: np.ndarray | None = None,
) -> str:
    s = report.solution
    n, m = s.state_dim, s.control_dim
    nodes = report.scheme.nodes
    times = np.asarray(time_map.to_physical(nodes), dtype=float)

    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(
        ["tau", "t"]
        + [f"x{j + 1}" for j in range(n)]
        + [f"u{j + 1}" for j in range(m)]
        + [f"lambda{j + 1}" for j in range(n)]
    )

    first = format_row([nodes[0], times[0], *s.state[0]])
    first += format_row(initial_control) if initial_control is not None else [""] * m
    first += format_row(initial_costate) if initial_costate is not None else [""] * n
    writer.writerow(first)
    for i in range(s.n_colloc):
        writer.writerow(
            format_row([nodes[i + 1], times[i + 1], *s.state[i + 1], *s.control[i], *s.costate[i]])
        )
    return output.getvalue()


def render_convergence_csv(rows: Iterable[ConvergenceRow]) -> str:
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(CONVERGENCE_COLUMNS)
    for row in rows:
        values = [row.err_state, row.err_control, row.err_costate, row.residual]
        writer.writerow([row.N, *format_row(values), row.iterations])
    return output.getvalue()


def render_fit_summary(fits: Iterable[SlopeFit], rows: Iterable[ConvergenceRow] = ()) -> str:
    lines = []
    for fit in fits:
        lines.append(
            f"{fit.which}: alpha={fit.alpha:.4f} c={fit.c:.4f} r_squared={fit.r_squared:.4f} points={fit.points}"
        )
    failed = [row.N for row in rows if not row.converged]
    if failed:
        lines.append(f"not converged (excluded from fits): N={', '.join(str(n) for n in failed)}")
    return "\n".join(lines) + "\n"


def render_solve_summary(problem_name: str, report: SolveReport) -> str:
    status = "converged" if report.converged else "NOT converged"
    lines = [
        f"problem: {problem_name}",
        f"N: {report.scheme.n_colloc}",
        f"status: {status}",
        f"iterations: {report.iterations}",
        f"final_residual: {format_float(report.final_residual, 6)}",
        f"hessian_spd (reduced): {report.hessian_spd}",
        f"hessian_spd (blocks): {report.block_hessian_spd}",
    ]
    return "\n".join(lines) + "\n"


def render_solve_failure(problem_name: str, n_colloc: int, error: Exception) -> str:
    lines = [
        f"problem: {problem_name}",
        f"N: {n_colloc}",
        "status: NOT converged",
        f"error: {error}",
    ]
    return "\n".join(lines) + "\n"


_PLOT_TEMPLATE = '''"""Plot log10 sup-norm errors against N from {csv_name}."""
import csv
import math

import matplotlib.pyplot as plt

ns, series = [], {{"err_state": [], "err_control": [], "err_costate": []}}
with open({csv_name!r}, newline="", encoding="utf-8") as handle:
    for row in csv.DictReader(handle):
        ns.append(int(row["N"]))
        for key, values in series.items():
            value = float(row[key])
            values.append(math.log10(value) if value > 0 else float("nan"))

for key, values in series.items():
    plt.plot(ns, values, marker="o", label=key.removeprefix("err_"))
plt.xlabel("N")
plt.ylabel("log10 sup-norm error")
plt.title({title!r})
plt.legend()
plt.grid(True)
plt.savefig({image_name!r}, dpi=150)
'''


def render_plot_script(csv_name: str, *, title: str) -> str:
    image_name = csv_name.rsplit(".", 1)[0] + ".png"
    return _PLOT_TEMPLATE.format(csv_name=csv_name, title=title, image_name=image_name)
