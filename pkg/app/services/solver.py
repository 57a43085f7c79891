from __future__ import annotations

import logging
from typing import Literal

import numpy as np
from scipy.linalg import lu_solve, null_space

from app.config import SolverConfig
from app.errors import KktEvaluationError, SolverError
from app.models import (
    CollocationMatrices,
    CollocationScheme,
    DiscreteSolution,
    OcpProblem,
    SolveReport,
    StepRecord,
)
from app.services.collocation_matrices import build_matrices
from app.services.kkt_system import (
    jacobian,
    pack_solution,
    pointwise_blocks,
    require_reference,
    residual,
    unpack_solution,
)
from app.services.ocp_model import check_problem, map_to_reference
from app.services.radau_basis import basis_matrix, compute_lgr_scheme, lagrange_basis
from app.utils.linalg import checked_lu, is_positive_definite

logger = logging.getLogger(__name__)

SecondOrderMode = Literal["reduced", "blocks"]


def interpolate_solution(
    s: DiscreteSolution,
    from_scheme: CollocationScheme,
    to_scheme: CollocationScheme,
) -> DiscreteSolution:
    if s.n_colloc != from_scheme.n_colloc:
        raise ValueError(f"solution has N={s.n_colloc}, source scheme has N={from_scheme.n_colloc}")
    state_map = basis_matrix(lagrange_basis(from_scheme.nodes), to_scheme.nodes)
    colloc_map = basis_matrix(lagrange_basis(from_scheme.collocation_nodes), to_scheme.collocation_nodes)
    return DiscreteSolution(
        state=state_map @ s.state,
        control=colloc_map @ s.control,
        costate=colloc_map @ s.costate,
        costate0=np.array(s.costate0, dtype=float),
    )


def initial_guess(
    p_ref: OcpProblem,
    scheme: CollocationScheme,
    warm_start: DiscreteSolution | None = None,
) -> DiscreteSolution:
    if warm_start is not None:
        return interpolate_solution(warm_start, compute_lgr_scheme(warm_start.n_colloc), scheme)
    N = scheme.n_colloc
    x0 = np.asarray(p_ref.x0, dtype=float)
    # a zero costate leaves the Jacobian singular whenever the cost Hessian vanishes
    lam0 = np.asarray(p_ref.cost_grad(x0), dtype=float)
    return DiscreteSolution(
        state=np.tile(x0, (N + 1, 1)),
        control=np.zeros((N, p_ref.control_dim)),
        costate=np.tile(lam0, (N, 1)),
        costate0=lam0.copy(),
    )


def _lagrangian_hessian(p_ref: OcpProblem, matrices: CollocationMatrices, s: DiscreteSolution) -> np.ndarray:
    n, k, N = p_ref.state_dim, p_ref.control_dim, matrices.n_colloc
    blocks = pointwise_blocks(p_ref, s, n, k, N)
    weights = matrices.scheme.weights
    iu = (N + 1) * n
    hessian = np.zeros((iu + N * k, iu + N * k))
    for i in range(N):
        xs = slice((i + 1) * n, (i + 2) * n)
        us = slice(iu + i * k, iu + (i + 1) * k)
        hessian[xs, xs] += weights[i] * blocks.Q[i]
        hessian[xs, us] += weights[i] * blocks.S[i]
        hessian[us, xs] += weights[i] * blocks.S[i].T
        hessian[us, us] += weights[i] * blocks.R[i]
    hessian[N * n : iu, N * n : iu] += blocks.T
    return hessian


def verify_second_order(
    p_ref: OcpProblem,
    s: DiscreteSolution,
    matrices: CollocationMatrices,
    *,
    mode: SecondOrderMode = "reduced",
) -> bool:
    """Positive definiteness of the Lagrangian Hessian.

    ``blocks`` tests every per-node (x, u) block on its own; ``reduced`` tests the
    Hessian restricted to the null space of the linearized dynamics and initial
    condition.
    """
    require_reference(p_ref)
    n, k, N = p_ref.state_dim, p_ref.control_dim, matrices.n_colloc
    hessian = _lagrangian_hessian(p_ref, matrices, s)
    iu = (N + 1) * n

    if mode == "blocks":
        for i in range(N):
            idx = np.r_[(i + 1) * n : (i + 2) * n, iu + i * k : iu + (i + 1) * k]
            if not is_positive_definite(hessian[np.ix_(idx, idx)]):
                return False
        return True
    if mode != "reduced":
        raise ValueError(f"unknown second-order mode {mode!r}")

    constraint_rows = N * n + n
    kkt = jacobian(p_ref, matrices, s).matrix
    basis = null_space(kkt[:constraint_rows, : iu + N * k])
    return is_positive_definite(basis.T @ hessian @ basis)


def _trial_residual(p_ref: OcpProblem, matrices: CollocationMatrices, z: np.ndarray, dims: dict[str, int]) -> float:
    try:
        return residual(p_ref, matrices, unpack_solution(z, **dims)).sup_norm
    except KktEvaluationError:
        return np.inf


def _newton(
    p_ref: OcpProblem,
    scheme: CollocationScheme,
    guess: DiscreteSolution,
    cfg: SolverConfig,
) -> tuple[DiscreteSolution, list[StepRecord], float, bool]:
    n_colloc = scheme.n_colloc
    matrices = build_matrices(scheme)
    dims = {"n": p_ref.state_dim, "m": p_ref.control_dim, "N": n_colloc}

    z = pack_solution(guess)
    current = residual(p_ref, matrices, guess).sup_norm
    history = [StepRecord(iteration=0, residual=current, step=0.0)]
    iterations = 0
    converged = current <= cfg.residual_tol

    while not converged and iterations < cfg.max_iters:
        iterate = unpack_solution(z, **dims)
        res = residual(p_ref, matrices, iterate)
        label = f"KKT Jacobian (problem={p_ref.name}, N={n_colloc}, iteration={iterations + 1})"
        factors = checked_lu(jacobian(p_ref, matrices, iterate).matrix, label=label)
        direction = lu_solve(factors, -res.as_vector())

        step = 1.0
        trial = _trial_residual(p_ref, matrices, z + direction, dims)
        while not trial < current and step * cfg.damping >= cfg.min_step:
            step *= cfg.damping
            trial = _trial_residual(p_ref, matrices, z + step * direction, dims)
        if not trial < current:
            logger.warning(
                "Newton backtracking stalled",
                extra={"problem": p_ref.name, "n_colloc": n_colloc, "iteration": iterations + 1, "residual": current},
            )
            break

        z = z + step * direction
        iterations += 1
        logger.debug(
            "Newton step accepted",
            extra={
                "problem": p_ref.name,
                "n_colloc": n_colloc,
                "iteration": iterations,
                "residual": trial,
                "step": step,
                "quadratic_ratio": trial / current**2 if current > 0 else 0.0,
            },
        )
        current = trial
        history.append(StepRecord(iteration=iterations, residual=current, step=step))
        converged = current <= cfg.residual_tol

    return unpack_solution(z, **dims), history, current, converged


def continuation_guess(p_ref: OcpProblem, n_colloc: int, cfg: SolverConfig) -> DiscreteSolution | None:
    """Solve N = 1, 2, ..., n_colloc - 1 in turn, each started from the previous solution."""
    warm: DiscreteSolution | None = None
    for n in range(1, n_colloc):
        scheme = compute_lgr_scheme(n)
        try:
            solution, _, current, converged = _newton(p_ref, scheme, initial_guess(p_ref, scheme, warm), cfg)
        except SolverError:
            logger.exception("Continuation stage failed", extra={"problem": p_ref.name, "n_colloc": n})
            continue
        if converged:
            warm = solution
        else:
            logger.warning(
                "Continuation stage did not converge",
                extra={"problem": p_ref.name, "n_colloc": n, "residual": current},
            )
    return warm


def solve(problem: OcpProblem, n_colloc: int, cfg: SolverConfig | None = None) -> SolveReport:
    cfg = cfg or SolverConfig()
    check_problem(problem)
    p_ref = map_to_reference(problem)
    scheme = compute_lgr_scheme(n_colloc)

    warm = cfg.warm_start
    if warm is None and cfg.continuation:
        warm = continuation_guess(p_ref, n_colloc, cfg)
    solution, history, current, converged = _newton(p_ref, scheme, initial_guess(p_ref, scheme, warm), cfg)

    report = SolveReport(
        solution=solution,
        scheme=scheme,
        iterations=len(history) - 1,
        final_residual=current,
        converged=converged,
        step_history=history,
    )
    if converged:
        matrices = build_matrices(scheme)
        report.hessian_spd = verify_second_order(p_ref, solution, matrices, mode="reduced")
        report.block_hessian_spd = verify_second_order(p_ref, solution, matrices, mode="blocks")

    logger.info(
        "Solve finished",
        extra={
            "problem": p_ref.name,
            "n_colloc": n_colloc,
            "iterations": report.iterations,
            "residual": current,
            "converged": converged,
            "hessian_spd": report.hessian_spd,
        },
    )
    return report
