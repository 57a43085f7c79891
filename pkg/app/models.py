from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

Vector = np.ndarray
Matrix = np.ndarray

DynamicsFn = Callable[[Vector, Vector], Vector]
JacobianFn = Callable[[Vector, Vector], Matrix]
HamiltonianHessianFn = Callable[[Vector, Vector, Vector], Matrix]
CostFn = Callable[[Vector], float]
CostGradFn = Callable[[Vector], Vector]
CostHessFn = Callable[[Vector], Matrix]
TrajectoryFn = Callable[[np.ndarray], np.ndarray]


def _block_norms(rows: np.ndarray) -> np.ndarray:
    rows = np.atleast_2d(rows)
    if rows.size == 0:
        return np.zeros(rows.shape[0])
    return np.linalg.norm(rows, axis=1)


@dataclass(frozen=True)
class CollocationScheme:
    """Flipped Radau rule: nodes tau_0 = -1 (not collocated), tau_1..tau_N with tau_N = +1."""

    n_colloc: int
    nodes: Vector
    weights: Vector

    @property
    def collocation_nodes(self) -> Vector:
        return self.nodes[1:]


@dataclass(frozen=True)
class LagrangeBasis:
    support_nodes: Vector
    barycentric_weights: Vector

    @property
    def size(self) -> int:
        return int(self.support_nodes.shape[0])


@dataclass(frozen=True)
class CollocationMatrices:
    D: Matrix
    D_tail: Matrix
    D_dagger: Matrix
    D_ddagger: Matrix
    scheme: CollocationScheme

    @property
    def n_colloc(self) -> int:
        return self.scheme.n_colloc


@dataclass(frozen=True)
class PropertyReport:
    N: int
    p1_norm: float
    p2_row_norm_max: float
    p3_norm: float
    p4_row_norm_max: float
    p3_row: int = 0
    p4_row: int = 0


@dataclass(frozen=True)
class OcpProblem:
    name: str
    state_dim: int
    control_dim: int
    horizon: tuple[float, float]
    x0: Vector
    dynamics: DynamicsFn
    dynamics_jac_x: JacobianFn
    dynamics_jac_u: JacobianFn
    hamiltonian_xx: HamiltonianHessianFn
    hamiltonian_xu: HamiltonianHessianFn
    hamiltonian_uu: HamiltonianHessianFn
    cost: CostFn
    cost_grad: CostGradFn
    cost_hess: CostHessFn


@dataclass(frozen=True)
class TimeMap:
    t0: float
    tf: float

    @property
    def scale(self) -> float:
        return (self.tf - self.t0) / 2.0

    def to_physical(self, tau: np.ndarray | float) -> np.ndarray | float:
        return self.t0 + self.scale * (np.asarray(tau) + 1.0)

    def to_reference(self, t: np.ndarray | float) -> np.ndarray | float:
        return (np.asarray(t) - self.t0) / self.scale - 1.0


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form optimum on the physical horizon; each callback maps times (k,) to values (k, dim)."""

    state: TrajectoryFn
    control: TrajectoryFn
    costate: TrajectoryFn
    state_rate: TrajectoryFn | None = None
    costate_rate: TrajectoryFn | None = None


@dataclass(frozen=True)
class DiscreteSolution:
    state: Matrix
    control: Matrix
    costate: Matrix
    costate0: Vector

    @property
    def n_colloc(self) -> int:
        return int(self.control.shape[0])

    @property
    def state_dim(self) -> int:
        return int(self.state.shape[1])

    @property
    def control_dim(self) -> int:
        return int(self.control.shape[1])

    def sup_norm(self) -> float:
        return float(
            max(
                _block_norms(self.state).max(initial=0.0),
                _block_norms(self.control).max(initial=0.0),
                _block_norms(self.costate).max(initial=0.0),
                float(np.linalg.norm(self.costate0)),
            )
        )


@dataclass(frozen=True)
class KktResidual:
    t1: Matrix
    t2: Vector
    t3: Vector
    t4: Matrix
    t5: Vector
    t6: Matrix
    sup_norm: float = field(init=False)

    def __post_init__(self) -> None:
        blocks = [
            _block_norms(self.t1),
            np.array([np.linalg.norm(self.t2), np.linalg.norm(self.t3)]),
            _block_norms(self.t4),
            np.array([np.linalg.norm(self.t5)]),
            _block_norms(self.t6),
        ]
        object.__setattr__(self, "sup_norm", float(max(block.max(initial=0.0) for block in blocks)))

    def as_vector(self) -> Vector:
        return np.concatenate(
            [self.t1.ravel(), self.t2, self.t3, self.t4.ravel(), self.t5, self.t6.ravel()]
        )


@dataclass(frozen=True)
class PointwiseBlocks:
    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray
    T: Matrix


@dataclass(frozen=True)
class KktJacobian:
    matrix: Matrix
    blocks: PointwiseBlocks
    D: Matrix
    D_ddagger: Matrix


@dataclass(frozen=True)
class StepRecord:
    iteration: int
    residual: float
    step: float


@dataclass
class SolveReport:
    solution: DiscreteSolution
    scheme: CollocationScheme
    iterations: int
    final_residual: float
    converged: bool
    step_history: list[StepRecord] = field(default_factory=list)
    hessian_spd: bool = False
    block_hessian_spd: bool = False


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    err_state: float
    err_control: float
    err_costate: float
    residual: float
    iterations: int
    converged: bool = True


@dataclass(frozen=True)
class SlopeFit:
    which: str
    alpha: float
    c: float
    r_squared: float
    points: int


@dataclass(frozen=True)
class DerivativeReport:
    probes: int
    discrepancies: dict[str, float]
    tolerance: float

    @property
    def flagged(self) -> list[str]:
        return [name for name, value in self.discrepancies.items() if not value <= self.tolerance]

    @property
    def ok(self) -> bool:
        return not self.flagged
