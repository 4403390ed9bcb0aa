"""Gradient-ascent pulse engineering for holonomic gates.

Implements the penalized target function (projected gate overlap minus a
dynamical-matrix penalty), its exact gradient, the fixed-step ascent loop
with optional backtracking, the noise-averaged objective on deterministic
quadrature grids, and robustness sweeps over quasi-static error grids.
"""

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import ConvergenceReport, DimensionError
from .geometry import HolonomyReport, check_holonomic_conditions
from .protect import NoiseDistribution, NoiseModel
from .qcore import (
    ControlSchedule,
    EvolutionRecord,
    gate_fidelity,
    propagate,
    require_hermitian,
    require_projector,
)
from .tolerances import DEFAULT, ToleranceConfig

__all__ = [
    "GrapeConfig",
    "GrapeProblem",
    "OptimizedControls",
    "averaged_objective",
    "averaged_objective_and_gradient",
    "controls_to_schedule",
    "grape_optimize",
    "noise_quadrature",
    "objective",
    "objective_gradient",
    "robustness_sweep",
    "schedule_to_controls",
]


@dataclass(frozen=True)
class GrapeProblem:
    """Control landscape: static H_s, control operators, target, projector.

    The computational projector p0 (rank L) selects the block compared to
    ``u_target``; ``penalty`` weights the integrated squared dynamical
    matrix that enforces the holonomic condition K(t) = 0.
    """

    h_static: np.ndarray
    controls: tuple               # of Hermitian (d, d) operators
    u_target: np.ndarray
    p0: np.ndarray
    n_segments: int
    total_time: float
    penalty: float = 0.0

    def __post_init__(self):
        require_hermitian(self.h_static)
        for c in self.controls:
            require_hermitian(c)
        require_projector(self.p0)
        if self.penalty < 0:
            raise DimensionError("penalty must be nonnegative")

    @property
    def dim(self) -> int:
        return self.h_static.shape[0]

    @property
    def l_dim(self) -> float:
        return float(np.trace(self.p0).real)

    @property
    def dt(self) -> float:
        return self.total_time / self.n_segments

    def stacked_controls(self) -> np.ndarray:
        return np.ascontiguousarray(np.stack(self.controls).astype(np.complex128))


@dataclass(frozen=True)
class GrapeConfig:
    """Ascent settings per the four-step procedure.

    step: fixed ascent rate epsilon; target_objective O_p (< 1); gradient
    mode "analytic" or "finite-difference"; line_search halves the step
    until the objective increases; amplitude_bound clips controls after
    each update (0 disables).
    """

    step: float = 0.1
    target_objective: float = 0.999
    max_iterations: int = 500
    gradient_mode: str = "analytic"
    line_search: bool = True
    amplitude_bound: float = 0.0
    fd_step: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.target_objective < 1.0:
            raise DimensionError("target objective must lie in (0, 1)")
        if self.step <= 0:
            raise DimensionError("step must be positive")


@dataclass
class OptimizedControls:
    controls: np.ndarray                 # (N, n_controls)
    objective: float
    trace: np.ndarray                    # objective after each iteration
    converged: bool
    holonomy_report: Optional[HolonomyReport] = None


def _value_grad(
    controls: np.ndarray,
    problem: GrapeProblem,
    noise_static: Optional[np.ndarray] = None,
    amp_scale: float = 1.0,
    want_grad: bool = True,
) -> tuple[float, Optional[np.ndarray]]:
    w = np.ascontiguousarray(np.asarray(controls, dtype=np.float64))
    if w.shape != (problem.n_segments, len(problem.controls)):
        raise DimensionError(
            f"controls must be shaped ({problem.n_segments}, {len(problem.controls)})"
        )
    h_static = problem.h_static.astype(np.complex128)
    if noise_static is not None:
        h_static = h_static + noise_static
    value, grad = _kernels.grape_value_grad(
        np.ascontiguousarray(h_static),
        problem.stacked_controls(),
        w,
        problem.dt,
        np.ascontiguousarray(problem.u_target.astype(np.complex128)),
        np.ascontiguousarray(problem.p0.astype(np.complex128)),
        float(problem.penalty),
        float(amp_scale),
        problem.l_dim,
    )
    return float(value), (grad if want_grad else None)


def objective(controls: np.ndarray, problem: GrapeProblem) -> float:
    """O = |Tr[U_T^dag U(tau) P0]|^2 / L^2 - penalty integral."""
    value, _ = _value_grad(controls, problem, want_grad=False)
    return value


def objective_gradient(
    controls: np.ndarray,
    problem: GrapeProblem,
    mode: str = "analytic",
    fd_step: float = 1e-6,
) -> np.ndarray:
    """Gradient of the penalized objective w.r.t. every control amplitude.

    Analytic mode uses the exact eigenbasis propagator-derivative formula;
    finite-difference mode uses central differences with the given step.
    """
    if mode == "analytic":
        _, grad = _value_grad(controls, problem)
        return grad
    if mode != "finite-difference":
        raise DimensionError(f"unknown gradient mode {mode!r}")
    w = np.asarray(controls, dtype=float)
    scale = max(float(np.max(np.abs(w))), 1.0)
    h = fd_step * scale
    grad = np.zeros_like(w)
    for j in range(w.shape[0]):
        for k in range(w.shape[1]):
            wp = w.copy()
            wp[j, k] += h
            wm = w.copy()
            wm[j, k] -= h
            grad[j, k] = (objective(wp, problem) - objective(wm, problem)) / (2 * h)
    return grad


def controls_to_schedule(controls: np.ndarray, problem: GrapeProblem) -> ControlSchedule:
    """Piecewise-constant schedule H_j = H_s + sum_k w[j, k] H_k."""
    w = np.asarray(controls, dtype=float)
    hs = [
        problem.h_static + sum(w[j, k] * problem.controls[k] for k in range(w.shape[1]))
        for j in range(w.shape[0])
    ]
    return ControlSchedule.from_hamiltonians(hs, [problem.dt] * w.shape[0])


def schedule_to_controls(
    schedule: ControlSchedule, problem: GrapeProblem
) -> np.ndarray:
    """Project a schedule's segments onto the problem's control operators.

    Least-squares in the Frobenius inner product after removing H_s; the
    residual must vanish for the schedule to be representable.
    """
    mats = schedule.matrices()
    if len(mats) != problem.n_segments:
        raise DimensionError("schedule segment count != problem segment count")
    ctrls = problem.stacked_controls()
    gram = np.einsum("kij,lij->kl", ctrls.conj(), ctrls).real
    w = np.empty((problem.n_segments, len(problem.controls)))
    for j, h in enumerate(mats):
        rhs = np.einsum("kij,ij->k", ctrls.conj(), h - problem.h_static).real
        w[j] = np.linalg.solve(gram, rhs)
    return w


def grape_optimize(
    problem: GrapeProblem,
    config: GrapeConfig,
    initial_controls: np.ndarray,
    value_and_grad: Optional[Callable] = None,
    tol: ToleranceConfig = DEFAULT,
) -> OptimizedControls:
    """Gradient ascent w <- w + eps dO/dw until O >= O_p or iteration cap.

    ``value_and_grad`` overrides the objective (used for noise-averaged
    optimization); with line search the objective trace is monotone.
    The returned report carries the holonomic-condition residuals of the
    final (noise-free) schedule.
    """
    w = np.array(initial_controls, dtype=float)

    def default_vg(x):
        if config.gradient_mode == "analytic":
            return _value_grad(x, problem)
        return objective(x, problem), objective_gradient(
            x, problem, mode="finite-difference", fd_step=config.fd_step
        )

    vg = default_vg if value_and_grad is None else value_and_grad

    value, grad = vg(w)
    trace = [value]
    converged = value >= config.target_objective
    it = 0
    while not converged and it < config.max_iterations:
        step = config.step
        while True:
            w_new = w + step * grad
            if config.amplitude_bound > 0:
                np.clip(w_new, -config.amplitude_bound, config.amplitude_bound, out=w_new)
            v_new, g_new = vg(w_new)
            if not config.line_search or v_new > value or step < 1e-12 * config.step:
                break
            step *= 0.5
        if config.line_search and v_new <= value:
            # No ascent direction left at this resolution.
            trace.append(value)
            break
        w, value, grad = w_new, v_new, g_new
        trace.append(value)
        converged = value >= config.target_objective
        it += 1

    if not converged:
        warnings.warn(
            f"objective {value:.6f} below target {config.target_objective:g} "
            f"after {it} iterations",
            ConvergenceReport,
        )
    record = propagate(controls_to_schedule(w, problem), 1)
    report = check_holonomic_conditions(record, problem.p0, tol=tol)
    return OptimizedControls(
        controls=w,
        objective=value,
        trace=np.array(trace),
        converged=converged,
        holonomy_report=report,
    )


# ---------------------------------------------------------------------------
# noise-averaged objective
# ---------------------------------------------------------------------------

def noise_quadrature(model: NoiseModel, nodes: int = 5) -> list[tuple[float, float, tuple]]:
    """Deterministic quadrature grid over the model's error distributions.

    Gauss-Hermite nodes for Gaussian components, uniformly spaced nodes
    with equal weights for bounded (uniform) components, a single node
    for fixed values.  Returns (weight, delta_1, per-error-op deltas),
    with weights summing to one.
    """

    def axis(dist: Optional[NoiseDistribution]):
        if dist is None or dist.scale == 0.0 or dist.kind == "fixed":
            val = 0.0 if dist is None else (dist.scale if dist.kind == "fixed" else 0.0)
            return [(1.0, val)]
        if dist.kind == "gaussian":
            x, w = np.polynomial.hermite_e.hermegauss(nodes)
            return [(wi / np.sum(w), xi * dist.scale) for xi, wi in zip(x, w)]
        if dist.kind == "uniform":
            xs = np.linspace(-dist.scale, dist.scale, nodes)
            return [(1.0 / nodes, x) for x in xs]
        raise DimensionError(f"unknown distribution kind {dist.kind!r}")

    grids = [axis(model.amplitude_error)]
    grids.extend(axis(dist) for _, dist in model.error_ops)

    out = [(1.0, ())]
    for g in grids:
        out = [(w0 * w1, vals + (v,)) for w0, vals in out for w1, v in g]
    return [(w, vals[0], vals[1:]) for w, vals in out]


def averaged_objective_and_gradient(
    controls: np.ndarray,
    problem: GrapeProblem,
    model: NoiseModel,
    nodes: int = 5,
    want_grad: bool = True,
) -> tuple[float, Optional[np.ndarray]]:
    """Quadrature average of the objective (and gradient) over the noise."""
    total = 0.0
    total_grad = np.zeros((problem.n_segments, len(problem.controls))) if want_grad else None
    for weight, delta1, deltas in noise_quadrature(model, nodes):
        static = np.zeros((problem.dim, problem.dim), dtype=np.complex128)
        for (op, _), d in zip(model.error_ops, deltas):
            static += d * np.asarray(op, dtype=np.complex128)
        v, g = _value_grad(
            controls, problem, noise_static=static, amp_scale=1.0 + delta1,
            want_grad=want_grad,
        )
        total += weight * v
        if want_grad:
            total_grad += weight * g
    return total, total_grad


def averaged_objective(
    controls: np.ndarray,
    problem: GrapeProblem,
    model: NoiseModel,
    nodes: int = 5,
) -> float:
    value, _ = averaged_objective_and_gradient(
        controls, problem, model, nodes, want_grad=False
    )
    return value


# ---------------------------------------------------------------------------
# robustness sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    delta1_values: np.ndarray
    delta2_values: np.ndarray
    fidelities: np.ndarray      # (len(delta1), len(delta2))

    def rows(self):
        """(delta1, delta2, fidelity) triples in row-major grid order."""
        for i, d1 in enumerate(self.delta1_values):
            for j, d2 in enumerate(self.delta2_values):
                yield float(d1), float(d2), float(self.fidelities[i, j])


def robustness_sweep(
    schedule: ControlSchedule,
    u_target: np.ndarray,
    p0: np.ndarray,
    error_op: np.ndarray,
    delta1_values: Sequence[float],
    delta2_values: Sequence[float],
    map_fn=map,
) -> SweepResult:
    """Gate fidelity over a (delta_1, delta_2) quasi-static error grid.

    delta_1 scales every control amplitude, delta_2 multiplies
    ``error_op`` added to each segment; each cell propagates the
    perturbed schedule and scores gate_fidelity against the target.
    ``map_fn`` may be a parallel map; cells are assembled in grid order
    regardless of execution order.
    """
    base = schedule.matrices()
    durs = list(schedule.durations)
    error_op = np.asarray(error_op, dtype=np.complex128)

    cells = [(i, j) for i in range(len(delta1_values)) for j in range(len(delta2_values))]

    def run(cell):
        i, j = cell
        hs = base * (1.0 + delta1_values[i]) + delta2_values[j] * error_op
        rec = propagate(ControlSchedule.from_hamiltonians(list(hs), durs), 1)
        return i, j, gate_fidelity(rec.final_propagator, u_target, p0)

    fid = np.zeros((len(delta1_values), len(delta2_values)))
    for i, j, f in map_fn(run, cells):
        fid[i, j] = f
    return SweepResult(
        delta1_values=np.asarray(delta1_values, float),
        delta2_values=np.asarray(delta2_values, float),
        fidelities=fid,
    )
