"""
Wirtinger Flow (WF) and Accelerated Wirtinger Flow (AWF).

WF:   s_{t+1} = s_t - μ ∇J(s_t)

AWF:  v_{t+1} = s_t - μ ∇J(s_t)
      q_{t+1} = 1/2 + sqrt(1 + 4 q_t^2) / 2,   q_1 = 1
      s_{t+1} = v_{t+1} + ((q_t - 1) / q_{t+1}) (v_{t+1} - v_t)

μ defaults to 1 / max(overlap map), with which WF never increases the cost.
"""
import logging
import math
import numpy as np

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

from fpm_processing import settings
from fpm_processing.src.core import Field2D, as_field, fft2
from fpm_processing.src.exceptions import (
    InvalidArgumentError,
    NumericalFailureError,
)
from fpm_processing.src.helpers import compute_ordered
from fpm_processing.src.objective import (
    AmplitudeObjective,
    MeasurementSet,
    step_size,
)
from fpm_processing.src.tracers import iteration_tracer


logger = logging.getLogger(__name__)


# Relative slack per step when asserting a non-increasing cost trace
MONOTONE_SLACK = 1e-10


class Algorithm(str, Enum):
    WF = 'wf'
    AWF = 'awf'


class Momentum(str, Enum):
    NESTEROV = 'nesterov'
    LINEAR = 'linear'
    NONE = 'none'


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 500
    step_override: Optional[float] = None
    grad_tol: float = 0.0
    record_trace: bool = True
    algorithm: Algorithm = Algorithm.WF
    momentum: Momentum = Momentum.NESTEROV

    def __post_init__(self) -> None:
        object.__setattr__(self, 'algorithm', Algorithm(self.algorithm))
        object.__setattr__(self, 'momentum', Momentum(self.momentum))

        if self.max_iters < 1:
            raise InvalidArgumentError(f'max_iters must be at least 1, got {self.max_iters}')

        if not (self.grad_tol >= 0):
            raise InvalidArgumentError(f'grad_tol must be non-negative, got {self.grad_tol}')

        if self.step_override is not None and not (math.isfinite(self.step_override) and self.step_override > 0):
            raise InvalidArgumentError(f'step size must be positive, got {self.step_override}')


@dataclass
class SolverTrace:
    """
    Per-iterate cost and gradient norm; entry t belongs to the t-th iterate,
    entry 0 to the starting point. Empty when tracing is off.
    """
    costs: List[float] = field(default_factory=list)
    grad_norms: List[float] = field(default_factory=list)
    step_size_used: float = 0.0
    iterations_run: int = 0


@dataclass(eq=False)
class SolverState:
    s: Field2D
    v: Field2D
    q: float = 1.0
    iter: int = 0

    @classmethod
    def start(cls, s0: Field2D) -> 'SolverState':
        s0 = as_field(s0, 'initial estimate')

        return cls(s=s0, v=s0, q=1.0, iter=0)


@dataclass
class StationarityReport:
    bound_holds: bool
    min_grad_sq: float
    bound_value: float


@dataclass
class StepCandidate:
    step: float
    multiplier: float
    final_cost: float
    monotone: bool


@dataclass
class StepTuningResult:
    analytic_step: float
    best_step: float
    candidates: List[StepCandidate]


def init_constant(n1: int, n2: int, amplitude: float = 1.0, phase: float = 0.0) -> Field2D:
    """
    Spectrum of the constant image `amplitude · e^{j phase}`: a single DC
    spike of magnitude amplitude · sqrt(n1 n2).
    """
    if amplitude < 0:
        raise InvalidArgumentError(f'initial amplitude must be non-negative, got {amplitude}')

    spatial = np.full((n1, n2), amplitude * np.exp(1j * phase), dtype=np.complex128)

    return fft2(spatial)


def next_q(q: float) -> float:
    return 0.5 + 0.5 * math.sqrt(1.0 + 4.0 * q * q)


def momentum_coefficient(schedule: Momentum, state: SolverState, q_next: float) -> float:
    if schedule is Momentum.NESTEROV:
        return (state.q - 1.0) / q_next

    if schedule is Momentum.LINEAR:
        t = state.iter + 1
        return (t - 1.0) / (t + 2.0)

    return 0.0


def _checked_gradient(grad: Field2D, iteration: int) -> Field2D:
    if not np.all(np.isfinite(grad)):
        raise NumericalFailureError('non-finite gradient', iteration)

    return grad


def _validated_step(mu: float) -> float:
    if not (math.isfinite(mu) and mu > 0):
        raise InvalidArgumentError(f'step size must be positive, got {mu}')

    return mu


def wf_step(
    state: SolverState,
    meas: MeasurementSet,
    mu: float,
    grad: Optional[Field2D] = None
) -> SolverState:
    """
    One Wirtinger Flow update. `grad` may carry ∇J(state.s) when the caller
    already evaluated it.
    """
    mu = _validated_step(mu)

    if grad is None:
        grad = AmplitudeObjective(meas).gradient(state.s)

    grad = _checked_gradient(grad, state.iter)

    return replace(state, s=state.s - mu * grad, iter=state.iter + 1)


def awf_step(
    state: SolverState,
    meas: MeasurementSet,
    mu: float,
    grad: Optional[Field2D] = None,
    momentum: Momentum = Momentum.NESTEROV
) -> SolverState:
    """
    One Accelerated Wirtinger Flow update, the gradient being taken at the
    extrapolated point `state.s`.
    """
    mu = _validated_step(mu)

    if state.q < 1:
        raise InvalidArgumentError(f'momentum scalar q must be at least 1, got {state.q}')

    if grad is None:
        grad = AmplitudeObjective(meas).gradient(state.s)

    grad = _checked_gradient(grad, state.iter)

    v_next = state.s - mu * grad
    q_next = next_q(state.q)
    beta = momentum_coefficient(Momentum(momentum), state, q_next)

    if beta == 0:
        s_next = v_next
    else:
        s_next = v_next + beta * (v_next - state.v)

    if not np.all(np.isfinite(s_next)):
        raise NumericalFailureError('non-finite iterate', state.iter)

    return SolverState(s=s_next, v=v_next, q=q_next, iter=state.iter + 1)


def run(
    meas: MeasurementSet,
    cfg: SolverConfig,
    s0: Field2D,
    hooks: Optional[Sequence[Callable]] = None
) -> Tuple[Field2D, SolverTrace]:
    """
    Iterates WF or AWF from `s0` until `cfg.max_iters` steps were taken or
    ||∇J|| <= `cfg.grad_tol`.

    `hooks` are called as `hook(iteration, cost, grad_norm)` after each
    evaluation; the iteration tracer is used when none are given and
    `DEBUG_MODE` is on.
    """
    s0 = as_field(s0, 'initial estimate')
    n1, n2 = s0.shape

    if cfg.step_override is not None:
        mu = cfg.step_override
    else:
        mu = step_size(meas.pupil, meas.plan, n1, n2)

    if hooks is None:
        hooks = [iteration_tracer] if settings.DEBUG_MODE else []

    logger.info(
        f"Running {cfg.algorithm.value.upper()} for up to {cfg.max_iters} iterations "
        f"with step size {mu:.6g}..."
    )

    objective = AmplitudeObjective(meas)
    state = SolverState.start(s0)
    trace = SolverTrace(step_size_used=mu)

    while True:
        value, grad = objective.evaluate(state.s)
        grad = _checked_gradient(grad, state.iter)
        grad_norm = float(np.linalg.norm(grad))

        if not math.isfinite(value):
            raise NumericalFailureError('non-finite cost', state.iter)

        if cfg.record_trace:
            trace.costs.append(value)
            trace.grad_norms.append(grad_norm)

        for hook in hooks:
            hook(state.iter, value, grad_norm)

        if state.iter >= cfg.max_iters or grad_norm <= cfg.grad_tol:
            break

        if cfg.algorithm is Algorithm.AWF:
            state = awf_step(state, meas, mu, grad=grad, momentum=cfg.momentum)
        else:
            state = wf_step(state, meas, mu, grad=grad)

    trace.iterations_run = state.iter

    logger.info(f"Stopped after {state.iter} iterations: cost {value:.6e}, |grad| {grad_norm:.6e}")

    return state.s, trace


def is_monotone(costs: Sequence[float], slack: float = MONOTONE_SLACK) -> bool:
    """
    True when every cost is at most the previous one plus `slack · (1 + previous)`.
    """
    return all(
        after <= before + slack * (1.0 + before)
        for before, after in zip(costs, costs[1:])
    )


def stationarity_bound_check(trace: SolverTrace, mu: float) -> StationarityReport:
    """
    Checks min_{t <= T} ||∇J(s_t)||^2 <= J(s_1) / (μ T) on a WF trace.

    The optimal cost is replaced by its lower bound 0, which only loosens
    the right-hand side. T is the number of steps taken (at least 1).
    """
    if not trace.costs or not trace.grad_norms:
        raise InvalidArgumentError('cannot check an empty trace')

    mu = _validated_step(mu)

    steps = max(trace.iterations_run, 1)
    grad_sq = [g * g for g in trace.grad_norms[:steps]]

    min_grad_sq = float(min(grad_sq))
    bound_value = float(trace.costs[0] / (mu * steps))

    return StationarityReport(
        bound_holds=min_grad_sq <= bound_value * (1.0 + 1e-12),
        min_grad_sq=min_grad_sq,
        bound_value=bound_value,
    )


def tune_step(
    meas: MeasurementSet,
    s0: Field2D,
    iters: int = 50,
    multipliers: Sequence[float] = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0)
) -> StepTuningResult:
    """
    Manual step-size search for comparison runs.

    Runs WF for `iters` iterations with μ = multiplier · μ_analytic and keeps
    the step with the lowest final cost among those whose cost never increased.
    """
    if not multipliers or any(not (m > 0) for m in multipliers):
        raise InvalidArgumentError(f'multipliers must be positive, got {list(multipliers)}')

    s0 = as_field(s0, 'initial estimate')
    analytic = step_size(meas.pupil, meas.plan, *s0.shape)

    logger.info(f"Trying {len(multipliers)} step sizes around {analytic:.6g}...")

    def _attempt(multiplier: float) -> StepCandidate:
        cfg = SolverConfig(max_iters=iters, step_override=analytic * multiplier)

        try:
            _, trace = run(meas, cfg, s0, hooks=[])
        except NumericalFailureError:
            return StepCandidate(analytic * multiplier, multiplier, math.inf, False)

        return StepCandidate(
            step=analytic * multiplier,
            multiplier=multiplier,
            final_cost=trace.costs[-1],
            monotone=is_monotone(trace.costs),
        )

    candidates = compute_ordered(_attempt, list(multipliers))
    admissible = [c for c in candidates if c.monotone]

    if admissible:
        best = min(admissible, key=lambda c: c.final_cost)
        best_step = best.step
    else:
        best_step = analytic

    return StepTuningResult(analytic_step=analytic, best_step=best_step, candidates=candidates)
