"""
Amplitude-based data fidelity for multiplexed measurements.

    J(s) = Σ_k || y_k - sqrt(Σ_{i in M_k} |A_i s|^2) ||^2,   A_i = F^H P C_i

`gradient` returns the ∂J/∂s̄ generalized gradient, so `s - μ ∇J(s)` is the
plain descent step and μ = 1 / max(overlap map) needs no factor of two.
"""
import logging
import numpy as np

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

from fpm_processing.src.core import (
    Field2D,
    RealImage2D,
    Rng,
    as_field,
    as_image,
)
from fpm_processing.src.exceptions import (
    ConfigurationError,
    InvalidArgumentError,
)
from fpm_processing.src.helpers import compute_ordered
from fpm_processing.src.optics import (
    MultiplexPlan,
    Pupil,
    backpropagate,
    embed_sum,
    propagate,
)


logger = logging.getLogger(__name__)


@dataclass(eq=False)
class MeasurementSet:
    """
    The K amplitude images y_k together with the plan and pupil that produced them.
    """
    images: Tuple[RealImage2D, ...]
    plan: MultiplexPlan
    pupil: Pupil

    def __post_init__(self) -> None:
        self.images = tuple(
            as_image(image, f'measurement {k}', non_negative=True)
            for k, image in enumerate(self.images)
        )

        if len(self.images) != self.plan.num_measurements:
            raise InvalidArgumentError(
                f'{len(self.images)} images given for a plan of '
                f'{self.plan.num_measurements} measurements'
            )

        for k, image in enumerate(self.images):
            if image.shape != self.pupil.shape:
                raise InvalidArgumentError(
                    f'measurement {k} has shape {image.shape}, '
                    f'the pupil has shape {self.pupil.shape}'
                )

    @property
    def num_measurements(self) -> int:
        return len(self.images)

    @property
    def stacked(self) -> np.ndarray:
        """
        The images as one (K, m1, m2) array.
        """
        if not hasattr(self, '_stacked'):
            self._stacked = np.stack(self.images)

        return self._stacked


@dataclass(eq=False)
class OverlapMap:
    values: RealImage2D
    max_value: float


class AmplitudeObjective:
    """
    Evaluates J and ∇J for one measurement set.

    All (k, i) pairs are propagated as one batch; the per-measurement
    intensity sums use `np.add.reduceat` over contiguous groups, so the
    summation order is fixed and repeated calls are bitwise identical.
    """

    def __init__(self, meas: MeasurementSet) -> None:
        self.meas = meas
        self.layout = meas.plan.layout
        self.y = meas.stacked

    def _check(self, s: Field2D) -> None:
        if s.ndim != 2:
            raise InvalidArgumentError(f'sample spectrum must be 2-D, got shape {s.shape}')

        m1, m2 = self.meas.pupil.shape

        if s.shape[0] < m1 or s.shape[1] < m2:
            raise InvalidArgumentError(
                f'{s.shape[0]}x{s.shape[1]} spectrum is smaller than the '
                f'{m1}x{m2} measurements'
            )

    def _forward(self, s: Field2D) -> Tuple[np.ndarray, np.ndarray]:
        fields = propagate(s, self.meas.pupil, self.layout.offsets)
        amplitude = np.sqrt(np.add.reduceat(np.abs(fields) ** 2, self.layout.starts, axis=0))

        return fields, amplitude

    def cost(self, s: Field2D) -> float:
        self._check(s)

        _, amplitude = self._forward(s)

        return float(np.sum((self.y - amplitude) ** 2))

    def evaluate(self, s: Field2D) -> Tuple[float, Field2D]:
        """
        Returns `(J(s), ∇J(s))` sharing one forward pass.
        """
        self._check(s)

        fields, amplitude = self._forward(s)
        residual = amplitude - self.y
        value = float(np.sum(residual ** 2))

        # Phase quotient A_i s / g_k, set to 0 wherever g_k vanishes
        g = amplitude[self.layout.groups]
        phase = np.divide(fields, g, out=np.zeros_like(fields), where=g > 0)

        errors = residual[self.layout.groups] * phase
        grad = backpropagate(errors, self.meas.pupil, self.layout.offsets, *s.shape)

        return value, grad

    def gradient(self, s: Field2D) -> Field2D:
        return self.evaluate(s)[1]


def cost(s: Field2D, meas: MeasurementSet) -> float:
    return AmplitudeObjective(meas).cost(s)


def gradient(s: Field2D, meas: MeasurementSet) -> Field2D:
    return AmplitudeObjective(meas).gradient(s)


def overlap_map(pupil: Pupil, plan: MultiplexPlan, n1: int, n2: int) -> OverlapMap:
    """
    Σ_k Σ_{i in M_k} embed(|P|^2, off_i): how often (weighted by |P|^2) each
    Fourier pixel is sampled. An LED lit in several measurements counts
    once per measurement.
    """
    offsets = plan.layout.offsets
    weights = np.broadcast_to(np.abs(pupil.values) ** 2, (len(offsets),) + pupil.shape)

    values = embed_sum(np.ascontiguousarray(weights), offsets, n1, n2)

    return OverlapMap(values=values, max_value=float(values.max()))


def step_size(pupil: Pupil, plan: MultiplexPlan, n1: int, n2: int) -> float:
    """
    μ = 1 / ||Σ_k Σ_i C_i^H P^H P C_i||_2.

    The operator is diagonal in the Fourier basis, so its spectral norm is
    the largest entry of the overlap map.
    """
    redundancy = overlap_map(pupil, plan, n1, n2).max_value

    if redundancy <= 0:
        raise ConfigurationError('degenerate configuration: the pupil never samples the spectrum')

    return 1.0 / redundancy


@dataclass
class GradientCheckReport:
    max_error: float
    worst_coordinate: Tuple[int, int, str]
    gradient_norm: float
    tolerance: float
    coordinates: List[Tuple[int, int, str]] = field(default_factory=list)
    errors: List[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


def finite_difference(cost_fn: Callable[[Field2D], float], s: Field2D, coordinate: Tuple[int, int], h: float) -> complex:
    """
    Central-difference Wirtinger derivative ∂J/∂s̄ = (∂J/∂Re + j ∂J/∂Im) / 2
    at one pixel of `s`.
    """
    r, c = coordinate
    parts = []

    for direction in (1.0, 1j):
        plus = s.copy()
        minus = s.copy()

        plus[r, c] += h * direction
        minus[r, c] -= h * direction

        parts.append((cost_fn(plus) - cost_fn(minus)) / (2 * h))

    return 0.5 * (parts[0] + 1j * parts[1])


def check_gradient(
    s: Field2D,
    meas: MeasurementSet,
    coordinates: Sequence[Tuple[int, int]],
    h: float = 1e-6,
    tolerance: float = 1e-5,
    gradient_fn: Optional[Callable[[Field2D, MeasurementSet], Field2D]] = None
) -> GradientCheckReport:
    """
    Compares the analytical gradient with central finite differences
    of the cost at the given pixels.

    Real and imaginary parts are checked separately. The error of a probed
    component is |fd - analytic| / max(1, max |analytic|).
    """
    if h <= 0:
        raise InvalidArgumentError(f'finite-difference step must be positive, got {h}')

    if not coordinates:
        raise InvalidArgumentError('no coordinates to probe')

    s = as_field(s, 'probe point')
    objective = AmplitudeObjective(meas)

    analytic = (gradient_fn or gradient)(s, meas)
    scale = max(1.0, float(np.max(np.abs(analytic))))

    logger.info(f"Probing {len(coordinates)} coordinates with h={h}...")

    numeric = compute_ordered(
        lambda coordinate: finite_difference(objective.cost, s, coordinate, h),
        list(coordinates)
    )

    probed, errors = [], []

    for (r, c), fd in zip(coordinates, numeric):
        an = analytic[r, c]
        probed.append((r, c, 'real'))
        errors.append(abs(fd.real - an.real) / scale)
        probed.append((r, c, 'imag'))
        errors.append(abs(fd.imag - an.imag) / scale)

    worst = int(np.argmax(errors))

    return GradientCheckReport(
        max_error=float(errors[worst]),
        worst_coordinate=probed[worst],
        gradient_norm=float(np.linalg.norm(analytic)),
        tolerance=tolerance,
        coordinates=probed,
        errors=[float(e) for e in errors],
    )


def random_coordinates(rng: Rng, mask: np.ndarray, count: int) -> List[Tuple[int, int]]:
    """
    Draws up to `count` distinct pixels where `mask` is true.
    """
    candidates = np.argwhere(mask)

    if len(candidates) == 0:
        raise InvalidArgumentError('no pixel is covered by the measurements')

    count = min(count, len(candidates))
    picks = rng.choice(len(candidates), size=count, replace=False)

    return [(int(candidates[p][0]), int(candidates[p][1])) for p in picks]
