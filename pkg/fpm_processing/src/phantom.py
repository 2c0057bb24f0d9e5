"""
Synthetic samples, LED plans and simulated datasets.
"""
import logging
import math
import numpy as np

from dataclasses import dataclass, replace
from datetime import datetime
from enum import Enum
from typing import List, Optional, Sequence, Tuple

from fpm_processing.src.core import (
    Field2D,
    RealImage2D,
    Rng,
    as_image,
    fft2,
    make_rng,
)
from fpm_processing.src.exceptions import (
    ConfigurationError,
    InvalidArgumentError,
    ValidationError,
)
from fpm_processing.src.helpers import compute_ordered, print_time_duration
from fpm_processing.src.objective import MeasurementSet
from fpm_processing.src.optics import (
    IlluminationGeometry,
    LedOffset,
    MultiplexPlan,
    forward_multiplexed,
    illumination_na,
    make_ideal_pupil,
    make_led_offset,
    validate_plan,
    window_fits,
)


logger = logging.getLogger(__name__)


DEFAULT_PHASE_RANGE = (-math.pi / 2, math.pi / 2)

# Random streams derived from the manifest seed
PLAN_STREAM = 0
NOISE_STREAM = 1
AMPLITUDE_STREAM = 2
PHASE_STREAM = 3


class NoiseModel(str, Enum):
    NONE = 'none'
    GAUSSIAN = 'gaussian'


class PlanKind(str, Enum):
    SEQUENTIAL = 'sequential'
    RANDOM = 'random'


@dataclass(eq=False)
class Phantom:
    amplitude: RealImage2D
    phase: RealImage2D
    s_true: Field2D

    @property
    def shape(self) -> Tuple[int, int]:
        return self.s_true.shape


@dataclass(frozen=True)
class DatasetManifest:
    """
    Everything needed to regenerate a dataset bit for bit.

    `plan` may be left empty in a hand-written manifest; `resolve_manifest`
    then builds it from `plan_kind`, `group_size` and `seed`.
    """
    geometry: IlluminationGeometry
    n1: int
    n2: int
    m1: int
    m2: int
    plan: Optional[MultiplexPlan] = None
    seed: int = 0
    noise_model: NoiseModel = NoiseModel.NONE
    noise_sigma: float = 0.0
    plan_kind: PlanKind = PlanKind.SEQUENTIAL
    group_size: int = 1
    phase_range: Tuple[float, float] = DEFAULT_PHASE_RANGE

    def __post_init__(self) -> None:
        object.__setattr__(self, 'noise_model', NoiseModel(self.noise_model))
        object.__setattr__(self, 'plan_kind', PlanKind(self.plan_kind))
        object.__setattr__(self, 'phase_range', tuple(float(p) for p in self.phase_range))

        for name in ('n1', 'n2', 'm1', 'm2'):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f'{name} must be positive, got {getattr(self, name)}')

        if self.group_size < 1:
            raise InvalidArgumentError(f'group_size must be positive, got {self.group_size}')

        if self.noise_sigma < 0:
            raise InvalidArgumentError(f'noise_sigma must be non-negative, got {self.noise_sigma}')

        if self.seed < 0:
            raise InvalidArgumentError(f'seed must be non-negative, got {self.seed}')

        lo, hi = self.phase_range

        if not lo <= hi:
            raise InvalidArgumentError(f'phase range must be increasing, got {self.phase_range}')

    @classmethod
    def desk_scale(cls, **overrides) -> 'DatasetManifest':
        """
        64x64 reconstruction from 32x32 images under a 3x3 LED patch,
        sequential illumination.
        """
        values = dict(geometry=IlluminationGeometry(), n1=64, n2=64, m1=32, m2=32)
        values.update(overrides)

        return cls(**values)

    @property
    def num_measurements(self) -> Optional[int]:
        return self.plan.num_measurements if self.plan is not None else None

    def validate(self) -> None:
        """
        Raises ValidationError listing every plan violation.
        """
        if self.plan is None:
            raise ValidationError(['manifest has no multiplex plan'])

        violations = validate_plan(self.plan, self.n1, self.n2, self.m1, self.m2)

        if violations:
            raise ValidationError(violations)


def _resample(source: np.ndarray, n1: int, n2: int) -> np.ndarray:
    """
    Nearest-neighbour resampling to n1 x n2 (identity when sizes match).
    """
    rows = (np.arange(n1) * source.shape[0]) // n1
    cols = (np.arange(n2) * source.shape[1]) // n2

    return source[np.ix_(rows, cols)]


def make_phantom(
    amplitude_source: RealImage2D,
    phase_source: RealImage2D,
    n1: int,
    n2: int,
    phase_range: Tuple[float, float] = DEFAULT_PHASE_RANGE
) -> Phantom:
    """
    Builds the sample amplitude · e^{j phase} on an n1 x n2 grid.

    The amplitude is clipped to [0, 1]; the phase source is mapped affinely
    so that its minimum and maximum land on the ends of `phase_range`
    (a constant source maps to the middle of the range).
    """
    amplitude = as_image(amplitude_source, 'amplitude source')
    phase_src = as_image(phase_source, 'phase source')

    amplitude = np.clip(_resample(amplitude, n1, n2), 0.0, 1.0)
    phase_src = _resample(phase_src, n1, n2)

    lo, hi = phase_range
    low, high = float(phase_src.min()), float(phase_src.max())

    if high > low:
        t = (phase_src - low) / (high - low)
        phase = lo * (1.0 - t) + hi * t
    else:
        phase = np.full(phase_src.shape, 0.5 * (lo + hi))

    phase = np.clip(phase, lo, hi)
    s_true = fft2(amplitude * np.exp(1j * phase))

    return Phantom(amplitude=amplitude, phase=phase, s_true=s_true)


def make_test_pattern(kind: str, n1: int, n2: int, rng: Optional[Rng] = None) -> RealImage2D:
    """
    Synthetic source images: `ellipses` (random overlapping ellipses scaled
    to [0, 1]), `checkerboard` (8x8 pixel squares) or `constant` (all ones).
    """
    if kind == 'constant':
        return np.ones((n1, n2))

    if kind == 'checkerboard':
        r, c = np.indices((n1, n2))
        return (((r // 8) + (c // 8)) % 2).astype(np.float64)

    if kind != 'ellipses':
        raise InvalidArgumentError(f'{kind} is an unknown test pattern.')

    if rng is None:
        raise InvalidArgumentError('the ellipses pattern needs a random generator')

    r, c = np.indices((n1, n2), dtype=np.float64)
    image = np.zeros((n1, n2))

    # Outer shell, then a handful of brighter or darker inclusions
    image[((r - n1 / 2) / (0.45 * n1)) ** 2 + ((c - n2 / 2) / (0.35 * n2)) ** 2 <= 1] = 0.6

    for _ in range(int(rng.integers(5, 10))):
        center_r = rng.uniform(0.25, 0.75) * n1
        center_c = rng.uniform(0.25, 0.75) * n2
        radius_r = rng.uniform(0.05, 0.2) * n1
        radius_c = rng.uniform(0.05, 0.2) * n2
        intensity = rng.uniform(0.2, 0.4) * rng.choice([-1.0, 1.0])

        inside = ((r - center_r) / radius_r) ** 2 + ((c - center_c) / radius_c) ** 2 <= 1
        image[inside] += intensity

    image = np.clip(image, 0.0, None)
    peak = image.max()

    return image / peak if peak > 0 else image


def build_led_grid(geom: IlluminationGeometry, n1: int, n2: int, m1: int, m2: int) -> List[LedOffset]:
    """
    Enumerates the array LEDs in row-major (u, v) order and keeps those whose
    crop window fits the n1 x n2 grid (and whose illumination NA does not
    exceed `max_illumination_na` when set).

    Pixel offsets are taken on the m1 x m2 camera grid, see `make_led_offset`.
    """
    leds = []

    for index, u, v in geom.led_positions():
        if geom.max_illumination_na is not None and illumination_na(u, v, geom) > geom.max_illumination_na:
            continue

        led = make_led_offset(index, u, v, geom, n1, n2, m1, m2)

        if window_fits(led.pixel_offset, n1, n2, m1, m2):
            leds.append(led)

    if not leds:
        raise ConfigurationError(f'no LED of the array fits a {m1}x{m2} window inside the {n1}x{n2} grid')

    logger.info(f"Retained {len(leds)} of {len(geom.led_positions())} LEDs...")

    return leds


def make_plan_sequential(leds: Sequence[LedOffset]) -> MultiplexPlan:
    """
    One measurement per LED, in the given order.
    """
    if not leds:
        raise InvalidArgumentError('cannot build a plan without LEDs')

    return MultiplexPlan(sets=tuple((led,) for led in leds))


def make_plan_random(leds: Sequence[LedOffset], group: int, rng: Rng) -> MultiplexPlan:
    """
    Shuffles the LEDs and splits them into ceil(#LEDs / group) sets of
    `group` LEDs each (the last set takes the remainder), so every LED is
    lit exactly once.
    """
    if group < 1:
        raise InvalidArgumentError(f'group size must be positive, got {group}')

    if not leds:
        raise InvalidArgumentError('cannot build a plan without LEDs')

    if group > len(leds):
        raise InvalidArgumentError(f'group size {group} exceeds the {len(leds)} available LEDs')

    order = rng.permutation(len(leds))
    shuffled = [leds[i] for i in order]

    return MultiplexPlan(sets=tuple(
        tuple(shuffled[start:start + group])
        for start in range(0, len(shuffled), group)
    ))


def resolve_manifest(manifest: DatasetManifest) -> DatasetManifest:
    """
    Returns the manifest with its plan generated (when absent) and validated.
    """
    # Rejects a pupil wider than the camera band before any LED is placed
    make_ideal_pupil(manifest.m1, manifest.m2, manifest.geometry)

    if manifest.plan is None:
        leds = build_led_grid(manifest.geometry, manifest.n1, manifest.n2, manifest.m1, manifest.m2)

        if manifest.plan_kind is PlanKind.RANDOM:
            plan = make_plan_random(leds, manifest.group_size, make_rng(manifest.seed, PLAN_STREAM))
        else:
            plan = make_plan_sequential(leds)

        manifest = replace(manifest, plan=plan)

    manifest.validate()

    return manifest


def simulate(phantom: Phantom, manifest: DatasetManifest) -> MeasurementSet:
    """
    Computes the K amplitude images of `phantom` under the manifest's plan.

    With Gaussian noise, N(0, σ^2) is added to each intensity, negative values
    are clamped to 0 and the square root is taken.
    """
    manifest.validate()

    if phantom.shape != (manifest.n1, manifest.n2):
        raise InvalidArgumentError(
            f'phantom is {phantom.shape[0]}x{phantom.shape[1]}, '
            f'the manifest expects {manifest.n1}x{manifest.n2}'
        )

    process_start_at = datetime.now()

    pupil = make_ideal_pupil(manifest.m1, manifest.m2, manifest.geometry)

    logger.info(f"Simulating {manifest.plan.num_measurements} measurements...")

    images = compute_ordered(
        lambda leds: forward_multiplexed(phantom.s_true, pupil, leds),
        list(manifest.plan.sets)
    )

    if manifest.noise_model is NoiseModel.GAUSSIAN and manifest.noise_sigma > 0:
        logger.info(f"Adding Gaussian intensity noise with sigma {manifest.noise_sigma}...")

        rng = make_rng(manifest.seed, NOISE_STREAM)
        images = [
            np.sqrt(np.clip(image ** 2 + manifest.noise_sigma * rng.standard_normal(image.shape), 0.0, None))
            for image in images
        ]

    process_end_at = datetime.now()
    print_time_duration("Measurement simulation", process_start_at, process_end_at)

    return MeasurementSet(images=tuple(images), plan=manifest.plan, pupil=pupil)
