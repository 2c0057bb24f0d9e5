"""
Physical forward model of the LED-array microscope.

The reconstruction grid (n1 x n2) and the camera grid (m1 x m2) share one
Fourier pixel pitch, 1 / (m * camera_pixel / magnification) per axis, so that
every illumination angle becomes an integer shift of an m1 x m2 crop window
inside the n1 x n2 spectrum.
"""
import logging
import math
import numpy as np

from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

from fpm_processing.src.core import (
    Field2D,
    RealImage2D,
    as_field,
    dc_index,
    fft2,
    ifft2,
)
from fpm_processing.src.exceptions import (
    ConfigurationError,
    InvalidArgumentError,
    WindowRangeError,
)


logger = logging.getLogger(__name__)


PixelOffset = Tuple[int, int]

# Relative slack so that pixels lying exactly on the NA circle count as inside
_DISK_SLACK = 1e-12


@dataclass(frozen=True)
class IlluminationGeometry:
    """
    LED array and microscope parameters.

    Defaults are the simulation parameters of a 4 mm pitch LED array placed
    77 mm below the sample, 514 nm light, a 0.1 NA 8x objective and 6.5 um
    camera pixels, restricted to a 3x3 patch of LEDs.
    """
    led_pitch_mm: float = 4.0
    led_distance_mm: float = 77.0
    wavelength_um: float = 0.514
    numerical_aperture: float = 0.1
    magnification: float = 8.0
    camera_pixel_um: float = 6.5
    grid_half_extent: int = 1
    led_whitelist: Optional[Tuple[Tuple[int, int], ...]] = None
    max_illumination_na: Optional[float] = None

    def __post_init__(self) -> None:
        positive = {
            'led_pitch_mm': self.led_pitch_mm,
            'led_distance_mm': self.led_distance_mm,
            'wavelength_um': self.wavelength_um,
            'numerical_aperture': self.numerical_aperture,
            'magnification': self.magnification,
            'camera_pixel_um': self.camera_pixel_um,
        }

        for name, value in positive.items():
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f'{name} must be a positive finite number, got {value}')

        if self.numerical_aperture >= 1:
            raise ConfigurationError(f'numerical_aperture must be below 1, got {self.numerical_aperture}')

        if self.grid_half_extent < 0:
            raise ConfigurationError(f'grid_half_extent must be non-negative, got {self.grid_half_extent}')

        if self.max_illumination_na is not None and not (0 < self.max_illumination_na <= 1):
            raise ConfigurationError(
                f'max_illumination_na must lie in (0, 1], got {self.max_illumination_na}'
            )

        if self.led_whitelist is not None:
            # Normalise to a hashable tuple of integer pairs
            whitelist = tuple((int(u), int(v)) for u, v in self.led_whitelist)
            object.__setattr__(self, 'led_whitelist', whitelist)

    @property
    def object_pixel_um(self) -> float:
        """
        Camera pixel size referred to the sample plane.
        """
        return self.camera_pixel_um / self.magnification

    @property
    def cutoff_frequency(self) -> float:
        """
        Coherent cutoff NA / λ in cycles per micrometer.
        """
        return self.numerical_aperture / self.wavelength_um

    def pupil_radius_pixels(self, m1: int, m2: int) -> float:
        """
        Radius of the NA disk measured in Fourier pixels of the m1 x m2 camera grid
        (the smaller of the two axes' values).
        """
        return self.cutoff_frequency * min(m1, m2) * self.object_pixel_um

    def led_positions(self) -> List[Tuple[int, int, int]]:
        """
        Returns `(led_index, u, v)` for every LED of the array, row-major by (u, v).

        LED ids are row-major positions in the full (2h+1)^2 grid, or positions
        in the whitelist when one is given.
        """
        if self.led_whitelist is not None:
            return [(index, u, v) for index, (u, v) in enumerate(self.led_whitelist)]

        h = self.grid_half_extent
        side = 2 * h + 1

        return [
            ((u + h) * side + (v + h), u, v)
            for u in range(-h, h + 1)
            for v in range(-h, h + 1)
        ]


@dataclass(frozen=True)
class LedOffset:
    led_index: int
    u: int
    v: int
    freq_cycles_per_um: Tuple[float, float]
    pixel_offset: PixelOffset


@dataclass(eq=False)
class Pupil:
    values: Field2D
    support: np.ndarray

    def __post_init__(self) -> None:
        self.values = as_field(self.values, 'pupil')
        self.support = np.asarray(self.support, dtype=bool)

        if self.support.shape != self.values.shape:
            raise InvalidArgumentError(
                f'pupil support shape {self.support.shape} differs from values shape {self.values.shape}'
            )

        if np.any(self.values[~self.support] != 0):
            raise InvalidArgumentError('pupil values must vanish outside the support')

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class MultiplexPlan:
    """
    The K LED sets lit together, one set per measurement.
    """
    sets: Tuple[Tuple[LedOffset, ...], ...]

    def __post_init__(self) -> None:
        sets = tuple(tuple(leds) for leds in self.sets)
        object.__setattr__(self, 'sets', sets)

        if not sets:
            raise InvalidArgumentError('a multiplex plan needs at least one LED set')

        for k, leds in enumerate(sets):
            if not leds:
                raise InvalidArgumentError(f'LED set {k} is empty')

            indices = [led.led_index for led in leds]

            if len(set(indices)) != len(indices):
                raise InvalidArgumentError(f'LED set {k} lists an LED more than once: {indices}')

    @property
    def num_measurements(self) -> int:
        return len(self.sets)

    @property
    def leds(self) -> List[LedOffset]:
        """
        The union of all sets, in order of first appearance.
        """
        seen = {}

        for leds in self.sets:
            for led in leds:
                seen.setdefault(led.led_index, led)

        return list(seen.values())

    @cached_property
    def layout(self) -> 'PlanLayout':
        return PlanLayout.from_plan(self)


@dataclass(frozen=True, eq=False)
class PlanLayout:
    """
    Flattened view of a plan used by the batched operators.

    `offsets[j]` is the pixel offset of the j-th (k, i) pair; the pairs of
    measurement k occupy rows `starts[k]` up to the next start.
    """
    offsets: np.ndarray = field(repr=False)
    starts: np.ndarray = field(repr=False)
    groups: np.ndarray = field(repr=False)

    @classmethod
    def from_plan(cls, plan: MultiplexPlan) -> 'PlanLayout':
        offsets = [led.pixel_offset for leds in plan.sets for led in leds]
        sizes = [len(leds) for leds in plan.sets]

        starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.intp)
        groups = np.repeat(np.arange(len(sizes)), sizes)

        return cls(
            offsets=np.asarray(offsets, dtype=np.intp).reshape(-1, 2),
            starts=starts,
            groups=groups,
        )


def led_to_freq(u: int, v: int, geom: IlluminationGeometry) -> Tuple[float, float]:
    """
    Returns the illumination spatial frequency ξ (cycles/um) of LED (u, v).

    ξ is the transverse part of the unit propagation vector from the LED at
    (u·pitch, v·pitch, distance) to the sample, divided by the wavelength.
    """
    x = u * geom.led_pitch_mm
    y = v * geom.led_pitch_mm
    radius = math.sqrt(x * x + y * y + geom.led_distance_mm ** 2)

    return (x / radius) / geom.wavelength_um, (y / radius) / geom.wavelength_um


def illumination_na(u: int, v: int, geom: IlluminationGeometry) -> float:
    xi = led_to_freq(u, v, geom)

    return math.hypot(*xi) * geom.wavelength_um


def _round_half_away(value: float) -> int:
    return int(math.copysign(math.floor(abs(value) + 0.5), value))


def freq_to_offset(xi: Tuple[float, float], n1: int, n2: int, object_pixel_um: float) -> PixelOffset:
    """
    Snaps ξ to the n1 x n2 Fourier grid of pitch 1 / (n · object_pixel_um).

    Ties round away from zero.
    """
    return (
        _round_half_away(xi[0] * n1 * object_pixel_um),
        _round_half_away(xi[1] * n2 * object_pixel_um),
    )


def make_led_offset(
    led_index: int,
    u: int,
    v: int,
    geom: IlluminationGeometry,
    n1: int,
    n2: int,
    m1: int,
    m2: int
) -> LedOffset:
    """
    Builds the LedOffset of LED (u, v) for an n1 x n2 reconstruction
    of an m1 x m2 camera image.

    The reconstruction pixel is the object-plane camera pixel scaled by m / n,
    so the n-grid pitch 1 / (n * pixel) equals the camera pitch 1 / (m * camera pixel)
    and the offset is computed on the camera grid.
    """
    xi = led_to_freq(u, v, geom)

    return LedOffset(
        led_index=led_index,
        u=u,
        v=v,
        freq_cycles_per_um=xi,
        pixel_offset=freq_to_offset(xi, m1, m2, geom.object_pixel_um),
    )


def make_ideal_pupil(m1: int, m2: int, geom: IlluminationGeometry) -> Pupil:
    """
    Binary circular pupil: 1 on the closed disk |f| <= NA / λ, 0 elsewhere.
    """
    radius = geom.pupil_radius_pixels(m1, m2)

    if radius >= min(m1, m2) / 2:
        raise ConfigurationError(
            f'pupil exceeds measurement band: radius {radius:.3f} px '
            f'on a {m1}x{m2} grid'
        )

    c1, c2 = dc_index(m1, m2)
    pitch1 = 1.0 / (m1 * geom.object_pixel_um)
    pitch2 = 1.0 / (m2 * geom.object_pixel_um)

    f1 = (np.arange(m1) - c1) * pitch1
    f2 = (np.arange(m2) - c2) * pitch2
    radius_sq = f1[:, None] ** 2 + f2[None, :] ** 2

    support = radius_sq <= geom.cutoff_frequency ** 2 * (1 + _DISK_SLACK)

    return Pupil(values=support.astype(np.complex128), support=support)


def window_origin(off: PixelOffset, n1: int, n2: int, m1: int, m2: int) -> Tuple[int, int]:
    """
    Top-left corner of the m1 x m2 window centered at DC + `off`.
    """
    c1, c2 = dc_index(n1, n2)

    return c1 + int(off[0]) - m1 // 2, c2 + int(off[1]) - m2 // 2


def window_fits(off: PixelOffset, n1: int, n2: int, m1: int, m2: int) -> bool:
    r0, c0 = window_origin(off, n1, n2, m1, m2)

    return r0 >= 0 and c0 >= 0 and r0 + m1 <= n1 and c0 + m2 <= n2


def _checked_origin(off: PixelOffset, n1: int, n2: int, m1: int, m2: int) -> Tuple[int, int]:
    if not window_fits(off, n1, n2, m1, m2):
        raise WindowRangeError(off, n1, n2, m1, m2)

    return window_origin(off, n1, n2, m1, m2)


def crop(s: Field2D, off: PixelOffset, m1: int, m2: int) -> Field2D:
    """
    C_i: extracts the m1 x m2 window of `s` centered at DC + `off`.
    """
    n1, n2 = s.shape
    r0, c0 = _checked_origin(off, n1, n2, m1, m2)

    return s[r0:r0 + m1, c0:c0 + m2].copy()


def embed(t: Field2D, off: PixelOffset, n1: int, n2: int) -> Field2D:
    """
    C_i^H: zero n1 x n2 field holding `t` in the window centered at DC + `off`.
    """
    m1, m2 = t.shape
    r0, c0 = _checked_origin(off, n1, n2, m1, m2)

    out = np.zeros((n1, n2), dtype=np.result_type(t.dtype, np.complex128))
    out[r0:r0 + m1, c0:c0 + m2] = t

    return out


def crop_stack(s: Field2D, offsets: np.ndarray, m1: int, m2: int) -> np.ndarray:
    """
    Stacks `crop(s, off)` for every row of `offsets` into an (L, m1, m2) array.
    """
    n1, n2 = s.shape
    patches = np.empty((len(offsets), m1, m2), dtype=s.dtype)

    for j, off in enumerate(offsets):
        r0, c0 = _checked_origin(off, n1, n2, m1, m2)
        patches[j] = s[r0:r0 + m1, c0:c0 + m2]

    return patches


def embed_sum(patches: np.ndarray, offsets: np.ndarray, n1: int, n2: int) -> np.ndarray:
    """
    Σ_j embed(patches[j], offsets[j]), accumulated in index order.
    """
    _, m1, m2 = patches.shape
    out = np.zeros((n1, n2), dtype=patches.dtype)

    for j, off in enumerate(offsets):
        r0, c0 = _checked_origin(off, n1, n2, m1, m2)
        out[r0:r0 + m1, c0:c0 + m2] += patches[j]

    return out


def propagate(s: Field2D, pupil: Pupil, offsets: np.ndarray) -> np.ndarray:
    """
    Low-resolution camera-plane fields A_i s = F^H P C_i s for every offset.
    """
    return ifft2(pupil.values * crop_stack(s, offsets, pupil.rows, pupil.cols))


def backpropagate(fields: np.ndarray, pupil: Pupil, offsets: np.ndarray, n1: int, n2: int) -> Field2D:
    """
    Adjoint of `propagate`: Σ_i C_i^H P^H F fields[i].
    """
    return embed_sum(np.conj(pupil.values) * fft2(fields), offsets, n1, n2)


def _check_dimensions(s: Field2D, pupil: Pupil) -> None:
    if s.ndim != 2:
        raise InvalidArgumentError(f'sample spectrum must be 2-D, got shape {s.shape}')

    if s.shape[0] < pupil.rows or s.shape[1] < pupil.cols:
        raise InvalidArgumentError(
            f'{s.shape[0]}x{s.shape[1]} spectrum is smaller than the '
            f'{pupil.rows}x{pupil.cols} pupil'
        )


def forward_single(s: Field2D, pupil: Pupil, off: PixelOffset) -> RealImage2D:
    """
    Intensity |F^H P C_i s|^2 recorded with one LED lit.
    """
    _check_dimensions(s, pupil)

    field = ifft2(pupil.values * crop(s, off, pupil.rows, pupil.cols))

    return np.abs(field) ** 2


def forward_multiplexed(s: Field2D, pupil: Pupil, leds: Sequence[LedOffset]) -> RealImage2D:
    """
    Amplitude sqrt(Σ_{i in M} |F^H P C_i s|^2) recorded with the LEDs of `leds` lit together.
    """
    if not leds:
        raise InvalidArgumentError('cannot simulate a measurement with no LED lit')

    _check_dimensions(s, pupil)

    offsets = np.asarray([led.pixel_offset for led in leds], dtype=np.intp).reshape(-1, 2)
    fields = propagate(s, pupil, offsets)

    return np.sqrt(np.sum(np.abs(fields) ** 2, axis=0))


def validate_plan(plan: MultiplexPlan, n1: int, n2: int, m1: int, m2: int) -> List[str]:
    """
    Returns every violation of the plan on an n1 x n2 / m1 x m2 pair of grids.

    An empty list means the plan is valid.
    """
    violations = []

    if m1 >= n1 or m2 >= n2:
        violations.append(
            f'measurement band not smaller than reconstruction band: '
            f'{m1}x{m2} measurement vs {n1}x{n2} reconstruction'
        )

    for k, leds in enumerate(plan.sets):
        for led in leds:
            if not window_fits(led.pixel_offset, n1, n2, m1, m2):
                violations.append(
                    f'set {k}: LED {led.led_index} offset {tuple(led.pixel_offset)} '
                    f'puts its {m1}x{m2} window outside the {n1}x{n2} grid'
                )

    return violations
