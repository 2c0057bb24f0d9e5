import numpy as np
import pytest

from fpm_processing.src.core import make_rng
from fpm_processing.src.objective import MeasurementSet
from fpm_processing.src.optics import (
    IlluminationGeometry,
    LedOffset,
    MultiplexPlan,
    Pupil,
    forward_multiplexed,
)
from fpm_processing.src.phantom import (
    DatasetManifest,
    make_phantom,
    make_test_pattern,
    resolve_manifest,
    simulate,
)


def offset_range(n: int, m: int):
    """
    Inclusive range of pixel offsets whose m-window fits an n-grid.
    """
    return m // 2 - n // 2, n - m + m // 2 - n // 2


def make_led(index: int, offset) -> LedOffset:
    return LedOffset(
        led_index=index,
        u=0,
        v=0,
        freq_cycles_per_um=(0.0, 0.0),
        pixel_offset=(int(offset[0]), int(offset[1])),
    )


def random_pupil(rng, m1: int, m2: int, full: bool = False) -> Pupil:
    if full:
        support = np.ones((m1, m2), dtype=bool)
    else:
        support = rng.random((m1, m2)) < 0.7

    values = support * (rng.uniform(0.5, 1.5, (m1, m2)) * np.exp(1j * rng.uniform(-np.pi, np.pi, (m1, m2))))

    return Pupil(values=values, support=support)


def random_plan(rng, n1: int, n2: int, m1: int, m2: int, num_sets: int = 3, max_group: int = 3) -> MultiplexPlan:
    lo1, hi1 = offset_range(n1, m1)
    lo2, hi2 = offset_range(n2, m2)

    num_leds = max(max_group, 4)
    leds = [
        make_led(i, (rng.integers(lo1, hi1 + 1), rng.integers(lo2, hi2 + 1)))
        for i in range(num_leds)
    ]

    sets = []

    for _ in range(num_sets):
        size = int(rng.integers(1, max_group + 1))
        picks = rng.choice(num_leds, size=size, replace=False)
        sets.append(tuple(leds[int(p)] for p in picks))

    return MultiplexPlan(sets=tuple(sets))


def random_field(rng, n1: int, n2: int) -> np.ndarray:
    return rng.standard_normal((n1, n2)) + 1j * rng.standard_normal((n1, n2))


def random_instance(seed: int, n=(12, 12), m=(6, 6), num_sets: int = 3, max_group: int = 3, full_pupil: bool = True):
    """
    Returns `(s, meas)`: a random probe point and measurements simulated
    from an unrelated random spectrum.
    """
    rng = make_rng(seed)
    n1, n2 = n
    m1, m2 = m

    pupil = random_pupil(rng, m1, m2, full=full_pupil)
    plan = random_plan(rng, n1, n2, m1, m2, num_sets, max_group)

    truth = random_field(rng, n1, n2)
    images = tuple(forward_multiplexed(truth, pupil, leds) for leds in plan.sets)

    return random_field(rng, n1, n2), MeasurementSet(images=images, plan=plan, pupil=pupil)


def small_problem(seed: int, n: int = 32, m: int = 16, **overrides):
    """
    Noiseless sequential 3x3 LED problem on an n x n grid built from
    ellipse phantoms. Returns `(phantom, manifest, meas)`.
    """
    values = dict(geometry=IlluminationGeometry(), n1=n, n2=n, m1=m, m2=m, seed=seed)
    values.update(overrides)

    manifest = resolve_manifest(DatasetManifest(**values))

    phantom = make_phantom(
        make_test_pattern('ellipses', n, n, make_rng(seed, 2)),
        make_test_pattern('ellipses', n, n, make_rng(seed, 3)),
        n,
        n,
        manifest.phase_range,
    )

    return phantom, manifest, simulate(phantom, manifest)


@pytest.fixture
def make_instance():
    return random_instance


@pytest.fixture
def make_problem():
    return small_problem


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def make_led_at():
    return make_led


@pytest.fixture
def make_random_plan():
    return random_plan


@pytest.fixture
def make_random_pupil():
    return random_pupil
