import math
import numpy as np
import pytest

from dataclasses import replace
from numpy.testing import assert_allclose, assert_array_equal

from fpm_processing.src.core import fft2, ifft2, make_rng
from fpm_processing.src.exceptions import (
    ConfigurationError,
    InvalidArgumentError,
    ValidationError,
)
from fpm_processing.src.optics import (
    IlluminationGeometry,
    MultiplexPlan,
    forward_multiplexed,
)
from fpm_processing.src.phantom import (
    DatasetManifest,
    NoiseModel,
    PlanKind,
    build_led_grid,
    make_phantom,
    make_plan_random,
    make_plan_sequential,
    make_test_pattern,
    resolve_manifest,
    simulate,
)


def test_make_phantom_builds_the_spectrum():
    amplitude = np.full((8, 8), 0.5)
    phase = np.arange(64, dtype=float).reshape(8, 8)

    phantom = make_phantom(amplitude, phase, 8, 8, (-1.0, 1.0))

    assert phantom.phase.min() == -1.0
    assert phantom.phase.max() == 1.0
    assert_allclose(ifft2(phantom.s_true), 0.5 * np.exp(1j * phantom.phase), atol=1e-12)


def test_make_phantom_clips_the_amplitude():
    phantom = make_phantom([[2.0, -1.0], [0.3, 1.0]], np.zeros((2, 2)), 2, 2)

    assert_array_equal(phantom.amplitude, [[1.0, 0.0], [0.3, 1.0]])


def test_constant_phase_source_maps_to_the_middle():
    phantom = make_phantom(np.ones((4, 4)), np.full((4, 4), 7.0), 4, 4, (0.0, 1.0))

    assert_array_equal(phantom.phase, np.full((4, 4), 0.5))


def test_make_phantom_resamples_nearest_neighbour():
    phantom = make_phantom([[0.1, 0.2], [0.3, 0.4]], np.zeros((2, 2)), 4, 4)

    assert_array_equal(phantom.amplitude, [
        [0.1, 0.1, 0.2, 0.2],
        [0.1, 0.1, 0.2, 0.2],
        [0.3, 0.3, 0.4, 0.4],
        [0.3, 0.3, 0.4, 0.4],
    ])


def test_test_patterns():
    ellipses = make_test_pattern('ellipses', 32, 32, make_rng(0))

    assert ellipses.shape == (32, 32)
    assert ellipses.min() >= 0.0 and ellipses.max() == 1.0
    assert_array_equal(ellipses, make_test_pattern('ellipses', 32, 32, make_rng(0)))

    board = make_test_pattern('checkerboard', 16, 16)
    assert board[0, 0] == 0.0 and board[0, 8] == 1.0 and board[8, 8] == 0.0

    assert_array_equal(make_test_pattern('constant', 3, 3), np.ones((3, 3)))

    with pytest.raises(InvalidArgumentError):
        make_test_pattern('stripes', 4, 4)

    with pytest.raises(InvalidArgumentError):
        make_test_pattern('ellipses', 4, 4)


def test_desk_scale_grid_has_nine_leds():
    leds = build_led_grid(IlluminationGeometry(), 64, 64, 32, 32)

    assert [led.led_index for led in leds] == list(range(9))
    assert leds[4].pixel_offset == (0, 0)


def test_build_led_grid_fails_when_nothing_fits():
    geom = IlluminationGeometry(led_whitelist=[(3, 0)])

    with pytest.raises(ConfigurationError):
        build_led_grid(geom, 34, 34, 32, 32)


def test_sequential_plan_lights_one_led_per_measurement():
    leds = build_led_grid(IlluminationGeometry(), 64, 64, 32, 32)
    plan = make_plan_sequential(leds)

    assert plan.num_measurements == 9
    assert all(len(s) == 1 for s in plan.sets)


def test_random_plan_is_an_exact_partition():
    leds = build_led_grid(IlluminationGeometry(grid_half_extent=2), 64, 64, 32, 32)

    plan = make_plan_random(leds, 4, make_rng(3))
    lit = [led.led_index for s in plan.sets for led in s]

    assert plan.num_measurements == math.ceil(25 / 4)
    assert [len(s) for s in plan.sets] == [4, 4, 4, 4, 4, 4, 1]
    assert sorted(lit) == list(range(25))


def test_random_plan_is_reproducible():
    leds = build_led_grid(IlluminationGeometry(grid_half_extent=2), 64, 64, 32, 32)

    assert make_plan_random(leds, 4, make_rng(8)) == make_plan_random(leds, 4, make_rng(8))
    assert make_plan_random(leds, 4, make_rng(8)) != make_plan_random(leds, 4, make_rng(9))


def test_random_plan_rejects_bad_groups():
    leds = build_led_grid(IlluminationGeometry(), 64, 64, 32, 32)

    with pytest.raises(InvalidArgumentError):
        make_plan_random(leds, 0, make_rng(0))

    with pytest.raises(InvalidArgumentError):
        make_plan_random(leds, 10, make_rng(0))


def test_resolve_manifest_generates_the_plan():
    manifest = resolve_manifest(DatasetManifest.desk_scale())

    assert manifest.plan.num_measurements == 9

    random_manifest = resolve_manifest(DatasetManifest.desk_scale(plan_kind='random', group_size=4, seed=5))

    assert random_manifest.plan_kind is PlanKind.RANDOM
    assert random_manifest.plan.num_measurements == 3


def test_resolve_manifest_rejects_an_oversized_pupil():
    manifest = DatasetManifest.desk_scale(geometry=IlluminationGeometry(numerical_aperture=0.5))

    with pytest.raises(ConfigurationError, match='pupil exceeds measurement band'):
        resolve_manifest(manifest)


def test_manifest_validation(make_led_at):
    with pytest.raises(InvalidArgumentError):
        DatasetManifest.desk_scale(noise_sigma=-1.0)

    bad = DatasetManifest.desk_scale(plan=MultiplexPlan(sets=((make_led_at(0, (40, 0)),),)))

    with pytest.raises(ValidationError) as error:
        bad.validate()

    assert len(error.value.violations) == 1


def test_simulate_without_noise_matches_the_forward_model():
    manifest = resolve_manifest(DatasetManifest.desk_scale())
    phantom = make_phantom(make_test_pattern('ellipses', 64, 64, make_rng(1)), np.zeros((64, 64)), 64, 64)

    meas = simulate(phantom, manifest)

    assert meas.num_measurements == 9

    for image, leds in zip(meas.images, manifest.plan.sets):
        assert_array_equal(image, forward_multiplexed(phantom.s_true, meas.pupil, leds))


def test_zero_sigma_is_bitwise_noiseless():
    manifest = resolve_manifest(DatasetManifest.desk_scale())
    phantom = make_phantom(np.ones((64, 64)), make_test_pattern('checkerboard', 64, 64), 64, 64)

    clean = simulate(phantom, manifest)
    zero = simulate(phantom, replace(manifest, noise_model=NoiseModel.GAUSSIAN, noise_sigma=0.0))

    for a, b in zip(clean.images, zero.images):
        assert_array_equal(a, b)


def test_noise_is_seeded_and_non_negative():
    manifest = resolve_manifest(DatasetManifest.desk_scale(noise_model='gaussian', noise_sigma=0.5, seed=2))
    phantom = make_phantom(np.ones((64, 64)), make_test_pattern('checkerboard', 64, 64), 64, 64)

    first = simulate(phantom, manifest)
    second = simulate(phantom, manifest)
    clean = simulate(phantom, replace(manifest, noise_sigma=0.0))

    assert all(np.array_equal(a, b) for a, b in zip(first.images, second.images))
    assert all(image.min() >= 0.0 for image in first.images)
    assert not np.array_equal(first.images[0], clean.images[0])


def test_simulate_rejects_a_mismatched_phantom():
    manifest = resolve_manifest(DatasetManifest.desk_scale())
    phantom = make_phantom(np.ones((32, 32)), np.zeros((32, 32)), 32, 32)

    with pytest.raises(InvalidArgumentError):
        simulate(phantom, manifest)


def test_phantom_spectrum_is_centered():
    phantom = make_phantom(np.ones((8, 8)), np.zeros((8, 8)), 8, 8, (0.0, 0.0))

    assert_allclose(phantom.s_true, fft2(np.ones((8, 8))), atol=1e-12)
    assert abs(phantom.s_true[4, 4]) == pytest.approx(8.0)
