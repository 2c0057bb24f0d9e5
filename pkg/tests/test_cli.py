import os
import numpy as np
import pandas as pd
import pytest

from fpm_processing import __version__
from fpm_processing.cli_app.main import main
from fpm_processing.processor_app.check_grad import GradientChecker
from fpm_processing.src.io.binary import read_image, write_image
from fpm_processing.src.io.dataset import read_dataset, write_dataset
from fpm_processing.src.io.manifest import write_manifest
from fpm_processing.src.objective import MeasurementSet, gradient, step_size
from fpm_processing.src.optics import IlluminationGeometry, MultiplexPlan, make_ideal_pupil
from fpm_processing.src.phantom import DatasetManifest, build_led_grid


def summary_values(line: str) -> dict:
    return dict(part.split('=', 1) for part in line.split() if '=' in part)


def directory_bytes(path: str) -> dict:
    contents = {}

    for name in sorted(os.listdir(path)):
        with open(os.path.join(path, name), 'rb') as handle:
            contents[name] = handle.read()

    return contents


@pytest.fixture
def manifest_path(tmp_path):
    path = str(tmp_path / 'manifest.yaml')
    write_manifest(path, DatasetManifest.desk_scale())

    return path


@pytest.fixture
def dataset_dir(tmp_path, manifest_path):
    path = str(tmp_path / 'dataset')

    assert main(['simulate', '--manifest', manifest_path, '--out', path]) == 0

    return path


def test_version(capsys):
    assert main(['version']) == 0
    assert capsys.readouterr().out.strip() == __version__


def test_simulate_desk_scale(dataset_dir, capsys):
    names = sorted(os.listdir(dataset_dir))

    assert names == ['manifest.yaml', 's_true.fpmc'] + [f'y_{k:03d}.fpmr' for k in range(9)]

    dataset = read_dataset(dataset_dir)

    assert dataset.manifest.plan.num_measurements == 9
    assert all(image.shape == (32, 32) and image.min() >= 0 for image in dataset.measurements.images)


def test_simulate_from_source_images(tmp_path, manifest_path):
    amplitude = str(tmp_path / 'amplitude.fpmr')
    phase = str(tmp_path / 'phase.fpmr')
    write_image(amplitude, np.full((16, 16), 0.5))
    write_image(phase, np.zeros((16, 16)))

    out = str(tmp_path / 'dataset')

    assert main(['simulate', '--manifest', manifest_path, '--amplitude', amplitude, '--phase', phase, '--out', out]) == 0

    # A constant half-amplitude object gives a constant image through the on-axis LED
    dataset = read_dataset(out)
    center = [k for k, leds in enumerate(dataset.manifest.plan.sets) if leds[0].pixel_offset == (0, 0)][0]

    np.testing.assert_allclose(dataset.measurements.images[center], np.full((32, 32), 1.0), atol=1e-12)


def test_zero_noise_sigma_matches_no_flag(tmp_path, manifest_path):
    plain = str(tmp_path / 'plain')
    zero = str(tmp_path / 'zero')

    assert main(['simulate', '--manifest', manifest_path, '--out', plain]) == 0
    assert main(['simulate', '--manifest', manifest_path, '--out', zero, '--noise-sigma', '0']) == 0

    assert directory_bytes(plain) == directory_bytes(zero)


def test_noise_changes_the_measurements(tmp_path, manifest_path):
    plain = str(tmp_path / 'plain')
    noisy = str(tmp_path / 'noisy')

    assert main(['simulate', '--manifest', manifest_path, '--out', plain]) == 0
    assert main(['simulate', '--manifest', manifest_path, '--out', noisy, '--noise-sigma', '0.1']) == 0

    assert read_dataset(noisy).manifest.noise_model.value == 'gaussian'
    assert not np.array_equal(read_image(os.path.join(plain, 'y_000.fpmr')), read_image(os.path.join(noisy, 'y_000.fpmr')))


def test_oversized_pupil_is_a_configuration_error(tmp_path, caplog):
    path = str(tmp_path / 'manifest.yaml')
    write_manifest(path, DatasetManifest.desk_scale(geometry=IlluminationGeometry(numerical_aperture=0.5)))

    assert main(['simulate', '--manifest', path, '--out', str(tmp_path / 'out')]) == 2
    assert 'pupil exceeds measurement band' in caplog.text


def test_reconstruct_reports_the_analytical_step(tmp_path, dataset_dir, capsys):
    capsys.readouterr()
    out = str(tmp_path / 'recon')

    assert main(['reconstruct', '--dataset', dataset_dir, '--iters', '5', '--out', out]) == 0

    values = summary_values(capsys.readouterr().out.strip().splitlines()[-1])
    dataset = read_dataset(dataset_dir)
    expected = step_size(dataset.measurements.pupil, dataset.manifest.plan, 64, 64)

    assert values['algorithm'] == 'wf'
    assert values['iterations'] == '5'
    assert float(values['mu']) == expected
    assert values['max_iters'] == '5'
    assert values['momentum'] == 'nesterov'
    assert float(values['grad_tol']) == 0.0
    assert float(values['init_amplitude']) == 1.0
    assert float(values['init_phase']) == 0.0
    assert 'rel_error' in values and 'rel_error_covered' in values
    assert sorted(os.listdir(out)) == ['amplitude.fpmr', 'phase.fpmr', 's_hat.fpmc', 'trace.csv']
    assert len(pd.read_csv(os.path.join(out, 'trace.csv'))) == 6


def test_reconstruct_honours_the_step_flag(tmp_path, dataset_dir, capsys):
    capsys.readouterr()

    assert main(['reconstruct', '--dataset', dataset_dir, '--iters', '2', '--step', '0.125',
                 '--algorithm', 'awf', '--out', str(tmp_path / 'recon')]) == 0

    values = summary_values(capsys.readouterr().out.strip().splitlines()[-1])

    assert values['algorithm'] == 'awf'
    assert float(values['mu']) == 0.125


def test_zero_step_is_an_invalid_argument(tmp_path, dataset_dir):
    assert main(['reconstruct', '--dataset', dataset_dir, '--step', '0', '--out', str(tmp_path / 'recon')]) == 2


def test_manifest_with_an_unsupported_tag_is_an_io_error(tmp_path):
    path = tmp_path / 'manifest.yaml'
    write_manifest(str(path), DatasetManifest.desk_scale())
    path.write_text(path.read_text().replace('magnification: 8.0', 'magnification: !lens 8.0'))

    assert main(['simulate', '--manifest', str(path), '--out', str(tmp_path / 'out')]) == 3


def test_unknown_flag_is_an_invalid_argument():
    assert main(['overlap', '--colour', 'blue']) == 2


def test_missing_dataset_is_an_io_error(tmp_path, caplog):
    assert main(['reconstruct', '--dataset', str(tmp_path / 'nothing'), '--out', str(tmp_path / 'recon')]) == 3
    assert 'manifest.yaml' in caplog.text


def test_corrupted_measurement_file_is_an_io_error(tmp_path, dataset_dir):
    path = os.path.join(dataset_dir, 'y_004.fpmr')

    with open(path, 'r+b') as handle:
        handle.write(b'XXXX')

    assert main(['reconstruct', '--dataset', dataset_dir, '--iters', '1', '--out', str(tmp_path / 'recon')]) == 3


@pytest.mark.parametrize('at', ['random', 'truth'])
def test_check_grad_passes(dataset_dir, capsys, at):
    capsys.readouterr()

    assert main(['check-grad', '--dataset', dataset_dir, '--at', at]) == 0
    assert capsys.readouterr().out.startswith('PASS')


def test_check_grad_at_the_truth_sees_a_vanishing_gradient(dataset_dir):
    report = GradientChecker(dataset_dir, at='truth').report

    assert report.passed
    assert report.gradient_norm < 1e-8


def test_check_grad_flags_a_corrupted_gradient(dataset_dir):
    report = GradientChecker(dataset_dir, gradient_fn=lambda s, meas: 2.0 * gradient(s, meas)).report

    assert not report.passed
    assert report.max_error > 1e-5


def test_check_grad_without_truth_is_a_validation_error(tmp_path, dataset_dir):
    os.remove(os.path.join(dataset_dir, 's_true.fpmc'))

    assert main(['check-grad', '--dataset', dataset_dir, '--at', 'truth']) == 2


def test_overlap_matches_a_lattice_count(tmp_path, dataset_dir, capsys):
    capsys.readouterr()
    out = str(tmp_path / 'overlap.fpmr')

    assert main(['overlap', '--dataset', dataset_dir, '--out', out]) == 0

    dataset = read_dataset(dataset_dir)
    support = dataset.measurements.pupil.support
    counts = np.zeros((64, 64))

    for leds in dataset.manifest.plan.sets:
        for led in leds:
            r0 = 32 + led.pixel_offset[0] - 16
            c0 = 32 + led.pixel_offset[1] - 16
            counts[r0:r0 + 32, c0:c0 + 32] += support

    values = summary_values(capsys.readouterr().out)

    assert float(values['max_value']) == counts.max()
    assert float(values['mu']) == 1.0 / counts.max()
    np.testing.assert_array_equal(read_image(out), counts)


def test_overlap_of_a_duplicated_led(tmp_path, capsys):
    manifest = DatasetManifest.desk_scale(n1=48, n2=48)
    geometry = manifest.geometry
    pupil = make_ideal_pupil(32, 32, geometry)

    center = [led for led in build_led_grid(geometry, 48, 48, 32, 32) if led.pixel_offset == (0, 0)][0]
    plan = MultiplexPlan(sets=((center,), (center,)))

    images = (np.ones((32, 32)), np.ones((32, 32)))
    path = str(tmp_path / 'dataset')
    write_dataset(path, DatasetManifest.desk_scale(n1=48, n2=48, plan=plan), MeasurementSet(images=images, plan=plan, pupil=pupil))

    capsys.readouterr()

    assert main(['overlap', '--dataset', path, '--out', str(tmp_path / 'overlap.fpmr')]) == 0
    assert capsys.readouterr().out.strip() == 'max_value=2 mu=0.5'


def test_tune_step_writes_every_candidate(tmp_path, dataset_dir, capsys):
    capsys.readouterr()
    out = str(tmp_path / 'tuning.csv')

    assert main(['tune-step', '--dataset', dataset_dir, '--iters', '3', '--multipliers', '0.5,1', '--out', out]) == 0

    dataframe = pd.read_csv(out)
    lines = capsys.readouterr().out.strip().splitlines()

    assert list(dataframe.columns) == ['multiplier', 'step', 'final_cost', 'monotone']
    assert list(dataframe['multiplier']) == [0.5, 1.0]
    assert lines[-1].startswith('analytic_mu=')


def test_bad_multipliers_are_rejected(dataset_dir):
    assert main(['tune-step', '--dataset', dataset_dir, '--multipliers', '1,-2']) == 2


def test_runs_are_byte_for_byte_reproducible(tmp_path, manifest_path):
    for name in ('first', 'second'):
        assert main(['simulate', '--manifest', manifest_path, '--out', str(tmp_path / name / 'data'), '--noise-sigma', '0.05', '--seed', '7']) == 0
        assert main(['reconstruct', '--dataset', str(tmp_path / name / 'data'), '--algorithm', 'awf', '--iters', '10',
                     '--out', str(tmp_path / name / 'recon')]) == 0

    for part in ('data', 'recon'):
        assert directory_bytes(str(tmp_path / 'first' / part)) == directory_bytes(str(tmp_path / 'second' / part))
