"""
Dataset and reconstruction directories.

    dataset/                 reconstruction/
      manifest.yaml            s_hat.fpmc
      y_000.fpmr               amplitude.fpmr
      ...                      phase.fpmr
      s_true.fpmc (optional)   trace.csv
"""
import logging
import os
import numpy as np

from dataclasses import dataclass
from typing import List, Optional

from fpm_processing.src.core import Field2D, ifft2
from fpm_processing.src.exceptions import FileFormatError, ValidationError
from fpm_processing.src.io.binary import read_field, read_image, write_field, write_image
from fpm_processing.src.io.manifest import read_manifest, write_manifest
from fpm_processing.src.io.trace import write_trace_csv
from fpm_processing.src.objective import MeasurementSet
from fpm_processing.src.optics import make_ideal_pupil
from fpm_processing.src.phantom import DatasetManifest
from fpm_processing.src.solver import SolverTrace


logger = logging.getLogger(__name__)


MANIFEST_FILENAME = 'manifest.yaml'
GROUND_TRUTH_FILENAME = 's_true.fpmc'

ESTIMATE_FILENAME = 's_hat.fpmc'
AMPLITUDE_FILENAME = 'amplitude.fpmr'
PHASE_FILENAME = 'phase.fpmr'
TRACE_FILENAME = 'trace.csv'


def measurement_filename(k: int) -> str:
    return f'y_{k:03d}.fpmr'


@dataclass(eq=False)
class Dataset:
    manifest: DatasetManifest
    measurements: MeasurementSet
    s_true: Optional[Field2D] = None


def _ensure_dir(path: str) -> None:
    is_exists = os.path.exists(path)

    if not is_exists:
        os.makedirs(path)


def write_dataset(
    path: str,
    manifest: DatasetManifest,
    measurements: MeasurementSet,
    s_true: Optional[Field2D] = None
) -> List[str]:
    """
    Writes the manifest, one FPMR file per measurement and, when given, the
    ground truth. Returns the written file names.
    """
    _ensure_dir(path)

    logger.info(f"Save dataset of {measurements.num_measurements} measurements into {path}...")

    written = [MANIFEST_FILENAME]
    write_manifest(os.path.join(path, MANIFEST_FILENAME), manifest)

    for k, image in enumerate(measurements.images):
        name = measurement_filename(k)
        write_image(os.path.join(path, name), image, measurement=True)
        written.append(name)

    if s_true is not None:
        write_field(os.path.join(path, GROUND_TRUTH_FILENAME), s_true)
        written.append(GROUND_TRUTH_FILENAME)

    return written


def read_dataset(path: str) -> Dataset:
    """
    Loads a dataset directory; its manifest must carry a plan.
    """
    manifest_path = os.path.join(path, MANIFEST_FILENAME)

    if not os.path.isfile(manifest_path):
        raise FileFormatError(f'{path}: no {MANIFEST_FILENAME} found')

    manifest = read_manifest(manifest_path)

    if manifest.plan is None:
        raise ValidationError([f'{manifest_path}: the manifest has no multiplex plan, run simulate first'])

    images = []

    for k in range(manifest.plan.num_measurements):
        image_path = os.path.join(path, measurement_filename(k))

        if not os.path.isfile(image_path):
            raise FileFormatError(f'{path}: missing measurement file {measurement_filename(k)}')

        images.append(read_image(image_path, measurement=True))

    truth_path = os.path.join(path, GROUND_TRUTH_FILENAME)
    s_true = read_field(truth_path) if os.path.isfile(truth_path) else None

    if s_true is not None and s_true.shape != (manifest.n1, manifest.n2):
        raise ValidationError([
            f'{GROUND_TRUTH_FILENAME} is {s_true.shape[0]}x{s_true.shape[1]}, '
            f'the manifest expects {manifest.n1}x{manifest.n2}'
        ])

    measurements = MeasurementSet(
        images=tuple(images),
        plan=manifest.plan,
        pupil=make_ideal_pupil(manifest.m1, manifest.m2, manifest.geometry),
    )

    return Dataset(manifest=manifest, measurements=measurements, s_true=s_true)


def write_reconstruction(path: str, s_hat: Field2D, trace: SolverTrace) -> List[str]:
    """
    Writes the estimated spectrum, the amplitude and phase of its image
    and the solver trace.
    """
    _ensure_dir(path)

    image = ifft2(s_hat)

    write_field(os.path.join(path, ESTIMATE_FILENAME), s_hat)
    write_image(os.path.join(path, AMPLITUDE_FILENAME), np.abs(image))
    write_image(os.path.join(path, PHASE_FILENAME), np.angle(image))
    write_trace_csv(os.path.join(path, TRACE_FILENAME), trace)

    return [ESTIMATE_FILENAME, AMPLITUDE_FILENAME, PHASE_FILENAME, TRACE_FILENAME]
