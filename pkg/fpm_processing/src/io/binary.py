"""
FPMC / FPMR binary files.

    offset  size  field
    0       4     magic, b'FPMC' (complex128 payload) or b'FPMR' (float64 payload)
    4       2     version, uint16
    6       4     rows, uint32
    10      4     cols, uint32
    14      ...   row-major payload, rows * cols elements

Everything is little-endian. A complex element is stored as two float64
(real part first), so a 1x1 field file is 30 bytes long.
"""
import logging
import numpy as np

from fpm_processing.src.core import Field2D, RealImage2D
from fpm_processing.src.exceptions import FileFormatError, InvalidArgumentError


logger = logging.getLogger(__name__)


FORMAT_VERSION = 1

FIELD_MAGIC = b'FPMC'
IMAGE_MAGIC = b'FPMR'

HEADER_DTYPE = np.dtype([
    ('magic', 'S4'),
    ('version', '<u2'),
    ('rows', '<u4'),
    ('cols', '<u4'),
])

PAYLOAD_DTYPES = {
    FIELD_MAGIC: np.dtype('<c16'),
    IMAGE_MAGIC: np.dtype('<f8'),
}


def _write(path: str, magic: bytes, data: np.ndarray) -> None:
    rows, cols = data.shape

    header = np.zeros(1, dtype=HEADER_DTYPE)
    header['magic'] = magic
    header['version'] = FORMAT_VERSION
    header['rows'] = rows
    header['cols'] = cols

    payload = np.ascontiguousarray(data, dtype=PAYLOAD_DTYPES[magic])

    with open(path, 'wb') as handle:
        handle.write(header.tobytes())
        handle.write(payload.tobytes())


def _read(path: str, magic: bytes) -> np.ndarray:
    with open(path, 'rb') as handle:
        raw = handle.read()

    if len(raw) < HEADER_DTYPE.itemsize:
        raise FileFormatError(f'{path}: truncated header ({len(raw)} of {HEADER_DTYPE.itemsize} bytes)')

    header = np.frombuffer(raw, dtype=HEADER_DTYPE, count=1)[0]

    if header['magic'] != magic:
        raise FileFormatError(f'{path}: bad magic {bytes(header["magic"])!r}, expected {magic!r}')

    if header['version'] != FORMAT_VERSION:
        raise FileFormatError(f'{path}: unsupported format version {int(header["version"])}')

    rows, cols = int(header['rows']), int(header['cols'])
    dtype = PAYLOAD_DTYPES[magic]
    expected = rows * cols * dtype.itemsize
    payload = raw[HEADER_DTYPE.itemsize:]

    if len(payload) < expected:
        raise FileFormatError(f'{path}: truncated payload ({len(payload)} of {expected} bytes)')

    if len(payload) > expected:
        raise FileFormatError(f'{path}: {len(payload) - expected} trailing bytes after the payload')

    # Native-order copy, owned and writable
    return np.frombuffer(payload, dtype=dtype).reshape(rows, cols).astype(dtype.newbyteorder('='))


def write_field(path: str, field: Field2D) -> None:
    field = np.asarray(field)

    if field.ndim != 2:
        raise InvalidArgumentError(f'a field must be 2-D, got shape {field.shape}')

    _write(path, FIELD_MAGIC, field)


def read_field(path: str) -> Field2D:
    return _read(path, FIELD_MAGIC)


def write_image(path: str, image: RealImage2D, measurement: bool = False) -> None:
    """
    Writes a real image. In `measurement` mode negative entries are rejected.
    """
    image = np.asarray(image)

    if image.ndim != 2:
        raise InvalidArgumentError(f'an image must be 2-D, got shape {image.shape}')

    if np.iscomplexobj(image):
        raise InvalidArgumentError('an FPMR image must be real-valued')

    if measurement and np.any(image < 0):
        raise InvalidArgumentError(f'{path}: measurement image has negative entries')

    _write(path, IMAGE_MAGIC, image)


def read_image(path: str, measurement: bool = False) -> RealImage2D:
    image = _read(path, IMAGE_MAGIC)

    if measurement and np.any(image < 0):
        raise InvalidArgumentError(f'{path}: measurement image has negative entries')

    return image

