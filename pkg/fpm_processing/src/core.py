"""
Complex 2-D array arithmetic shared by the whole pipeline.

Fields are plain numpy arrays:

- `Field2D`: complex128 array of shape (rows, cols), row-major.
- `RealImage2D`: float64 array of shape (rows, cols), row-major.

Frequency-domain arrays are centered: index (rows // 2, cols // 2) holds DC.
`fft2` and `ifft2` are unitary and take care of the quadrant swaps, so callers
never see an uncentered spectrum. Both accept stacks of fields (any leading
dimensions) and transform the last two axes.
"""
import numpy as np

from typing import List, Tuple

from fpm_processing.src.exceptions import InvalidArgumentError


Field2D = np.ndarray
RealImage2D = np.ndarray
Rng = np.random.Generator

_AXES = (-2, -1)


def as_field(data, name: str = 'field') -> Field2D:
    """
    Returns `data` as a complex128 2-D array, rejecting empty
    or non-finite input.
    """
    field = np.asarray(data, dtype=np.complex128)

    if field.ndim != 2 or field.size == 0:
        raise InvalidArgumentError(f'{name} must be a non-empty 2-D array, got shape {field.shape}')

    if not np.all(np.isfinite(field)):
        raise InvalidArgumentError(f'{name} contains NaN or Inf entries')

    return field


def as_image(data, name: str = 'image', non_negative: bool = False) -> RealImage2D:
    """
    Returns `data` as a float64 2-D array.

    With `non_negative`, negative entries are rejected (measurement images).
    """
    image = np.asarray(data, dtype=np.float64)

    if image.ndim != 2 or image.size == 0:
        raise InvalidArgumentError(f'{name} must be a non-empty 2-D array, got shape {image.shape}')

    if not np.all(np.isfinite(image)):
        raise InvalidArgumentError(f'{name} contains NaN or Inf entries')

    if non_negative and np.any(image < 0):
        raise InvalidArgumentError(f'{name} has negative entries')

    return image


def dc_index(rows: int, cols: int) -> Tuple[int, int]:
    return rows // 2, cols // 2


def fft2(f: Field2D) -> Field2D:
    """
    Unitary 2-D DFT of a spatial field, returned with DC at the center.
    """
    return np.fft.fftshift(np.fft.fft2(f, axes=_AXES, norm='ortho'), axes=_AXES)


def ifft2(f: Field2D) -> Field2D:
    """
    Exact inverse of `fft2`: takes a centered spectrum back to the spatial domain.
    """
    return np.fft.ifft2(np.fft.ifftshift(f, axes=_AXES), axes=_AXES, norm='ortho')


def inner(a: np.ndarray, b: np.ndarray) -> complex:
    """
    ⟨a, b⟩ = Σ a · conj(b), linear in the first argument.
    """
    return complex(np.vdot(b, a))


def make_rng(seed: int, stream: int = 0) -> Rng:
    """
    Returns a PCG64 generator for `seed`.

    Distinct `stream` values give independent sequences for the same seed,
    so the plan shuffle and the noise draws never share a stream.
    """
    if seed < 0:
        raise InvalidArgumentError(f'seed must be non-negative, got {seed}')

    sequence = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))

    return np.random.Generator(np.random.PCG64(sequence))


def rng_subset(rng: Rng, n: int, k: int) -> List[int]:
    """
    Draws `k` distinct indices from [0, n) uniformly without replacement.
    """
    if n < 1 or k < 1:
        raise InvalidArgumentError(f'n and k must be positive, got n={n}, k={k}')

    if k > n:
        raise InvalidArgumentError(f'cannot draw {k} distinct indices out of {n}')

    return [int(i) for i in rng.choice(n, size=k, replace=False)]
