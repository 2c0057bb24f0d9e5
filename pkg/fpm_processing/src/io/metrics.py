import numpy as np

from typing import Optional

from fpm_processing.src.core import Field2D, as_field, inner
from fpm_processing.src.exceptions import InvalidArgumentError


def relative_error_mod_phase(s: Field2D, s_ref: Field2D, mask: Optional[np.ndarray] = None) -> float:
    """
    min_θ ||s - e^{jθ} s_ref|| / ||s_ref||, the minimiser being θ = arg⟨s, s_ref⟩.

    With `mask`, both fields are restricted to the pixels where it is true.
    """
    s = as_field(s, 's')
    s_ref = as_field(s_ref, 's_ref')

    if s.shape != s_ref.shape:
        raise InvalidArgumentError(f'shape mismatch: {s.shape} vs {s_ref.shape}')

    if mask is not None:
        mask = np.asarray(mask, dtype=bool)

        if mask.shape != s.shape:
            raise InvalidArgumentError(f'mask shape {mask.shape} differs from field shape {s.shape}')

        s = s[mask]
        s_ref = s_ref[mask]

    reference_norm = float(np.linalg.norm(s_ref))

    if reference_norm == 0:
        raise InvalidArgumentError('reference field is zero')

    theta = np.angle(inner(s, s_ref))

    return float(np.linalg.norm(s - np.exp(1j * theta) * s_ref)) / reference_norm
