"""Input coercion helpers shared by the estimator API and the CLI."""

import os

import numpy as np

from .exceptions import ConfigurationError
from .niftiio import Volume3D, Volume4D, read_design, read_nifti, volume_from_array


def coerce_volume(x, lazy=False):
    """Accept a Volume4D, a 4-D array, or a file path; return a Volume4D."""
    if isinstance(x, Volume4D):
        return x
    if isinstance(x, (str, os.PathLike)):
        vol = read_nifti(os.fspath(x), lazy=lazy)
        if not isinstance(vol, Volume4D):
            raise ConfigurationError(f"{x} is a 3-D image; a 4-D series is required")
        return vol
    arr = np.asarray(x)
    if arr.ndim != 4:
        raise ConfigurationError(
            f"expected a 4-D array (x, y, z, scans), got shape {arr.shape}"
        )
    return volume_from_array(arr.astype(np.float64, copy=False))


def coerce_volumes(xs, lazy=True):
    """Accept a list of volume-like inputs; return a list of Volume4D."""
    if isinstance(xs, (Volume4D, str, os.PathLike)) or (
        isinstance(xs, np.ndarray) and xs.ndim == 4
    ):
        xs = [xs]
    return [coerce_volume(x, lazy=lazy) for x in xs]


def coerce_design(design):
    """Accept a (T, p) array or a design file path; return float64 array."""
    if isinstance(design, (str, os.PathLike)):
        return read_design(os.fspath(design))
    arr = np.asarray(design, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ConfigurationError(
            f"design must be 2-D (scans x regressors), got shape {arr.shape}"
        )
    return arr


def coerce_mask(mask):
    """Accept None, a boolean/numeric 3-D array, a Volume3D, or a path."""
    if mask is None:
        return None
    if isinstance(mask, (str, os.PathLike)):
        return read_nifti(os.fspath(mask))
    if isinstance(mask, (Volume3D, Volume4D)):
        return mask
    arr = np.asarray(mask)
    if arr.ndim not in (3, 4):
        raise ConfigurationError(f"mask must be 3-D, got shape {arr.shape}")
    return arr
