"""Voxel-cluster construction and analysis masks."""

import warnings

import numpy as np

from .exceptions import ConfigurationError


def sphere_offsets(radius):
    """Integer offsets within Euclidean distance ``radius`` of the origin.

    The origin comes first; the remaining offsets are sorted
    lexicographically.  radius 0 -> 1 offset, 1 -> 7, 2 -> 33.
    """
    if radius < 0:
        raise ConfigurationError(f"cluster radius must be non-negative, got {radius}")
    reach = int(np.floor(radius))
    r2 = float(radius) * float(radius)
    offsets = []
    for di in range(-reach, reach + 1):
        for dj in range(-reach, reach + 1):
            for dk in range(-reach, reach + 1):
                if di * di + dj * dj + dk * dk <= r2 and (di, dj, dk) != (0, 0, 0):
                    offsets.append((di, dj, dk))
    offsets.sort()
    return [(0, 0, 0)] + offsets


def build_cluster(center, radius, dims, mask=None):
    """Member voxels of the sphere around ``center``, centre first.

    Offsets falling outside the volume bounds, or landing on voxels the
    analysis mask excludes, are dropped (the cluster shrinks near edges).
    The centre itself must be in bounds and mask-included.

    Returns a list of (i, j, k) tuples: centre first, the rest in
    lexicographic order.
    """
    ci, cj, ck = (int(x) for x in center)
    d1, d2, d3 = dims
    if not (0 <= ci < d1 and 0 <= cj < d2 and 0 <= ck < d3):
        raise ConfigurationError(
            f"cluster centre {center} lies outside volume dims {tuple(dims)}"
        )
    if mask is not None and not mask[ci, cj, ck]:
        raise ConfigurationError(f"cluster centre {center} is excluded by the mask")
    members = []
    for di, dj, dk in sphere_offsets(radius):
        i, j, k = ci + di, cj + dj, ck + dk
        if not (0 <= i < d1 and 0 <= j < d2 and 0 <= k < d3):
            continue
        if mask is not None and not mask[i, j, k]:
            continue
        members.append((i, j, k))
    return members


def intensity_mask(temporal_means, min_vol):
    """Threshold voxels by mean signal intensity.

    A voxel is included iff its temporal mean is at least ``min_vol``
    times the maximum temporal mean over the volume.  An all-zero (or
    non-positive) volume yields an empty mask and a warning.
    """
    means = np.asarray(temporal_means, dtype=float)
    if not (0.0 <= min_vol <= 1.0):
        raise ConfigurationError(
            f"min_vol must lie in [0, 1], got {min_vol}"
        )
    peak = float(means.max()) if means.size else 0.0
    if peak <= 0.0:
        warnings.warn("volume has no positive-mean voxels; intensity mask is empty")
        return np.zeros(means.shape, dtype=bool)
    return means >= min_vol * peak


def reference_mask(volume_data):
    """Boolean mask from a stored mask volume: nonzero means include."""
    return np.asarray(volume_data) != 0


def combine_masks(*masks):
    """Intersection of any number of boolean masks (None entries skipped)."""
    out = None
    for m in masks:
        if m is None:
            continue
        out = m.copy() if out is None else (out & m)
    return out
