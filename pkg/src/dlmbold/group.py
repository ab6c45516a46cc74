"""Multi-subject pooling.

A group analysis concatenates the N subjects' cluster blocks horizontally
into one (T, q*N) response matrix — subject-major, so columns
[s*q, (s+1)*q) belong to subject s and each subject's centre voxel sits
at column s*q — and fits a single model with a shared design.  The group
evidence tests then act on the pooled columns (see ``evidence``), and an
N = 1 group reduces exactly to the individual analysis.
"""

import numpy as np

from .exceptions import ConfigurationError, FormatError, VolumeIOError
from .niftiio import read_nifti


def read_manifest(path):
    """Read an ordered subject manifest: one volume path per line.

    Blank lines and '#' comments are skipped.  Relative paths are resolved
    against the manifest's directory.
    """
    import os

    base = os.path.dirname(os.path.abspath(path))
    subjects = []
    try:
        with open(path) as f:
            for line in f:
                text = line.strip()
                if not text or text.startswith("#"):
                    continue
                subjects.append(
                    text if os.path.isabs(text) else os.path.join(base, text)
                )
    except OSError as exc:
        raise VolumeIOError(f"cannot read manifest {path}: {exc}") from exc
    if not subjects:
        raise FormatError(f"{path}: manifest lists no subjects")
    return subjects


def load_subjects(paths, lazy=True):
    """Load subject volumes, checking they share dims and scan count.

    Lazy loading keeps each subject memory-mapped so the group run never
    holds all payloads in RAM at once.
    """
    if not paths:
        raise ConfigurationError("group analysis needs at least one subject")
    volumes = []
    for idx, p in enumerate(paths):
        vol = read_nifti(p, lazy=lazy)
        if not hasattr(vol, "n_scans"):
            raise ConfigurationError(f"subject {idx + 1} ({p}) is not a 4-D volume")
        if volumes:
            first = volumes[0]
            if vol.dims != first.dims:
                raise ConfigurationError(
                    f"subject {idx + 1} ({p}) has dims {vol.dims}, "
                    f"expected {first.dims} from subject 1"
                )
            if vol.n_scans != first.n_scans:
                raise ConfigurationError(
                    f"subject {idx + 1} ({p}) has {vol.n_scans} scans, "
                    f"expected {first.n_scans} from subject 1"
                )
        volumes.append(vol)
    return volumes


def pooled_block(volumes, members, n_scans=None):
    """(T, q*N) response block: subjects side by side, centres at s*q."""
    blocks = [vol.block(members, n_scans=n_scans) for vol in volumes]
    return np.concatenate(blocks, axis=1)


def center_columns(n_subjects, cluster_size):
    """Column indices of the subject centre voxels in a pooled block."""
    return tuple(s * cluster_size for s in range(n_subjects))


def center_average(matrix, n_subjects, cluster_size):
    """Across-subject average of the subject-centre columns of a (.., q*N)
    coefficient matrix.

    The filter treats response columns independently, so relabelling
    subjects permutes the columns bitwise; summing the centre values in
    sorted order makes this average exactly invariant to subject order
    rather than merely up to float rounding.
    """
    matrix = np.asarray(matrix, dtype=float)
    cols = matrix[..., list(center_columns(n_subjects, cluster_size))]
    return np.sort(cols, axis=-1).mean(axis=-1)
