"""Synthetic task-fMRI volumes with known ground truth.

The expected response to a block task is a boxcar convolved with a
canonical double-gamma haemodynamic response (peak around 6 s, dip around
16 s, undershoot ratio 1/6), max-normalised to 1.  The default design
pairs that regressor with its first difference so transient onset/offset
behaviour has somewhere to load.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .exceptions import ConfigurationError
from .niftiio import volume_from_array


@dataclass
class HrfParams:
    """Double-gamma response parameters, in seconds."""

    peak_delay: float = 6.0
    undershoot_delay: float = 16.0
    peak_dispersion: float = 1.0
    undershoot_dispersion: float = 1.0
    undershoot_ratio: float = 1.0 / 6.0
    length: float = 32.0


@dataclass
class TaskDesign:
    """Block task timing: scans, repetition time, and (onset, duration) blocks.

    Onsets and durations are expressed in scans.
    """

    n_scans: int
    tr: float = 2.0
    blocks: list = field(default_factory=list)
    hrf: HrfParams = field(default_factory=HrfParams)

    def validate(self):
        if self.n_scans < 1:
            raise ConfigurationError(f"n_scans must be >= 1, got {self.n_scans}")
        if self.tr <= 0:
            raise ConfigurationError(f"tr must be positive, got {self.tr}")
        for onset, duration in self.blocks:
            if onset < 0 or duration <= 0:
                raise ConfigurationError(
                    f"bad block (onset={onset}, duration={duration})"
                )
        return self


def hrf_kernel(tr, params=None):
    """Canonical double-gamma response sampled on the scan grid."""
    params = params or HrfParams()
    t = np.arange(0.0, params.length + tr / 2.0, tr)
    peak = stats.gamma.pdf(
        t, params.peak_delay / params.peak_dispersion, scale=params.peak_dispersion
    )
    dip = stats.gamma.pdf(
        t,
        params.undershoot_delay / params.undershoot_dispersion,
        scale=params.undershoot_dispersion,
    )
    return peak - params.undershoot_ratio * dip


def stimulus_boxcar(design):
    """0/1 indicator of task-on scans."""
    design.validate()
    box = np.zeros(design.n_scans)
    for onset, duration in design.blocks:
        box[int(onset) : int(onset + duration)] = 1.0
    return box


def expected_bold(design):
    """Expected response: boxcar convolved with the HRF, max-normalised to 1.

    All-rest designs return all zeros.
    """
    box = stimulus_boxcar(design)
    kernel = hrf_kernel(design.tr, design.hrf)
    conv = np.convolve(box, kernel)[: design.n_scans]
    peak = conv.max()
    return conv / peak if peak > 0 else conv


def design_matrix(design):
    """(T, 2) regressor matrix: expected response and its first difference."""
    bold = expected_bold(design)
    derivative = np.diff(bold, prepend=bold[0])
    return np.column_stack([bold, derivative])


def generate_volume(dims, design, active, amplitude=3.0, noise_sd=1.0,
                    baseline=0.0, seed=0, voxel_sizes=(2.0, 2.0, 2.0)):
    """Simulate a 4-D volume: baseline + task signal in active voxels + noise.

    Parameters
    ----------
    dims : (d1, d2, d3)
    design : TaskDesign
    active : (d1, d2, d3) boolean array marking truly responding voxels
    amplitude : signal height multiplying the expected response
    noise_sd : white noise standard deviation
    seed : generator seed; the volume is a pure function of its arguments

    Returns
    -------
    Volume4D
    """
    dims = tuple(int(d) for d in dims)
    active = np.asarray(active, dtype=bool)
    if active.shape != dims:
        raise ConfigurationError(
            f"active map shape {active.shape} does not match dims {dims}"
        )
    if noise_sd < 0:
        raise ConfigurationError(f"noise_sd must be non-negative, got {noise_sd}")
    bold = expected_bold(design)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    data = rng.standard_normal(dims + (design.n_scans,))
    if noise_sd != 1.0:
        data *= noise_sd
    if baseline != 0.0:
        data += baseline
    data[active] += amplitude * bold
    return volume_from_array(data, voxel_sizes=voxel_sizes)


def box_region(dims, lo, hi):
    """Boolean mask for the half-open box [lo, hi) in voxel coordinates."""
    mask = np.zeros(tuple(dims), dtype=bool)
    sl = tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))
    mask[sl] = True
    return mask
