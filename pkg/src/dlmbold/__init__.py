"""Activation evidence for task fMRI via cluster-wise dynamic linear models.

Pipeline: around every voxel a small spherical cluster of time series is
modelled jointly with a matrix-variate dynamic linear model filtered under
a discount factor; Monte Carlo draws of the state trajectories (fest /
ffbs / fsts samplers) are reduced to the posterior probability that the
time-averaged task coefficient is positive — per voxel, per regressor,
for one subject or a column-pooled group.
"""

from .dlm import FilterMoments, Priors, forecast_fitness, forward_filter
from .estimators import ActivationEvidence, GroupActivationEvidence
from .evidence import (
    compute_evidence,
    evidence_joint,
    evidence_ltt,
    evidence_marginal,
    tests_for,
)
from .exceptions import (
    ConfigurationError,
    DlmBoldError,
    FormatError,
    NumericError,
    VolumeIOError,
)
from .geometry import build_cluster, intensity_mask, sphere_offsets
from .group import center_average, load_subjects, pooled_block, read_manifest
from .mapping import (
    EvidenceMaps,
    RunConfig,
    VoxelReport,
    analyze_voxel,
    run_map,
    write_evidence_maps,
)
from .niftiio import (
    Volume3D,
    Volume4D,
    read_design,
    read_nifti,
    volume_from_array,
    write_nifti,
)
from .synth import TaskDesign, design_matrix, expected_bold, generate_volume
from .trajectories import (
    TrajectoryDraws,
    sample_fest,
    sample_ffbs,
    sample_fsts,
    sample_trajectories,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationEvidence",
    "ConfigurationError",
    "DlmBoldError",
    "EvidenceMaps",
    "FilterMoments",
    "FormatError",
    "GroupActivationEvidence",
    "NumericError",
    "Priors",
    "RunConfig",
    "TaskDesign",
    "TrajectoryDraws",
    "Volume3D",
    "Volume4D",
    "VolumeIOError",
    "VoxelReport",
    "analyze_voxel",
    "build_cluster",
    "center_average",
    "compute_evidence",
    "design_matrix",
    "evidence_joint",
    "evidence_ltt",
    "evidence_marginal",
    "expected_bold",
    "forecast_fitness",
    "forward_filter",
    "generate_volume",
    "intensity_mask",
    "load_subjects",
    "pooled_block",
    "read_design",
    "read_manifest",
    "read_nifti",
    "run_map",
    "sample_fest",
    "sample_ffbs",
    "sample_fsts",
    "sample_trajectories",
    "sphere_offsets",
    "tests_for",
    "volume_from_array",
    "write_evidence_maps",
    "write_nifti",
]
