"""Whole-volume and single-voxel analysis drivers.

A run walks every mask-included voxel, builds the spherical cluster
around it, filters the cluster block (all subjects side by side for a
group), samples state trajectories, and reduces them to activation
evidence per regressor.  Voxels the mask excludes — and centre series
that are constant zero — keep evidence 0.

Work is distributed over processes at voxel granularity.  Because every
voxel draws from its own (voxel, algorithm, scan)-keyed random substream,
the produced maps are byte-identical for any worker count.
"""

import multiprocessing
import os
from dataclasses import dataclass

import numpy as np

from .dlm import Priors, forecast_fitness, forward_filter
from .evidence import compute_evidence, tests_for
from .exceptions import ConfigurationError
from .geometry import (
    build_cluster,
    combine_masks,
    intensity_mask,
    reference_mask,
    sphere_offsets,
)
from .group import center_columns, pooled_block
from .streams import voxel_linear_index
from .trajectories import check_sampling_config, sample_trajectories


@dataclass
class RunConfig:
    """Parameters of one analysis run (individual or group)."""

    algorithm: str = "fest"
    test: str = None  # fest only: "ltt" (default) or "joint"
    delta: float = 0.95
    m0: float = 0.0
    c0: float = 100.0
    s0: float = 1.0
    n0: float = 1.0
    nsim: int = 100
    cutpos: int = 30
    r: float = 1.0
    min_vol: float = 0.10
    n1: int = None
    seed: int = 0
    workers: int = 1

    def priors(self):
        return Priors(m0_fill=self.m0, c0_scale=self.c0, s0_scale=self.s0,
                      n0=self.n0, delta=self.delta)

    def tests(self):
        test = self.test
        if self.algorithm == "fest":
            test = test or "ltt"
            if test not in ("ltt", "joint"):
                raise ConfigurationError(
                    f"fest test must be 'ltt' or 'joint', got {test!r}"
                )
        elif test is not None:
            raise ConfigurationError(
                f"--test applies to fest only ({self.algorithm} always "
                "reports marginal, joint and ltt)"
            )
        return tests_for(self.algorithm, test)

    def validate(self, n_scans, n_subjects=1):
        self.priors().validate()
        self.tests()
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        if self.n1 is not None:
            if not 1 <= self.n1 <= n_scans:
                raise ConfigurationError(
                    f"n1 must lie in [1, {n_scans}] for this volume, got {self.n1}"
                )
            n_scans = self.n1
        q_max = len(sphere_offsets(self.r)) * n_subjects
        check_sampling_config(self.algorithm, n_scans, q_max, self.cutpos,
                              self.nsim, self.n0)
        return n_scans


@dataclass
class EvidenceMaps:
    """Evidence volumes of one run: maps[test] has shape (d1, d2, d3, p)."""

    maps: dict
    tests: tuple
    algorithm: str
    n_regressors: int
    mask: np.ndarray
    n_analyzed: int


@dataclass
class VoxelReport:
    """Full single-voxel output: evidence, draws, diagnostics."""

    center: tuple
    members: list
    algorithm: str
    tests: tuple
    evidence: dict
    fitness: float
    draws: object
    n_subjects: int


def resolve_mask(volumes, config, mask_volume=None, n_scans=None):
    """Analysis mask: reference mask (if any) AND per-subject intensity masks."""
    ref = None
    if mask_volume is not None:
        data = mask_volume.data if hasattr(mask_volume, "data") else mask_volume
        data = np.asarray(data)
        if data.ndim == 4:
            data = data[..., 0]
        if data.shape != volumes[0].dims:
            raise ConfigurationError(
                f"mask shape {data.shape} does not match volume dims "
                f"{volumes[0].dims}"
            )
        ref = reference_mask(data)
    masks = [ref]
    for vol in volumes:
        masks.append(intensity_mask(vol.temporal_mean(n_scans=n_scans),
                                    config.min_vol))
    return combine_masks(*masks)


# -- per-voxel work (shared by serial and pooled execution) ------------------

_STATE = None


def _init_worker(state):
    global _STATE
    _STATE = state


def _centre_is_degenerate(block, n_subjects, cluster_size):
    centres = block[:, [s * cluster_size for s in range(n_subjects)]]
    return bool(np.all(centres == 0.0))


def _analyze_center(center):
    st = _STATE
    config = st["config"]
    volumes = st["volumes"]
    members = build_cluster(center, config.r, volumes[0].dims, st["mask"])
    q = len(members)
    n_subjects = len(volumes)
    block = pooled_block(volumes, members, n_scans=st["n_scans"])
    if _centre_is_degenerate(block, n_subjects, q):
        return center, None
    moments = forward_filter(block, st["design"], config.priors())
    draws = sample_trajectories(
        config.algorithm, moments, st["design"], config.cutpos, config.nsim,
        config.seed, voxel_index=voxel_linear_index(center, volumes[0].dims),
    )
    ev = compute_evidence(draws, st["tests"],
                          centers=center_columns(n_subjects, q))
    return center, ev


def _iter_results(centers, state, workers, progress=None):
    total = len(centers)
    done = 0
    if workers <= 1 or total <= 1:
        _init_worker(state)
        for c in centers:
            yield _analyze_center(c)
            done += 1
            if progress:
                progress(done, total)
        return
    ctx = multiprocessing.get_context("fork")
    chunk = max(1, total // (workers * 8))
    with ctx.Pool(workers, initializer=_init_worker, initargs=(state,)) as pool:
        for result in pool.imap_unordered(_analyze_center, centers, chunk):
            yield result
            done += 1
            if progress:
                progress(done, total)


def run_map(volumes, design, config, mask_volume=None, progress=None):
    """Compute evidence maps over every mask-included voxel.

    Parameters
    ----------
    volumes : Volume4D or list of Volume4D
        One volume for an individual analysis, several for a group.
    design : (T, p) ndarray
        Shared regressor matrix; rows must match the volume scan count.
    config : RunConfig
    mask_volume : optional reference mask (Volume3D/array, nonzero = keep)

    Returns
    -------
    EvidenceMaps
    """
    if not isinstance(volumes, (list, tuple)):
        volumes = [volumes]
    design = np.asarray(design, dtype=float)
    n_scans_vol = volumes[0].n_scans
    if design.shape[0] != n_scans_vol:
        raise ConfigurationError(
            f"design has {design.shape[0]} rows but the volume has "
            f"{n_scans_vol} scans"
        )
    if len(volumes) > 1 and mask_volume is None:
        raise ConfigurationError("group runs require a reference mask")
    n_scans = config.validate(n_scans_vol, n_subjects=len(volumes))
    tests = config.tests()
    design = design[:n_scans]

    mask = resolve_mask(volumes, config, mask_volume, n_scans=n_scans)
    if not mask.any():
        raise ConfigurationError(
            "analysis mask is empty (no voxel passes the mask/min-vol criteria)"
        )
    dims = volumes[0].dims
    p = design.shape[1]
    maps = {t: np.zeros(dims + (p,)) for t in tests}

    centers = [tuple(c) for c in np.argwhere(mask)]
    state = {
        "volumes": volumes,
        "design": design,
        "config": config,
        "mask": mask,
        "tests": tests,
        "n_scans": n_scans,
    }
    analyzed = 0
    for center, ev in _iter_results(centers, state, config.workers, progress):
        if ev is None:
            continue
        analyzed += 1
        for t, vec in ev.items():
            maps[t][center] = vec

    return EvidenceMaps(maps=maps, tests=tests, algorithm=config.algorithm,
                        n_regressors=p, mask=mask, n_analyzed=analyzed)


def analyze_voxel(volumes, design, config, center, mask_volume=None):
    """Full analysis of one cluster: evidence, trajectory draws, diagnostics.

    Uses the same mask, cluster and random-stream logic as run_map, so the
    evidence here matches the map value at this voxel exactly.
    """
    if not isinstance(volumes, (list, tuple)):
        volumes = [volumes]
    design = np.asarray(design, dtype=float)
    n_scans_vol = volumes[0].n_scans
    if design.shape[0] != n_scans_vol:
        raise ConfigurationError(
            f"design has {design.shape[0]} rows but the volume has "
            f"{n_scans_vol} scans"
        )
    if len(volumes) > 1 and mask_volume is None:
        raise ConfigurationError("group runs require a reference mask")
    n_scans = config.validate(n_scans_vol, n_subjects=len(volumes))
    tests = config.tests()
    design = design[:n_scans]

    mask = resolve_mask(volumes, config, mask_volume, n_scans=n_scans)
    dims = volumes[0].dims
    center = tuple(int(x) for x in center)
    if (0 <= center[0] < dims[0] and 0 <= center[1] < dims[1]
            and 0 <= center[2] < dims[2]) and not mask[center]:
        raise ConfigurationError(
            f"voxel {center} is discarded by the mask/min-vol criteria"
        )
    members = build_cluster(center, config.r, dims, mask)
    q = len(members)
    n_subjects = len(volumes)
    block = pooled_block(volumes, members, n_scans=n_scans)
    if _centre_is_degenerate(block, n_subjects, q):
        raise ConfigurationError(
            f"centre series at {center} is constant zero; nothing to analyse"
        )
    moments = forward_filter(block, design, config.priors())
    draws = sample_trajectories(
        config.algorithm, moments, design, config.cutpos, config.nsim,
        config.seed, voxel_index=voxel_linear_index(center, dims),
        simulate_bold=(config.algorithm == "fest" and n_subjects == 1),
    )
    ev = compute_evidence(draws, tests, centers=center_columns(n_subjects, q))
    fitness = (forecast_fitness(block, moments, config.cutpos)
               if n_subjects == 1 else float("nan"))
    return VoxelReport(center=center, members=members,
                       algorithm=config.algorithm, tests=tests, evidence=ev,
                       fitness=fitness, draws=draws, n_subjects=n_subjects)


def map_filenames(prefix, result):
    """Output paths, one per (test, covariate): <prefix>_<algo>_<test>_cov<j>.nii.gz"""
    names = []
    for test in result.tests:
        for j in range(result.n_regressors):
            names.append(f"{prefix}_{result.algorithm}_{test}_cov{j + 1}.nii.gz")
    return names


def write_evidence_maps(prefix, result, header=None, voxel_sizes=(1.0, 1.0, 1.0),
                        dtype=np.float32):
    """Write each (test, covariate) evidence volume as NIfTI (float32 default)."""
    from .niftiio import write_nifti

    paths = map_filenames(prefix, result)
    idx = 0
    for test in result.tests:
        arr = result.maps[test]
        for j in range(result.n_regressors):
            write_nifti(paths[idx], arr[..., j], voxel_sizes=voxel_sizes,
                        header=header, dtype=dtype)
            idx += 1
    return paths


def default_workers():
    """Worker count when the user does not choose: all visible CPUs."""
    return max(1, os.cpu_count() or 1)
