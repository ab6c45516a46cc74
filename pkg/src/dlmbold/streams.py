"""Deterministic random-stream derivation for parallel voxel analysis.

Every Monte Carlo draw in the package comes from a counter-based Philox
generator whose key is derived from ``(seed, voxel, algorithm, scan)``.
Streams therefore depend only on *what* is being sampled, never on which
worker process samples it or in which order, which makes whole-map runs
byte-identical for any worker count and lets truncated runs reuse the
draws of full runs at the shared scans.
"""

import numpy as np

# Algorithm identifiers baked into stream keys.  These are stable public
# constants: changing them would silently change every sampled map.
ALGO_FEST = 0
ALGO_FFBS = 1
ALGO_FSTS = 2

ALGORITHM_IDS = {"fest": ALGO_FEST, "ffbs": ALGO_FFBS, "fsts": ALGO_FSTS}


def substream(seed, voxel_index, algorithm_id, scan):
    """Return the Philox generator keyed by one (voxel, algorithm, scan) cell.

    Parameters
    ----------
    seed : int
        Global run seed (non-negative).
    voxel_index : int
        Linear index of the cluster centre voxel (0 for off-grid use such
        as single time-series analysis without a volume).
    algorithm_id : int
        One of ALGO_FEST / ALGO_FFBS / ALGO_FSTS.
    scan : int
        1-based scan number the draws belong to; 0 addresses the prior.
    """
    ss = np.random.SeedSequence(
        entropy=int(seed),
        spawn_key=(int(voxel_index), int(algorithm_id), int(scan)),
    )
    return np.random.Generator(np.random.Philox(ss))


def voxel_linear_index(coord, dims):
    """Map an (i, j, k) voxel coordinate to its C-order linear index."""
    i, j, k = coord
    d1, d2, d3 = dims
    return (int(i) * d2 + int(j)) * d3 + int(k)
