"""Monte Carlo state-trajectory samplers over the filtered model.

Three sampling schemes share the same output container:

fest
    Independent draws per retained scan from that scan's filtered
    posterior: Sigma ~ IW(n_t, S_t), Theta_t ~ MN(m_t, C_t, Sigma).
    Draws at different scans are independent, which also makes them
    invariant to truncating the series (a shorter run reproduces the
    full run's draws at the scans they share).  Optionally simulates
    response rows y'_t = F'_t Theta_t + nu'_t alongside.

ffbs
    Joint smoothing draws: anchor (Sigma, Theta_T) at the final posterior,
    then run the backward recursion
        B_t = C_t G' R_{t+1}^{-1}
        h_t = m_t + B_t (Theta_{t+1} - a_{t+1})
        H_t = C_t - B_t R_{t+1} B_t'
    sampling Theta_t ~ MN(h_t, H_t, Sigma) down to the first retained scan.

fsts
    Forward-simulated trajectories: Sigma ~ IW(n_T, S_T) from the final
    posterior, Theta anchored at the filtered posterior of the cut
    position, then the state equation is simulated forward with evolution
    covariance W_t = ((1 - delta)/delta) G C_{t-1} G'.  With delta = 1 the
    evolution noise vanishes and every trajectory is exactly constant.

Randomness is drawn from per-(voxel, algorithm, scan) substreams (see
``streams``), with a fixed draw order inside each substream, so results
do not depend on scheduling.
"""

from dataclasses import dataclass

import numpy as np

from .distributions import (
    chol_with_jitter,
    psd_factor,
    sample_inverse_wishart_batch,
)
from .exceptions import ConfigurationError, NumericError
from .streams import ALGO_FEST, ALGO_FFBS, ALGO_FSTS, substream

ALGORITHMS = ("fest", "ffbs", "fsts")


@dataclass
class TrajectoryDraws:
    """Sampled state trajectories over the retained scans.

    theta : (T - cutpos, p, q, nsim) ndarray
        theta[i, j, v, s] is draw s of the coefficient of regressor j for
        column v at scan number cutpos + 1 + i.
    bold : (T - cutpos, q, nsim) ndarray or None
        Simulated responses (fest only, when requested).
    """

    theta: np.ndarray
    cutpos: int
    algorithm: str
    bold: np.ndarray = None

    @property
    def n_retained(self):
        return self.theta.shape[0]

    @property
    def n_sim(self):
        return self.theta.shape[3]

    def scan_numbers(self):
        """1-based scan numbers covered by the retained axis."""
        first = self.cutpos + 1
        return np.arange(first, first + self.theta.shape[0])


def check_sampling_config(algorithm, n_scans, n_columns, cutpos, nsim, n0):
    """Validate cut position, draw count and degrees-of-freedom propriety.

    The inverse Wishart draw with the smallest degrees of freedom must
    still be proper (dof > q - 1): fest first samples at scan cutpos + 1,
    while ffbs and fsts draw their response covariance at scan T.
    """
    if algorithm not in ALGORITHMS:
        raise ConfigurationError(
            f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}"
        )
    if not 0 <= cutpos < n_scans:
        raise ConfigurationError(
            f"cutpos must lie in [0, {n_scans - 1}] for {n_scans} scans, got {cutpos}"
        )
    if nsim < 1:
        raise ConfigurationError(f"nsim must be at least 1, got {nsim}")
    min_dof = {
        "fest": n0 + cutpos + 1,
        "fsts": n0 + n_scans,
        "ffbs": n0 + n_scans,
    }[algorithm]
    if min_dof <= n_columns - 1:
        raise ConfigurationError(
            f"{algorithm} draws an inverse Wishart with dof={min_dof:g} for "
            f"q={n_columns} columns (needs dof > q - 1); increase cutpos, "
            "n0, or reduce the cluster size"
        )


def _anchor(mean, cov, scale, dof, nsim, rng):
    """Draw (Theta, Sigma-factor) batches at one filtered moment."""
    sigma, k = sample_inverse_wishart_batch(scale, dof, nsim, rng)
    lc = chol_with_jitter(cov, what="state covariance")
    p, q = mean.shape
    z = rng.standard_normal((nsim, p, q))
    theta = mean[None, :, :] + lc @ z @ np.transpose(k, (0, 2, 1))
    return theta, k


def sample_fest(moments, design, cutpos, nsim, seed, voxel_index=0,
                simulate_bold=False):
    """Independent per-scan posterior draws; optional simulated responses."""
    design = np.asarray(design, dtype=float)
    n_scans = moments.n_scans
    p, q = moments.n_regressors, moments.n_columns
    check_sampling_config("fest", n_scans, q, cutpos, nsim, moments.n0)

    n_ret = n_scans - cutpos
    theta_out = np.empty((n_ret, p, q, nsim))
    bold_out = np.empty((n_ret, q, nsim)) if simulate_bold else None

    for idx in range(cutpos, n_scans):
        rng = substream(seed, voxel_index, ALGO_FEST, idx + 1)
        theta, k = _anchor(
            moments.m[idx], moments.C[idx], moments.S[idx], moments.n[idx],
            nsim, rng,
        )
        theta_out[idx - cutpos] = np.moveaxis(theta, 0, -1)
        if simulate_bold:
            noise = rng.standard_normal((nsim, 1, q)) @ np.transpose(k, (0, 2, 1))
            y = design[idx][None, None, :] @ theta + noise
            bold_out[idx - cutpos] = y[:, 0, :].T

    return TrajectoryDraws(theta=theta_out, cutpos=cutpos, algorithm="fest",
                           bold=bold_out)


def sample_ffbs(moments, cutpos, nsim, seed, voxel_index=0):
    """Backward-sampling draws from the joint smoothing distribution."""
    n_scans = moments.n_scans
    p, q = moments.n_regressors, moments.n_columns
    check_sampling_config("ffbs", n_scans, q, cutpos, nsim, moments.n0)

    n_ret = n_scans - cutpos
    theta_out = np.empty((n_ret, p, q, nsim))
    g = moments.G

    last = n_scans - 1
    rng = substream(seed, voxel_index, ALGO_FFBS, n_scans)
    theta, k = _anchor(
        moments.m[last], moments.C[last], moments.S[last], moments.n[last],
        nsim, rng,
    )
    kt = np.transpose(k, (0, 2, 1))
    theta_out[last - cutpos] = np.moveaxis(theta, 0, -1)

    for idx in range(last - 1, cutpos - 1, -1):
        r_next = moments.R[idx + 1]
        try:
            r_inv = np.linalg.inv(r_next)
        except np.linalg.LinAlgError:
            raise NumericError(
                f"prior state covariance is singular at scan {idx + 2}; "
                "cannot run the backward recursion"
            ) from None
        b = moments.C[idx] @ g.T @ r_inv
        h_cov = moments.C[idx] - b @ r_next @ b.T
        kh = psd_factor(h_cov)
        rng = substream(seed, voxel_index, ALGO_FFBS, idx + 1)
        z = rng.standard_normal((nsim, p, q))
        mean = moments.m[idx][None, :, :] + b @ (theta - moments.a[idx + 1])
        theta = mean + kh @ z @ kt
        theta_out[idx - cutpos] = np.moveaxis(theta, 0, -1)

    return TrajectoryDraws(theta=theta_out, cutpos=cutpos, algorithm="ffbs")


def sample_fsts(moments, cutpos, nsim, seed, voxel_index=0):
    """Forward-simulated trajectories anchored at the cut-position state."""
    n_scans = moments.n_scans
    p, q = moments.n_regressors, moments.n_columns
    check_sampling_config("fsts", n_scans, q, cutpos, nsim, moments.n0)

    n_ret = n_scans - cutpos
    theta_out = np.empty((n_ret, p, q, nsim))
    g = moments.G
    delta = moments.delta

    if cutpos == 0:
        m_cut, c_cut = moments.m0, moments.C0
    else:
        m_cut, c_cut = moments.m[cutpos - 1], moments.C[cutpos - 1]

    # response covariance from the final posterior; state anchored at cutpos
    rng = substream(seed, voxel_index, ALGO_FSTS, cutpos)
    theta, k = _anchor(m_cut, c_cut, moments.S[-1], moments.n[-1], nsim, rng)
    kt = np.transpose(k, (0, 2, 1))

    inflate = (1.0 - delta) / delta
    for idx in range(cutpos, n_scans):
        c_prev = c_cut if idx == cutpos else moments.C[idx - 1]
        w_cov = inflate * (g @ c_prev @ g.T)
        kw = psd_factor(w_cov)
        rng = substream(seed, voxel_index, ALGO_FSTS, idx + 1)
        z = rng.standard_normal((nsim, p, q))
        theta = g @ theta + kw @ z @ kt
        theta_out[idx - cutpos] = np.moveaxis(theta, 0, -1)

    return TrajectoryDraws(theta=theta_out, cutpos=cutpos, algorithm="fsts")


def sample_trajectories(algorithm, moments, design, cutpos, nsim, seed,
                        voxel_index=0, simulate_bold=False):
    """Dispatch to one of the samplers by name."""
    if algorithm == "fest":
        return sample_fest(moments, design, cutpos, nsim, seed,
                           voxel_index=voxel_index, simulate_bold=simulate_bold)
    if algorithm == "ffbs":
        return sample_ffbs(moments, cutpos, nsim, seed, voxel_index=voxel_index)
    if algorithm == "fsts":
        return sample_fsts(moments, cutpos, nsim, seed, voxel_index=voxel_index)
    raise ConfigurationError(
        f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}"
    )


def sample_posterior_state(moments, t, sigma, rng):
    """One draw of Theta_t ~ MN(m_t, C_t, sigma) given a response covariance.

    ``t`` is the 0-based scan position; ``sigma`` a (q, q) SPD matrix.
    """
    lc = chol_with_jitter(moments.C[t], what="state covariance")
    ks = chol_with_jitter(sigma, what="response covariance")
    p, q = moments.n_regressors, moments.n_columns
    z = rng.standard_normal((p, q))
    return moments.m[t] + lc @ z @ ks.T
