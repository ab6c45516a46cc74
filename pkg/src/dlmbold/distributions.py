"""Matrix-variate sampling primitives.

The samplers below are written for *batches*: one call draws ``size``
independent matrices with all linear algebra vectorised over the batch
axis, which is what keeps whole-brain Monte Carlo affordable in Python.
Scalar convenience wrappers draw a single matrix.
"""

import numpy as np

from .exceptions import NumericError

# Relative jitter ladder applied to the diagonal before giving up on a
# Cholesky factorisation.
_JITTER_STEPS = (1e-12, 1e-10, 1e-8)


def chol_with_jitter(a, what="matrix"):
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Round-off can leave theoretically SPD matrices slightly indefinite, so
    on failure the diagonal is inflated by an escalating relative jitter
    (1e-12 up to 1e-8 of the mean diagonal) before declaring failure.
    """
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise NumericError(
            f"{what} contains non-finite values (series overflow or "
            "degenerate input?)"
        )
    a = (a + a.T) / 2.0
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    scale = float(np.mean(np.abs(np.diag(a))))
    if scale == 0.0:
        scale = 1.0
    for eps in _JITTER_STEPS:
        try:
            return np.linalg.cholesky(a + (eps * scale) * np.eye(a.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise NumericError(
        f"{what} is not positive definite (Cholesky failed after jitter; "
        f"diagonal range [{np.min(np.diag(a)):.3e}, {np.max(np.diag(a)):.3e}])"
    )


def psd_factor(a):
    """Square root ``K`` with ``K @ K.T == a`` for a merely PSD matrix.

    Built from an eigendecomposition with negative round-off eigenvalues
    clipped to zero, so genuinely degenerate inputs (e.g. an evolution
    covariance that vanishes when the discount factor is 1) yield an
    exactly zero factor instead of a Cholesky failure.
    """
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise NumericError(
            "covariance contains non-finite values (series overflow or "
            "degenerate input?)"
        )
    a = (a + a.T) / 2.0
    if not np.any(a):
        return np.zeros_like(a)
    w, v = np.linalg.eigh(a)
    w = np.clip(w, 0.0, None)
    return v * np.sqrt(w)


def wishart_factor_batch(phi, dof, size, rng):
    """Batch of Bartlett factors ``M`` with ``M @ M.T ~ Wishart(dof, phi @ phi.T)``.

    ``phi`` is any square root of the Wishart scale.  Draw order within the
    stream is fixed (off-diagonal normals first, then diagonal chi-squares)
    so that results are reproducible for a given generator state.
    """
    q = phi.shape[0]
    a = np.zeros((size, q, q))
    if q > 1:
        rows, cols = np.tril_indices(q, -1)
        a[:, rows, cols] = rng.standard_normal((size, rows.size))
    df = dof - np.arange(q, dtype=float)
    diag = np.arange(q)
    a[:, diag, diag] = np.sqrt(rng.chisquare(df, size=(size, q)))
    return phi[None, :, :] @ a


def sample_inverse_wishart_batch(scale, dof, size, rng):
    """Draw ``size`` matrices from an inverse Wishart distribution.

    Parameters
    ----------
    scale : (q, q) ndarray
        Symmetric positive definite scale matrix ``S``.
    dof : float
        Degrees of freedom ``n``; must exceed ``q - 1`` for a proper
        density (and ``n > q + 1`` for the mean ``S / (n - q - 1)`` to
        exist).

    Returns
    -------
    sigma : (size, q, q) ndarray
        The draws.
    factor : (size, q, q) ndarray
        Matching square roots, ``factor[s] @ factor[s].T == sigma[s]``.
    """
    scale = np.asarray(scale, dtype=float)
    q = scale.shape[0]
    if dof <= q - 1:
        raise NumericError(
            f"inverse Wishart needs dof > q - 1 (got dof={dof}, q={q}); "
            "increase the prior degrees of freedom or the cut position"
        )
    ls = chol_with_jitter(scale, what="inverse Wishart scale")
    try:
        # phi @ phi.T == inv(scale)
        phi = np.linalg.inv(ls).T
        m = wishart_factor_batch(phi, dof, size, rng)
        m_inv = np.linalg.inv(m)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            f"inverse Wishart scale is numerically singular: {exc}"
        ) from None
    factor = np.transpose(m_inv, (0, 2, 1))
    sigma = factor @ m_inv
    return sigma, factor


def sample_inverse_wishart(scale, dof, rng):
    """Single inverse Wishart draw (see sample_inverse_wishart_batch)."""
    sigma, _ = sample_inverse_wishart_batch(scale, dof, 1, rng)
    return sigma[0]


def sample_matrix_normal_batch(mean, row_cov, col_factor, size, rng):
    """Draw ``size`` matrices ``X = M + L Z K.T`` with vec-covariance
    ``col_cov ⊗ row_cov``.

    ``col_factor`` may be a single (q, q) square root of the column
    covariance or a (size, q, q) batch of per-draw square roots (as
    produced alongside inverse Wishart draws).
    """
    mean = np.asarray(mean, dtype=float)
    p, q = mean.shape
    l = chol_with_jitter(row_cov, what="row covariance")
    z = rng.standard_normal((size, p, q))
    k = np.asarray(col_factor, dtype=float)
    if k.ndim == 2:
        k = k[None, :, :]
    return mean[None, :, :] + l @ z @ np.transpose(k, (0, 2, 1))


def sample_matrix_normal(mean, row_cov, col_cov, rng):
    """Single matrix-normal draw with full row/column covariance matrices."""
    kc = chol_with_jitter(col_cov, what="column covariance")
    return sample_matrix_normal_batch(mean, row_cov, kc, 1, rng)[0]
