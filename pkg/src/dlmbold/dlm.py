"""Conjugate forward filtering for matrix-variate dynamic linear models.

One model instance tracks how a vector of response series (the columns of
``series``) loads on a shared set of regressors over time:

    y'_t = F'_t Theta_t + nu'_t        nu'_t ~ N(0, Sigma)
    Theta_t = G Theta_{t-1} + Omega_t

with a matrix-normal / inverse-Wishart conjugate prior on (Theta, Sigma).
State evolution noise is specified implicitly through a discount factor
``delta`` in (0, 1]: at each step the prior state covariance is inflated
to ``R_t = G C_{t-1} G' / delta``, so ``delta = 1`` recovers the static
regression model and smaller values forget the past faster.

The filter below propagates the posterior moments exactly; sampling from
the filtered (or smoothed) distributions lives in ``trajectories``.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError


@dataclass
class Priors:
    """Conjugate prior hyperparameters.

    m0_fill : scalar used to fill the (p, q) prior state mean
    c0_scale : prior state covariance is ``c0_scale * I_p``
    s0_scale : prior response scale matrix is ``s0_scale * I_q``
    n0 : prior degrees of freedom (> 0)
    delta : discount factor in (0, 1]
    """

    m0_fill: float = 0.0
    c0_scale: float = 100.0
    s0_scale: float = 1.0
    n0: float = 1.0
    delta: float = 0.95

    def validate(self):
        if not (0.0 < self.delta <= 1.0):
            raise ConfigurationError(
                f"discount factor must lie in (0, 1], got {self.delta}"
            )
        if self.c0_scale <= 0:
            raise ConfigurationError(f"c0 scale must be positive, got {self.c0_scale}")
        if self.s0_scale <= 0:
            raise ConfigurationError(f"s0 scale must be positive, got {self.s0_scale}")
        if self.n0 <= 0:
            raise ConfigurationError(
                f"prior degrees of freedom must be positive, got {self.n0}"
            )
        for name in ("m0_fill", "c0_scale", "s0_scale", "n0", "delta"):
            if not np.isfinite(getattr(self, name)):
                raise ConfigurationError(f"prior field {name} must be finite")
        return self


@dataclass
class FilterMoments:
    """Per-scan output of the forward filter.

    All arrays are indexed by 0-based scan position t = 0 .. T-1
    (scan number t + 1).  Shapes use p regressors and q response columns:

    a : (T, p, q)  prior state mean at t
    R : (T, p, p)  prior state covariance at t
    f : (T, q)     one-step forecast mean
    qscale : (T,)  forecast scale factor (>= 1)
    e : (T, q)     one-step forecast error
    m : (T, p, q)  posterior state mean
    C : (T, p, p)  posterior state covariance
    S : (T, q, q)  accumulated response scale matrix
    n : (T,)       posterior degrees of freedom

    The prior fields (m0, C0, S0, n0) and the model matrices used are kept
    so downstream samplers can anchor at scan 0.
    """

    a: np.ndarray
    R: np.ndarray
    f: np.ndarray
    qscale: np.ndarray
    e: np.ndarray
    m: np.ndarray
    C: np.ndarray
    S: np.ndarray
    n: np.ndarray
    m0: np.ndarray
    C0: np.ndarray
    S0: np.ndarray
    n0: float
    delta: float
    G: np.ndarray = field(repr=False)

    @property
    def n_scans(self):
        return self.m.shape[0]

    @property
    def n_regressors(self):
        return self.m0.shape[0]

    @property
    def n_columns(self):
        return self.m0.shape[1]

    def state_mean(self, t):
        """Posterior state mean at 0-based scan position t (prior for t = -1)."""
        return self.m0 if t < 0 else self.m[t]


def _check_inputs(series, design):
    series = np.asarray(series, dtype=float)
    design = np.asarray(design, dtype=float)
    if series.ndim != 2:
        raise ConfigurationError(
            f"series must be 2-D (scans x columns), got shape {series.shape}"
        )
    if design.ndim != 2:
        raise ConfigurationError(
            f"design must be 2-D (scans x regressors), got shape {design.shape}"
        )
    if series.shape[0] != design.shape[0]:
        raise ConfigurationError(
            f"series has {series.shape[0]} scans but design has {design.shape[0]} rows"
        )
    if design.shape[1] < 1 or series.shape[1] < 1:
        raise ConfigurationError("series and design need at least one column")
    if not np.all(np.isfinite(series)):
        raise ConfigurationError("series contains non-finite values")
    if not np.all(np.isfinite(design)):
        raise ConfigurationError("design contains non-finite values")
    return series, design


def forward_filter(series, design, priors, evolution=None):
    """Run the conjugate forward filter over a (T, q) response block.

    Parameters
    ----------
    series : (T, q) array_like
        Response columns (one cluster voxel per column, centre first).
    design : (T, p) array_like
        Regressor rows F'_t.
    priors : Priors
    evolution : (p, p) array_like, optional
        State transition matrix G; identity when omitted.

    Returns
    -------
    FilterMoments

    T = 0 inputs are legal and return the prior unchanged with empty
    per-scan arrays.
    """
    series, design = _check_inputs(series, design)
    priors.validate()
    n_scans, q = series.shape
    p = design.shape[1]

    if evolution is None:
        g = np.eye(p)
    else:
        g = np.asarray(evolution, dtype=float)
        if g.shape != (p, p):
            raise ConfigurationError(
                f"evolution matrix must be ({p}, {p}), got {g.shape}"
            )
        if not np.all(np.isfinite(g)):
            raise ConfigurationError("evolution matrix contains non-finite values")

    m0 = np.full((p, q), float(priors.m0_fill))
    c0 = float(priors.c0_scale) * np.eye(p)
    s0 = float(priors.s0_scale) * np.eye(q)
    delta = float(priors.delta)

    out = FilterMoments(
        a=np.empty((n_scans, p, q)),
        R=np.empty((n_scans, p, p)),
        f=np.empty((n_scans, q)),
        qscale=np.empty(n_scans),
        e=np.empty((n_scans, q)),
        m=np.empty((n_scans, p, q)),
        C=np.empty((n_scans, p, p)),
        S=np.empty((n_scans, q, q)),
        n=np.empty(n_scans),
        m0=m0,
        C0=c0,
        S0=s0,
        n0=float(priors.n0),
        delta=delta,
        G=g,
    )

    m, c, s, n = m0, c0, s0, float(priors.n0)
    for t in range(n_scans):
        ft_row = design[t]
        a = g @ m
        r = (g @ c @ g.T) / delta
        r = (r + r.T) / 2.0
        f = ft_row @ a
        qscale = float(ft_row @ r @ ft_row) + 1.0
        e = series[t] - f
        gain = (r @ ft_row) / qscale
        m = a + np.outer(gain, e)
        c = r - qscale * np.outer(gain, gain)
        c = (c + c.T) / 2.0
        s = s + np.outer(e, e) / qscale
        n = n + 1.0

        out.a[t] = a
        out.R[t] = r
        out.f[t] = f
        out.qscale[t] = qscale
        out.e[t] = e
        out.m[t] = m
        out.C[t] = c
        out.S[t] = s
        out.n[t] = n

    return out


def forecast_fitness(series, moments, cutpos):
    """Mean absolute relative forecast error (percent) of the centre column.

    Averages ``100 * |y_t - f_t| / |f_t|`` over retained scans
    (t > cutpos), skipping scans whose forecast magnitude is below 1e-12.
    Returns NaN when every retained forecast is degenerate.
    """
    series = np.asarray(series, dtype=float)
    y = series[cutpos:, 0]
    f = moments.f[cutpos:, 0]
    keep = np.abs(f) >= 1e-12
    if not np.any(keep):
        return float("nan")
    return float(np.mean(100.0 * np.abs(y[keep] - f[keep]) / np.abs(f[keep])))
