import numpy as np
import pytest

from dlmbold import ConfigurationError, Priors, forward_filter
from dlmbold.dlm import forecast_fitness


def batch_posterior(Y, X, m0_fill, c0, s0, n0):
    """Closed-form conjugate posterior of the static (delta=1) model."""
    p, q = X.shape[1], Y.shape[1]
    c0inv = np.linalg.inv(c0 * np.eye(p))
    m0 = np.full((p, q), m0_fill)
    cn = np.linalg.inv(c0inv + X.T @ X)
    mn = cn @ (c0inv @ m0 + X.T @ Y)
    resid = Y - X @ mn
    sn = s0 * np.eye(q) + resid.T @ resid + (mn - m0).T @ c0inv @ (mn - m0)
    return mn, cn, sn, n0 + Y.shape[0]


def test_static_model_matches_batch_oracle():
    rng = np.random.default_rng(20250815)
    T, p, q = 50, 2, 3
    X = np.column_stack([np.ones(T), rng.standard_normal(T)])
    Y = rng.standard_normal((T, q)) + X @ rng.standard_normal((p, q))
    pri = Priors(m0_fill=0.5, c0_scale=7.0, s0_scale=2.0, n0=3.0, delta=1.0)
    mom = forward_filter(Y, X, pri)
    mn, cn, sn, nn = batch_posterior(Y, X, 0.5, 7.0, 2.0, 3.0)
    assert np.abs(mom.m[-1] - mn).max() < 1e-8
    assert np.abs(mom.C[-1] - cn).max() < 1e-8
    assert np.abs(mom.S[-1] - sn).max() < 1e-8
    assert mom.n[-1] == nn


def test_univariate_hand_check():
    # intercept-only, delta=1, c0=100: posterior precision after t obs is
    # 1/100 + t, so m_t = 100 t ybar_t / (100 t + 1) and C_t = 100/(100 t + 1)
    pri = Priors(m0_fill=0.0, c0_scale=100.0, s0_scale=1.0, n0=1.0, delta=1.0)
    y = np.array([[1.0], [2.0], [3.0]])
    F = np.ones((3, 1))
    mom = forward_filter(y, F, pri)

    assert abs(mom.m[0, 0, 0] - 100.0 / 101.0) < 1e-10
    assert abs(mom.C[0, 0, 0] - 100.0 / 101.0) < 1e-10
    assert abs(mom.m[2, 0, 0] - 600.0 / 301.0) < 1e-10
    assert abs(mom.C[2, 0, 0] - 100.0 / 301.0) < 1e-10
    # forecast-error accumulation of S, computed by hand:
    # t=1: f=0, q=101, e=1            -> S = 1 + 1/101
    # t=2: f=100/101, q=201/101, e=102/101 -> + (102/101)^2 * 101/201
    # t=3: f=300/201, q=301/201, e=303/201 -> + (303/201)^2 * 201/301
    s_expected = (1.0 + 1.0 / 101.0
                  + (102.0 / 101.0) ** 2 * 101.0 / 201.0
                  + (303.0 / 201.0) ** 2 * 201.0 / 301.0)
    assert abs(mom.S[2, 0, 0] - s_expected) < 1e-10
    assert mom.n[2] == 4.0


def test_discount_inflates_prior_covariance():
    rng = np.random.default_rng(7)
    Y = rng.standard_normal((20, 2))
    X = np.column_stack([np.ones(20), rng.standard_normal(20)])
    mom = forward_filter(Y, X, Priors(delta=0.9))
    for t in range(1, 20):
        expect = mom.C[t - 1] / 0.9
        assert np.allclose(mom.R[t], expect, atol=1e-12)
    assert np.allclose(mom.R[0], (100.0 * np.eye(2)) / 0.9, atol=1e-12)


def test_forecast_decomposition_and_scale():
    rng = np.random.default_rng(11)
    Y = rng.standard_normal((30, 3))
    X = rng.standard_normal((30, 2))
    mom = forward_filter(Y, X, Priors(delta=0.95))
    assert np.allclose(mom.f + mom.e, Y, atol=1e-12)
    assert np.all(mom.qscale >= 1.0)
    # posterior covariance stays symmetric positive definite
    for t in range(30):
        assert np.allclose(mom.C[t], mom.C[t].T)
        assert np.all(np.linalg.eigvalsh(mom.C[t]) > 0)
    # S grows by a PSD rank-one term: eigenvalues never shrink below prior
    assert np.all(np.diag(mom.S[-1]) >= 1.0 - 1e-12)


def test_empty_series_returns_prior():
    mom = forward_filter(np.empty((0, 2)), np.empty((0, 3)), Priors())
    assert mom.n_scans == 0
    assert mom.m0.shape == (3, 2)
    assert np.all(mom.m0 == 0.0)
    assert np.allclose(mom.C0, 100.0 * np.eye(3))
    assert mom.n0 == 1.0


def test_state_mean_accessor():
    rng = np.random.default_rng(2)
    Y = rng.standard_normal((5, 1))
    X = np.ones((5, 1))
    mom = forward_filter(Y, X, Priors())
    assert np.array_equal(mom.state_mean(-1), mom.m0)
    assert np.array_equal(mom.state_mean(3), mom.m[3])


@pytest.mark.parametrize("delta", [0.0, -0.5, 1.5])
def test_bad_delta_rejected(delta):
    with pytest.raises(ConfigurationError):
        forward_filter(np.ones((3, 1)), np.ones((3, 1)), Priors(delta=delta))


def test_shape_and_finite_validation():
    with pytest.raises(ConfigurationError):
        forward_filter(np.ones((3, 1)), np.ones((4, 1)), Priors())
    with pytest.raises(ConfigurationError):
        forward_filter(np.ones(3), np.ones((3, 1)), Priors())
    bad = np.ones((3, 1))
    bad[1] = np.nan
    with pytest.raises(ConfigurationError):
        forward_filter(bad, np.ones((3, 1)), Priors())
    with pytest.raises(ConfigurationError):
        forward_filter(np.ones((3, 1)), bad, Priors())


def test_custom_evolution_matrix():
    # with G = 0 the state forgets everything: a_t = 0, m_t = gain * e_t
    Y = np.ones((4, 1))
    X = np.ones((4, 1))
    mom = forward_filter(Y, X, Priors(delta=1.0), evolution=np.zeros((1, 1)))
    assert np.allclose(mom.a, 0.0)
    with pytest.raises(ConfigurationError):
        forward_filter(Y, X, Priors(), evolution=np.zeros((2, 2)))


def test_fitness_formula():
    rng = np.random.default_rng(4)
    Y = rng.standard_normal((20, 1)) + 5.0
    X = np.ones((20, 1))
    mom = forward_filter(Y, X, Priors())
    cutpos = 5
    expected = np.mean(
        100.0 * np.abs(Y[cutpos:, 0] - mom.f[cutpos:, 0]) / np.abs(mom.f[cutpos:, 0])
    )
    assert abs(forecast_fitness(Y, mom, cutpos) - expected) < 1e-12

    # exact forecasts give zero
    class Fake:
        f = Y.copy()

    assert forecast_fitness(Y, Fake(), 0) == 0.0

    # all-degenerate forecasts are flagged as undefined
    class Zero:
        f = np.zeros((20, 1))

    assert np.isnan(forecast_fitness(Y, Zero(), 0))


def test_fitness_skips_tiny_denominators():
    y = np.array([[1.0], [2.0], [4.0]])

    class M:
        f = np.array([[0.0], [1.0], [2.0]])  # first forecast degenerate

    # only t=2,3 contribute: 100*(1/1 + 2/2)/2 = 100
    assert abs(forecast_fitness(y, M(), 0) - 100.0) < 1e-12
