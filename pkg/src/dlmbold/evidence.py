"""Activation-evidence functionals over sampled trajectories.

Every test reduces a TrajectoryDraws block to one number per regressor:
the Monte Carlo probability that a time-averaged coefficient summary is
strictly positive.  Draws are first averaged over the retained scans,
giving one (p, q) matrix per simulation; the tests differ only in how
they collapse the column axis:

marginal : centre-column average positive (for a group block, the average
           of the subject centre columns)
joint    : every column's average positive simultaneously
ltt      : the across-column mean of the averages positive

Ties at exactly zero count as not-positive, so evidence values are always
multiples of 1/nsim in [0, 1], and joint <= marginal and joint <= ltt hold
whenever the tests share draws.
"""

import numpy as np


def _time_averaged(draws):
    """Average theta draws over retained scans -> (p, q, nsim)."""
    return np.asarray(draws.theta).mean(axis=0)


def evidence_marginal(draws, centers=(0,)):
    """P(time-averaged centre coefficient > 0) per regressor.

    ``centers`` lists the column indices whose average forms the summary;
    the default single index 0 is the individual-analysis centre voxel.
    Group blocks pass one centre per subject, making the summary the
    across-subject mean of the subject centres.

    Returns a (p,) vector of evidence values.
    """
    avg = _time_averaged(draws)
    summary = avg[:, list(centers), :].mean(axis=1)
    return (summary > 0.0).mean(axis=1)


def evidence_joint(draws):
    """P(all columns' time-averaged coefficients > 0) per regressor."""
    avg = _time_averaged(draws)
    return np.all(avg > 0.0, axis=1).mean(axis=1)


def evidence_ltt(draws):
    """P(across-column mean of time-averaged coefficients > 0) per regressor."""
    avg = _time_averaged(draws)
    return (avg.mean(axis=1) > 0.0).mean(axis=1)


# Which tests each sampling algorithm reports, in output order.
TEST_SETS = {
    ("fest", "ltt"): ("ltt",),
    ("fest", "joint"): ("joint", "marginal"),
    ("ffbs", None): ("marginal", "joint", "ltt"),
    ("fsts", None): ("marginal", "joint", "ltt"),
}


def tests_for(algorithm, test=None):
    """Resolve the reported test set for an algorithm/test selection.

    fest computes one test family at a time (ltt alone, or the joint test
    together with its marginal companion); ffbs and fsts always report all
    three.
    """
    key = (algorithm, test if algorithm == "fest" else None)
    if key not in TEST_SETS:
        from .exceptions import ConfigurationError

        raise ConfigurationError(
            f"no test set for algorithm={algorithm!r}, test={test!r}"
        )
    return TEST_SETS[key]


def compute_evidence(draws, tests, centers=(0,)):
    """Evaluate the named tests on one draw block.

    Returns a dict test name -> (p,) evidence vector.
    """
    out = {}
    for name in tests:
        if name == "marginal":
            out[name] = evidence_marginal(draws, centers=centers)
        elif name == "joint":
            out[name] = evidence_joint(draws)
        elif name == "ltt":
            out[name] = evidence_ltt(draws)
        else:
            from .exceptions import ConfigurationError

            raise ConfigurationError(f"unknown test {name!r}")
    return out
