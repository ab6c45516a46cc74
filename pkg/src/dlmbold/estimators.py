"""Estimator-style front end.

ActivationEvidence / GroupActivationEvidence wrap the functional pipeline
in the familiar fit-then-inspect shape: constructor parameters mirror
RunConfig, ``fit`` runs the whole-volume analysis, and the fitted object
exposes the evidence maps plus a writer.  Parameters are stored verbatim
so get_params/set_params/clone behave as usual.
"""

from sklearn.base import BaseEstimator

from .exceptions import ConfigurationError
from .mapping import RunConfig, analyze_voxel, run_map, write_evidence_maps
from .validation import coerce_design, coerce_mask, coerce_volume, coerce_volumes


class _EvidenceBase(BaseEstimator):
    def __init__(self, algorithm="fest", test=None, delta=0.95, m0=0.0,
                 c0=100.0, s0=1.0, n0=1.0, nsim=100, cutpos=30, r=1.0,
                 min_vol=0.10, n1=None, seed=0, workers=1):
        self.algorithm = algorithm
        self.test = test
        self.delta = delta
        self.m0 = m0
        self.c0 = c0
        self.s0 = s0
        self.n0 = n0
        self.nsim = nsim
        self.cutpos = cutpos
        self.r = r
        self.min_vol = min_vol
        self.n1 = n1
        self.seed = seed
        self.workers = workers

    def _config(self):
        return RunConfig(
            algorithm=self.algorithm, test=self.test, delta=self.delta,
            m0=self.m0, c0=self.c0, s0=self.s0, n0=self.n0, nsim=self.nsim,
            cutpos=self.cutpos, r=self.r, min_vol=self.min_vol, n1=self.n1,
            seed=self.seed, workers=self.workers,
        )

    def _fit_volumes(self, volumes, design, mask, progress):
        design = coerce_design(design)
        mask = coerce_mask(mask)
        result = run_map(volumes, design, self._config(), mask_volume=mask,
                         progress=progress)
        self.result_ = result
        self.maps_ = result.maps
        self.tests_ = result.tests
        self.mask_ = result.mask
        self.n_regressors_ = result.n_regressors
        self.n_analyzed_ = result.n_analyzed
        self.n_scans_ = design.shape[0]
        return self

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise ConfigurationError(
                "this estimator is not fitted yet; call fit first"
            )

    def evidence_map(self, test=None, covariate=1):
        """Fitted 3-D evidence volume for one test and 1-based covariate."""
        self._check_fitted()
        test = test or self.tests_[0]
        if test not in self.maps_:
            raise ConfigurationError(
                f"test {test!r} was not computed (available: {self.tests_})"
            )
        if not 1 <= covariate <= self.n_regressors_:
            raise ConfigurationError(
                f"covariate must lie in [1, {self.n_regressors_}], got {covariate}"
            )
        return self.maps_[test][..., covariate - 1]

    def save_maps(self, prefix, header=None, voxel_sizes=(1.0, 1.0, 1.0)):
        """Write every fitted evidence volume; returns the file paths."""
        self._check_fitted()
        return write_evidence_maps(prefix, self.result_, header=header,
                                   voxel_sizes=voxel_sizes)


class ActivationEvidence(_EvidenceBase):
    """Single-subject activation evidence maps.

    Examples
    --------
    >>> est = ActivationEvidence(algorithm="fest", test="ltt", nsim=100)
    >>> est.fit(volume, design)            # doctest: +SKIP
    >>> est.evidence_map("ltt", covariate=1)   # doctest: +SKIP
    """

    def fit(self, X, design, mask=None, progress=None):
        """Run the analysis on one 4-D volume (array, Volume4D, or path)."""
        vol = coerce_volume(X)
        return self._fit_volumes([vol], design, mask, progress)

    def analyze_voxel(self, X, design, center, mask=None):
        """Detailed single-cluster report (evidence, draws, fitness)."""
        vol = coerce_volume(X)
        return analyze_voxel([vol], coerce_design(design), self._config(),
                             center, mask_volume=coerce_mask(mask))


class GroupActivationEvidence(_EvidenceBase):
    """Multi-subject activation evidence maps over a pooled model.

    Subjects are concatenated column-wise into one response block per
    cluster; a single-subject group reproduces ActivationEvidence exactly.
    """

    def fit(self, X, design, mask=None, progress=None):
        """Run the group analysis on a list of 4-D volumes (or paths)."""
        volumes = coerce_volumes(X)
        dims = volumes[0].dims
        n_scans = volumes[0].n_scans
        for idx, vol in enumerate(volumes[1:], start=2):
            if vol.dims != dims or vol.n_scans != n_scans:
                raise ConfigurationError(
                    f"subject {idx} shape {vol.dims + (vol.n_scans,)} does not "
                    f"match subject 1 {dims + (n_scans,)}"
                )
        return self._fit_volumes(volumes, design, mask, progress)

    def analyze_voxel(self, X, design, center, mask=None):
        """Detailed single-cluster group report."""
        volumes = coerce_volumes(X)
        return analyze_voxel(volumes, coerce_design(design), self._config(),
                             center, mask_volume=coerce_mask(mask))
