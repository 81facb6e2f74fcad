"""scikit-learn style front ends for the mixture fit and the HMMDR loop."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DomainError
from .mixfit import MODES, Dataset, FitConfig, fit_mixture, map_classify
from .pipeline import PipelineConfig, run_hmmdr


def _dataset(X, y, mode):
    X = check_array(X, dtype=float, ensure_min_samples=2)
    if mode == "clustering":
        return Dataset(X)
    if y is None:
        raise DomainError(f"mode {mode!r} needs y (use -1 for unlabelled rows)")
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise DomainError("y must have one entry per row of X")
    return Dataset(X, y.astype(int), y >= 0)


def _fit_config(est) -> FitConfig:
    return FitConfig(epsilon=est.epsilon, max_iter=est.max_iter, init=est.init)


class GHMixture(ClusterMixin, BaseEstimator):
    """
    Mixture of multivariate generalized hyperbolic distributions.

    Parameters
    ----------
    g_min, g_max : int
        Component range searched by BIC (clustering only; the labelled
        paradigms use one component per class).
    mode : {"clustering", "classification", "discriminant"}
    epsilon : float
        Aitken stopping tolerance on the log-likelihood.
    max_iter : int
    init : {"ward", "random"}
    random_state : int, Generator or None

    Attributes
    ----------
    model_ : MixtureModel
    n_components_ : int
    weights_ : ndarray of shape (n_components_,)
    bic_ : float
    labels_ : ndarray of shape (n_samples,)
        MAP component of each training row.
    """

    def __init__(self, g_min=1, g_max=6, mode="clustering", epsilon=1e-5, max_iter=500,
                 init="ward", random_state=None):
        self.g_min = g_min
        self.g_max = g_max
        self.mode = mode
        self.epsilon = epsilon
        self.max_iter = max_iter
        self.init = init
        self.random_state = random_state

    def fit(self, X, y=None):
        if self.mode not in MODES:
            raise DomainError(f"unknown mode {self.mode!r}")
        data = _dataset(X, y, self.mode)
        self.model_ = fit_mixture(data, self.mode, (self.g_min, self.g_max), _fit_config(self),
                                  self.random_state)
        self.n_components_ = self.model_.n_components
        self.weights_ = self.model_.weights
        self.bic_ = self.model_.bic
        self.n_features_in_ = data.p
        self.labels_ = self.predict(data.x)
        return self

    def _check(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise DomainError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def predict_proba(self, X):
        return self.model_.predict_proba(self._check(X))

    def predict(self, X):
        return map_classify(self.predict_proba(X))

    def score_samples(self, X):
        from scipy.special import logsumexp
        return logsumexp(self.model_.log_weighted_densities(self._check(X)), axis=1)

    def score(self, X, y=None):
        """Mean log-likelihood per row."""
        return float(np.mean(self.score_samples(X)))


class HMMDR(TransformerMixin, ClusterMixin, BaseEstimator):
    """
    Dimension reduction for GH mixtures with greedy variable selection.

    ``fit`` runs the full loop; ``transform`` maps new rows to the selected
    HMMDR variables, ``predict`` gives MAP classes under the final mixture.

    Parameters
    ----------
    g_min, g_max : int
    mode : {"clustering", "classification", "discriminant"}
    epsilon : float
    max_iter : int
    init : {"ward", "random"}
    standardize : bool
        Scale columns to mean 0, variance 1 before fitting.
    max_outer : int
        Cap on outer iterations.
    moments : {"exact", "nominal"}
        Component moments entering the subspace kernel.
    random_state : int, Generator or None

    Attributes
    ----------
    result_ : HmmdrResult
    loadings_ : ndarray of shape (n_features, d)
        Directions in the (standardized) input space.
    model_ : MixtureModel
        Mixture on the selected HMMDR variables.
    labels_ : ndarray
        MAP class for every training row.
    """

    def __init__(self, g_min=1, g_max=6, mode="clustering", epsilon=1e-5, max_iter=500,
                 init="ward", standardize=True, max_outer=10, moments="exact", random_state=None):
        self.g_min = g_min
        self.g_max = g_max
        self.mode = mode
        self.epsilon = epsilon
        self.max_iter = max_iter
        self.init = init
        self.standardize = standardize
        self.max_outer = max_outer
        self.moments = moments
        self.random_state = random_state

    def fit(self, X, y=None):
        data = _dataset(X, y, self.mode)
        config = PipelineConfig(g_range=(self.g_min, self.g_max), fit=_fit_config(self),
                                standardize=self.standardize, max_outer=self.max_outer,
                                moments=self.moments)
        self.result_ = run_hmmdr(data, self.mode, config, self.random_state)
        self.loadings_ = self.result_.loadings
        self.eigenvalues_ = self.result_.eigenvalues
        self.model_ = self.result_.final_model
        self.n_features_in_ = data.p
        self.labels_ = map_classify(self.model_.predict_proba(self.result_.projected))
        if self.mode == "classification":
            known = data.known_mask
            self.labels_[known] = data.labels[known]
        return self

    def transform(self, X):
        check_is_fitted(self, "result_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise DomainError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return self.result_.transform(X)

    def predict_proba(self, X):
        return self.model_.predict_proba(self.transform(X))

    def predict(self, X):
        return map_classify(self.predict_proba(X))
