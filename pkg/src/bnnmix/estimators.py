"""Scikit-learn style estimators wrapping the mixture predictive.

These adapters use the sklearn sample orientation (rows are samples) and
delegate to the column-oriented core.  ``fit`` conditions on the training
data: it fixes the candidate set and computes the posterior candidate
weights; ``predict`` evaluates the mixture at new inputs.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .classify import binary_class_prob, multiclass_probs
from .construct import (
    EquivalenceClassSpec,
    GaussianPriorSpec,
    build_equivalence_class,
    sample_gaussian_candidates,
)
from .data import RELU_UNIT_VARIANCE_SCALE, CandidateSet, Dataset, NetworkShape, TestPoint
from .mixture import (
    candidate_log_marginals,
    mixture_moments,
    mixture_weights,
    posterior_predictive_batch,
)


class _MixtureBase(BaseEstimator):
    def __init__(
        self,
        n_candidates=100,
        feature_width=None,
        hidden_widths=None,
        activation="relu",
        noise_var=0.01,
        variance_scale=RELU_UNIT_VARIANCE_SCALE,
        candidate_source="gaussian",
        class_spec=None,
        candidates=None,
        random_state=0,
    ):
        self.n_candidates = n_candidates
        self.feature_width = feature_width
        self.hidden_widths = hidden_widths
        self.activation = activation
        self.noise_var = noise_var
        self.variance_scale = variance_scale
        self.candidate_source = candidate_source
        self.class_spec = class_spec
        self.candidates = candidates
        self.random_state = random_state

    def _condition(self, X, targets):
        d = X.shape[1]
        p = self.feature_width if self.feature_width is not None else d
        widths = [d] + list(self.hidden_widths or []) + [int(p)]
        self.shape_ = NetworkShape(tuple(widths), self.activation)
        self.dataset_ = Dataset(x1=X.T, y=targets, noise_var=self.noise_var)
        if isinstance(self.candidates, CandidateSet):
            self.candidates_ = self.candidates
        elif self.candidate_source == "gaussian":
            self.candidates_ = sample_gaussian_candidates(
                self.shape_,
                self.n_candidates,
                GaussianPriorSpec(self.variance_scale),
                seed=self.random_state,
            )
        elif self.candidate_source == "equivalence_class":
            self.candidates_ = build_equivalence_class(
                self.dataset_,
                self.shape_,
                self.class_spec or EquivalenceClassSpec(),
                seed=self.random_state,
            )
        else:
            raise ValueError(
                f"unknown candidate_source {self.candidate_source!r}"
            )
        self.log_marginals_ = candidate_log_marginals(
            self.candidates_, self.dataset_, self.shape_
        )
        self.weights_ = mixture_weights(
            self.log_marginals_, self.candidates_.log_prior_masses
        )
        self.n_features_in_ = d
        return X, y

    def _tests(self, X):
        check_is_fitted(self, "candidates_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return [TestPoint(row, index=i) for i, row in enumerate(X)]


class MixtureRegressor(_MixtureBase, RegressorMixin):
    """Bayesian regression whose posterior predictive is an exact mixture.

    Final-layer weights carry a Gaussian prior; interior weights take one of
    finitely many candidate values.  ``predict`` returns the mixture mean;
    ``predict_mixture`` exposes the full per-component structure.

    Examples
    --------
    >>> from bnnmix import MixtureRegressor
    >>> import numpy as np
    >>> rng = np.random.default_rng(0)
    >>> X, y = rng.standard_normal((20, 5)), rng.standard_normal(20)
    >>> model = MixtureRegressor(n_candidates=50).fit(X, y)
    >>> model.predict(X[:2]).shape
    (2,)
    """

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        self._condition(X, y)
        return self

    def predict_mixture(self, X):
        """Full Gaussian-mixture predictive per row of ``X``."""
        tests = self._tests(X)
        return posterior_predictive_batch(
            self.candidates_, self.dataset_, tests, self.shape_
        )

    def predict(self, X, return_std=False):
        """Mixture mean per row; optionally the mixture standard deviation."""
        moments = [mixture_moments(m) for m in self.predict_mixture(X)]
        means = np.array([m for m, _ in moments])
        if return_std:
            return means, np.sqrt(np.array([v for _, v in moments]))
        return means


class MixtureClassifier(_MixtureBase, ClassifierMixin):
    """Classification on top of the mixture regression machinery.

    Two classes use the probit approximation of the sigmoid expectation;
    more classes use the mean-field softmax approximation with per-class
    conjugate updates.  ``predict_proba`` rows are renormalized to sum to 1.
    """

    def fit(self, X, y):
        X, y_raw = check_X_y(X, np.asarray(y))
        self.classes_, encoded = np.unique(y_raw, return_inverse=True)
        if self.classes_.shape[0] < 2:
            raise ValueError("need at least two classes")
        if self.classes_.shape[0] == 2:
            targets = encoded.astype(float)
        else:
            targets = np.eye(self.classes_.shape[0])[encoded]
        self._condition(X, targets)
        return self

    def predict_proba(self, X):
        tests = self._tests(X)
        rows = []
        for t in tests:
            if self.classes_.shape[0] == 2:
                p1 = binary_class_prob(
                    self.candidates_, self.dataset_, t, self.shape_
                )
                rows.append([1.0 - p1, p1])
            else:
                rows.append(
                    multiclass_probs(
                        self.candidates_, self.dataset_, t, self.shape_,
                        renormalize=True,
                    )
                )
        return np.array(rows)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
