"""Classification-mode predictives built on the regression machinery.

Binary labels use the probit approximation of the logistic sigmoid, which
turns the Gaussian integral over the final-layer weights into a closed form.
Multi-class labels use a mean-field approximation of the softmax expectation
with per-class conjugate updates sharing one feature matrix.  Both are
approximation layers on top of the exact regression mixture; the observation
noise variance is kept as a free configuration value for 0/1 targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, ndtr

from .data import CandidateSet, Dataset, NetworkShape, TestPoint
from .errors import NumericError
from .features import forward_features_stack
from .mixture import mixture_weights
from .regression import batched_component_stats

_CHUNK = 256
# Variance of the logistic distribution over the probit scale: the
# approximation sigmoid(x) ~ ndtr(sqrt(pi/8) x) gives E[sigmoid(N(m, v))]
# ~ ndtr(m / sqrt(8/pi + v)).
_PROBIT_VAR = 8.0 / np.pi


@dataclass(frozen=True)
class LogitPosterior:
    """Gaussian over the (per-class) logits at one test point."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise ValueError("covariance shape must match the mean length")
        if np.max(np.abs(cov - cov.T)) > 1e-12 or np.min(np.linalg.eigvalsh(cov)) < -1e-12:
            raise ValueError("covariance must be symmetric PSD")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", 0.5 * (cov + cov.T))


def expected_sigmoid(mean: float, var: float, method: str = "probit") -> float:
    """E[sigmoid(x)] for x ~ N(mean, var).

    ``"probit"`` uses the closed-form probit approximation; ``"gauss_hermite"``
    evaluates the integral with 64-node Gauss-Hermite quadrature (validation
    fallback).  Zero variance returns the deterministic sigmoid.
    """
    if var < 0:
        raise ValueError("var must be nonnegative")
    if var == 0.0:
        return float(expit(mean))
    if method == "probit":
        return float(ndtr(mean / np.sqrt(_PROBIT_VAR + var)))
    if method == "gauss_hermite":
        nodes, weights = np.polynomial.hermite.hermgauss(64)
        vals = expit(mean + np.sqrt(2.0 * var) * nodes)
        return float(weights @ vals / np.sqrt(np.pi))
    raise ValueError(f"unknown method {method!r}")


def _class_stats(
    candidates: CandidateSet,
    data: Dataset,
    test: TestPoint,
    shape: NetworkShape,
    y_columns: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-candidate, per-class log marginals and predictive moments.

    Returns (logml (J, K), means (J, K), variances (J, K)) where class ``k``
    regresses on column ``k`` of ``y_columns``.
    """
    if data.d != shape.d or test.d != shape.d:
        raise ValueError("dataset/test dimension does not match shape")
    j_count = len(candidates)
    k_count = y_columns.shape[1]
    logml = np.empty((j_count, k_count))
    means = np.empty((j_count, k_count))
    variances = np.empty((j_count, k_count))
    for start in range(0, j_count, _CHUNK):
        idx = slice(start, min(start + _CHUNK, j_count))
        block = candidates.candidates[idx]
        try:
            feats_train = forward_features_stack(block, data.x1, shape)
            feats_test = forward_features_stack(
                block, test.x1_tilde[:, None], shape
            )
            for k in range(k_count):
                lm, mu, var = batched_component_stats(
                    feats_train, feats_test, y_columns[:, k], data.noise_var
                )
                logml[idx, k], means[idx, k], variances[idx, k] = lm, mu[:, 0], var[:, 0]
        except NumericError as exc:
            raise NumericError(f"candidates [{start}:{idx.stop}]: {exc}") from exc
    return logml, means, variances


def binary_class_prob(
    candidates: CandidateSet,
    data: Dataset,
    test: TestPoint,
    shape: NetworkShape,
) -> float:
    """Mixture probability of label 1 under the probit approximation.

    Labels are treated as regression targets in the conjugate update; each
    component contributes ndtr(mean / sqrt(8/pi + var)) with the component's
    predictive moments, weighted by the regression mixture weights.
    """
    y = np.asarray(data.y, dtype=float)
    if y.ndim != 1 or not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("binary classification requires y entries in {0, 1}")
    logml, means, variances = _class_stats(candidates, data, test, shape, y[:, None])
    weights = mixture_weights(logml[:, 0], candidates.log_prior_masses)
    probs = ndtr(means[:, 0] / np.sqrt(_PROBIT_VAR + variances[:, 0]))
    # True weighted average: identical component values pass through exactly.
    return float(weights @ probs / np.sum(weights))


def _one_hot(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or y.shape[1] < 2:
        raise ValueError("multi-class y must be an n x K one-hot matrix, K >= 2")
    if not np.all(np.isin(y, (0.0, 1.0))) or not np.all(y.sum(axis=1) == 1.0):
        raise ValueError("y rows must be one-hot")
    return y


def multiclass_probs(
    candidates: CandidateSet,
    data: Dataset,
    test: TestPoint,
    shape: NetworkShape,
    renormalize: bool = False,
) -> np.ndarray:
    """Mean-field softmax probabilities for all K classes.

    Candidate weights use the product of per-class marginal likelihoods.  The
    mean-field outputs do not sum to 1 exactly; set ``renormalize`` to rescale
    them (off by default).
    """
    y = _one_hot(data.y)
    k_count = y.shape[1]
    logml, means, variances = _class_stats(candidates, data, test, shape, y)
    # Sort before reducing over classes so that relabeling the classes
    # permutes the outputs exactly.
    weights = mixture_weights(
        np.sum(np.sort(logml, axis=1), axis=1), candidates.log_prior_masses
    )
    probs = np.empty(k_count)
    for k in range(k_count):
        inv_expect = np.empty((len(candidates), k_count - 1))
        col = 0
        for r in range(k_count):
            if r == k:
                continue
            diff_mean = means[:, k] - means[:, r]
            diff_var = variances[:, k] + variances[:, r]
            exp_sig = np.where(
                diff_var == 0.0,
                expit(diff_mean),
                ndtr(diff_mean / np.sqrt(_PROBIT_VAR + diff_var)),
            )
            inv_expect[:, col] = 1.0 / exp_sig
            col += 1
        denom = 2.0 - k_count + np.sum(np.sort(inv_expect, axis=1), axis=1)
        probs[k] = float(weights @ (1.0 / denom))
    if renormalize:
        probs = probs / np.sum(probs)
    return probs


def multiclass_prob(
    candidates: CandidateSet,
    data: Dataset,
    test: TestPoint,
    shape: NetworkShape,
    k: int,
    renormalize: bool = False,
) -> float:
    """Mean-field probability of class ``k``; see :func:`multiclass_probs`."""
    probs = multiclass_probs(candidates, data, test, shape, renormalize=renormalize)
    if not 0 <= k < probs.shape[0]:
        raise ValueError(f"class index {k} out of range")
    return float(probs[k])


def logit_posterior(
    means: np.ndarray, variances: np.ndarray
) -> LogitPosterior:
    """Independent per-class Gaussian over logits (diagonal covariance)."""
    v = np.atleast_1d(np.asarray(variances, dtype=float))
    return LogitPosterior(mean=means, covariance=np.diag(v))
