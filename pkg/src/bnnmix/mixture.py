"""Assembly and analysis of the exact Gaussian-mixture predictive.

Conditioning on training data with a discrete prior over interior weights
makes the predictive at a test input an exact finite Gaussian mixture: one
component per candidate, weighted by prior mass times marginal likelihood.
Weights are computed in log space with a max shift and renormalized; all
reductions run in candidate-index order so results do not depend on
evaluation order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import CandidateSet, Dataset, NetworkShape, TestPoint
from .errors import NumericError
from .features import forward_features_stack
from .regression import batched_component_stats

DEFAULT_WEIGHT_THRESHOLD = 1e-6
_CHUNK = 256


@dataclass(frozen=True)
class MixturePredictive:
    """Weights, means, and standard deviations of the predictive mixture."""

    weights: np.ndarray
    means: np.ndarray
    sds: np.ndarray
    test_point_index: int | None = field(default=None, compare=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        mu = np.array(self.means, dtype=float)
        sd = np.array(self.sds, dtype=float)
        if not (w.shape == mu.shape == sd.shape) or w.ndim != 1 or w.size < 1:
            raise ValueError("weights, means, sds must be equal-length vectors")
        if np.any(w < 0) or abs(float(np.sum(w)) - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        if np.any(sd <= 0):
            raise ValueError("component sds must be positive")
        for name, a in (("weights", w), ("means", mu), ("sds", sd)):
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} must be finite")
            a.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "sds", sd)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]


def mixture_weights(
    log_marginals: np.ndarray, log_prior_masses: np.ndarray
) -> np.ndarray:
    """Posterior candidate probabilities: softmax of log mass + log marginal."""
    lm = np.asarray(log_marginals, dtype=float)
    lp = np.asarray(log_prior_masses, dtype=float)
    if lm.shape != lp.shape or lm.ndim != 1:
        raise ValueError("log_marginals and log_prior_masses must be equal-length")
    score = lm + lp
    if np.any(np.isnan(score)) or np.any(score == np.inf):
        raise ValueError("log weights must not contain NaN or +inf")
    top = np.max(score)
    if top == -np.inf:
        raise ValueError("all candidates have zero posterior mass")
    w = np.exp(score - top)
    return w / np.sum(w)


def _component_stats(
    candidates: CandidateSet,
    data: Dataset,
    test_matrix: np.ndarray,
    shape: NetworkShape,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(log_marginals (J,), means (J, m), variances (J, m)) for all candidates."""
    j_count = len(candidates)
    m = test_matrix.shape[1]
    logml = np.empty(j_count)
    means = np.empty((j_count, m))
    variances = np.empty((j_count, m))
    for start in range(0, j_count, _CHUNK):
        idx = slice(start, min(start + _CHUNK, j_count))
        block = candidates.candidates[idx]
        try:
            feats_train = forward_features_stack(block, data.x1, shape)
            feats_test = forward_features_stack(block, test_matrix, shape)
            logml[idx], means[idx], variances[idx] = batched_component_stats(
                feats_train, feats_test, data.y, data.noise_var
            )
        except NumericError as exc:
            raise NumericError(f"candidates [{start}:{idx.stop}]: {exc}") from exc
    return logml, means, variances


def candidate_log_marginals(
    candidates: CandidateSet, data: Dataset, shape: NetworkShape
) -> np.ndarray:
    """Log marginal likelihood of the training targets per candidate.

    One-hot (n x K) targets use the product of per-column marginals, summed
    in sorted order so class relabeling permutes nothing.
    """
    if data.d != shape.d:
        raise ValueError(f"dataset dimension {data.d} does not match shape {shape.d}")
    y_cols = data.y[:, None] if data.y.ndim == 1 else data.y
    j_count = len(candidates)
    logml = np.empty((j_count, y_cols.shape[1]))
    empty_test = np.empty((data.d, 0))
    for start in range(0, j_count, _CHUNK):
        idx = slice(start, min(start + _CHUNK, j_count))
        block = candidates.candidates[idx]
        try:
            feats_train = forward_features_stack(block, data.x1, shape)
            feats_test = forward_features_stack(block, empty_test, shape)
            for k in range(y_cols.shape[1]):
                logml[idx, k], _, _ = batched_component_stats(
                    feats_train, feats_test, y_cols[:, k], data.noise_var
                )
        except NumericError as exc:
            raise NumericError(f"candidates [{start}:{idx.stop}]: {exc}") from exc
    return np.sum(np.sort(logml, axis=1), axis=1)


def posterior_predictive(
    candidates: CandidateSet,
    data: Dataset,
    test: TestPoint,
    shape: NetworkShape,
) -> MixturePredictive:
    """Exact mixture predictive at one test point.

    Component order matches candidate order; component j carries the
    regression predictive of candidate j and weight from
    :func:`mixture_weights`.
    """
    return posterior_predictive_batch(candidates, data, [test], shape)[0]


def posterior_predictive_batch(
    candidates: CandidateSet,
    data: Dataset,
    tests: Sequence[TestPoint],
    shape: NetworkShape,
) -> list[MixturePredictive]:
    """Mixture predictives at several test points, sharing per-candidate work."""
    if data.d != shape.d:
        raise ValueError(f"dataset dimension {data.d} does not match shape {shape.d}")
    for t in tests:
        if t.d != shape.d:
            raise ValueError("test point dimension does not match shape")
    test_matrix = np.column_stack([t.x1_tilde for t in tests])
    logml, means, variances = _component_stats(candidates, data, test_matrix, shape)
    weights = mixture_weights(logml, candidates.log_prior_masses)
    sds = np.sqrt(variances)
    return [
        MixturePredictive(
            weights=weights,
            means=means[:, i],
            sds=sds[:, i],
            test_point_index=t.index if t.index is not None else i,
        )
        for i, t in enumerate(tests)
    ]


def pdf_eval(mix: MixturePredictive, grid: np.ndarray) -> np.ndarray:
    """Mixture density evaluated pointwise on an ascending grid."""
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or not np.all(np.isfinite(g)):
        raise ValueError("grid must be a finite vector")
    if np.any(np.diff(g) < 0):
        raise ValueError("grid must be sorted ascending")
    z = (g[:, None] - mix.means[None, :]) / mix.sds[None, :]
    comp = np.exp(-0.5 * z**2) / (np.sqrt(2.0 * np.pi) * mix.sds[None, :])
    return comp @ mix.weights


def significant_component_count(
    mix: MixturePredictive, threshold: float = DEFAULT_WEIGHT_THRESHOLD
) -> int:
    """Number of components with weight strictly above the threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    return int(np.sum(mix.weights > threshold))


def default_grid(mix: MixturePredictive, grid_points: int) -> np.ndarray:
    """Uniform grid spanning all components plus five standard deviations."""
    span = 5.0 * float(np.max(mix.sds))
    lo = float(np.min(mix.means)) - span
    hi = float(np.max(mix.means)) + span
    return np.linspace(lo, hi, grid_points)


def local_mode_count(mix: MixturePredictive, grid_points: int = 2001) -> int:
    """Strict interior local maxima of the density on a uniform grid."""
    if grid_points < 3:
        raise ValueError("grid_points must be >= 3")
    pdf = pdf_eval(mix, default_grid(mix, grid_points))
    interior = (pdf[1:-1] > pdf[:-2]) & (pdf[1:-1] > pdf[2:])
    return int(np.sum(interior))


def mixture_moments(mix: MixturePredictive) -> tuple[float, float]:
    """Mean and variance of the mixture (law of total variance)."""
    mean = float(mix.weights @ mix.means)
    var = float(mix.weights @ (mix.sds**2 + mix.means**2)) - mean**2
    return mean, var


def save_mixture_csv(mix: MixturePredictive, path: str | Path) -> None:
    """Write components as CSV with columns component, weight, mean, sd."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["component", "weight", "mean", "sd"])
        for jj in range(mix.n_components):
            writer.writerow(
                [
                    jj,
                    repr(float(mix.weights[jj])),
                    repr(float(mix.means[jj])),
                    repr(float(mix.sds[jj])),
                ]
            )


def load_mixture_csv(path: str | Path) -> MixturePredictive:
    rows = []
    with open(path) as fh:
        for rec in csv.DictReader(fh):
            rows.append((float(rec["weight"]), float(rec["mean"]), float(rec["sd"])))
    w, mu, sd = (np.array(col) for col in zip(*rows))
    return MixturePredictive(weights=w, means=mu, sds=sd)
