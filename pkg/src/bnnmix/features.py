"""Deterministic forward pass producing last-hidden-layer feature matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Activation, NetworkShape, ThetaCandidate
from .errors import NumericError


@dataclass(frozen=True)
class FeatureMatrix:
    """Feature-layer activations, ``p x m`` with one column per input."""

    xl: np.ndarray
    candidate_index: int | None = field(default=None, compare=False)

    def __post_init__(self):
        xl = np.array(self.xl, dtype=float)
        if xl.ndim != 2:
            raise ValueError("feature matrix must be 2-d (p x m)")
        xl.flags.writeable = False
        object.__setattr__(self, "xl", xl)

    @property
    def p(self) -> int:
        return self.xl.shape[0]


def as_feature_array(xl) -> np.ndarray:
    """Accept a FeatureMatrix or a plain array and return the p x m array."""
    arr = xl.xl if isinstance(xl, FeatureMatrix) else np.asarray(xl, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def _activate(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation is Activation.RELU:
        return np.maximum(z, 0.0)
    return z


def forward_features(
    theta: ThetaCandidate, inputs: np.ndarray, shape: NetworkShape
) -> FeatureMatrix:
    """Propagate inputs through the interior layers.

    Each layer applies ``activation(W.T x - b)`` componentwise; the result is
    the feature matrix of the last hidden layer, one column per input column.

    Parameters
    ----------
    theta : ThetaCandidate
        Interior weights/biases, chain-consistent with ``shape``.
    inputs : ndarray
        ``d x m`` matrix of input columns (a single vector is accepted).
    shape : NetworkShape
        Layer widths and activation.
    """
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != shape.d:
        raise ValueError(f"inputs have {x.shape[0]} rows, expected {shape.d}")
    if not theta.chains_with(shape):
        raise ValueError(
            f"candidate widths {theta.widths} do not match shape {shape.widths}"
        )
    with np.errstate(over="ignore", invalid="ignore"):
        for w, b in theta.layers:
            x = _activate(w.T @ x - b[:, None], shape.activation)
    if not np.all(np.isfinite(x)):
        raise NumericError("forward pass produced non-finite activations")
    return FeatureMatrix(x)


def forward_features_stack(
    thetas: Sequence[ThetaCandidate], inputs: np.ndarray, shape: NetworkShape
) -> np.ndarray:
    """Forward a batch of same-shape candidates at once; returns ``(J, p, m)``.

    Equivalent to stacking :func:`forward_features` over the candidates but
    uses one batched matmul per layer.
    """
    x0 = np.asarray(inputs, dtype=float)
    if x0.ndim == 1:
        x0 = x0[:, None]
    if x0.shape[0] != shape.d:
        raise ValueError(f"inputs have {x0.shape[0]} rows, expected {shape.d}")
    for theta in thetas:
        if not theta.chains_with(shape):
            raise ValueError(
                f"candidate widths {theta.widths} do not match shape {shape.widths}"
            )
    x = np.broadcast_to(x0, (len(thetas),) + x0.shape)
    with np.errstate(over="ignore", invalid="ignore"):
        for ell in range(len(shape.widths) - 1):
            w = np.stack([t.layers[ell][0] for t in thetas])  # (J, d_in, d_out)
            b = np.stack([t.layers[ell][1] for t in thetas])  # (J, d_out)
            x = _activate(
                np.matmul(w.transpose(0, 2, 1), x) - b[:, :, None], shape.activation
            )
    if not np.all(np.isfinite(x)):
        bad = np.where(~np.all(np.isfinite(x), axis=(1, 2)))[0]
        raise NumericError(
            f"forward pass produced non-finite activations (candidate {bad[0]})"
        )
    return x
