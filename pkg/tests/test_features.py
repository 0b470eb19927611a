import numpy as np
import pytest

from bnnmix import NetworkShape, ThetaCandidate, forward_features
from bnnmix.errors import NumericError
from bnnmix.features import forward_features_stack


def two_layer(theta_matrix):
    return ThetaCandidate(layers=((theta_matrix, np.zeros(theta_matrix.shape[1])),))


def naive_forward(theta, inputs, shape):
    """Straight-line reimplementation: loop over layers, columns, and units."""
    x = np.array(inputs, dtype=float)
    for w, b in theta.layers:
        out = np.empty((w.shape[1], x.shape[1]))
        for col in range(x.shape[1]):
            for unit in range(w.shape[1]):
                z = float(w[:, unit] @ x[:, col]) - b[unit]
                if shape.activation.value == "relu":
                    z = z if z > 0 else 0.0
                out[unit, col] = z
        x = out
    return x


class TestForwardFeatures:
    def test_relu_definition(self):
        # Theta.T x = (1, -2) under relu gives (1, 0).
        theta = two_layer(np.array([[1.0, -2.0]]))
        out = forward_features(theta, np.array([[1.0]]), NetworkShape((1, 2), "relu"))
        assert np.array_equal(out.xl, np.array([[1.0], [0.0]]))

    def test_identity_activation(self):
        theta = two_layer(np.array([[1.0, -2.0]]))
        out = forward_features(
            theta, np.array([[1.0]]), NetworkShape((1, 2), "identity")
        )
        assert np.array_equal(out.xl, np.array([[1.0], [-2.0]]))

    def test_three_layer_against_naive_reimplementation(self):
        rng = np.random.default_rng(0)
        shape = NetworkShape((3, 5, 4), "relu")
        theta = ThetaCandidate(
            layers=(
                (rng.standard_normal((3, 5)), rng.standard_normal(5)),
                (rng.standard_normal((5, 4)), rng.standard_normal(4)),
            )
        )
        inputs = rng.standard_normal((3, 4))
        got = forward_features(theta, inputs, shape).xl
        want = naive_forward(theta, inputs, shape)
        assert np.max(np.abs(got - want)) < 1e-14

    def test_relu_output_nonnegative(self):
        rng = np.random.default_rng(1)
        shape = NetworkShape((4, 6))
        for _ in range(20):
            theta = two_layer(rng.standard_normal((4, 6)))
            out = forward_features(theta, rng.standard_normal((4, 3)), shape)
            assert np.all(out.xl >= 0)

    def test_shape_mismatch_raises(self):
        theta = two_layer(np.ones((2, 3)))
        with pytest.raises(ValueError):
            forward_features(theta, np.ones((3, 1)), NetworkShape((3, 3)))
        with pytest.raises(ValueError):
            forward_features(theta, np.ones((2, 1)), NetworkShape((2, 4)))

    def test_nonfinite_raises_numeric_error(self):
        theta = two_layer(np.array([[1e308, 1e308]]))
        with pytest.raises(NumericError):
            forward_features(
                theta, np.array([[1e308]]), NetworkShape((1, 2), "identity")
            )

    def test_hidden_unit_permutation_leaves_gram_invariant(self):
        # Integer-valued weights keep the products exact, so the Gram is
        # literally identical after permuting hidden units.
        rng = np.random.default_rng(2)
        w = rng.integers(-3, 4, size=(4, 6)).astype(float)
        inputs = rng.integers(-2, 3, size=(4, 5)).astype(float)
        shape = NetworkShape((4, 6))
        perm = rng.permutation(6)
        a = forward_features(two_layer(w), inputs, shape).xl
        b = forward_features(two_layer(w[:, perm]), inputs, shape).xl
        assert np.array_equal(a.T @ a, b.T @ b)
        assert np.array_equal(a[perm], b)


class TestForwardFeaturesStack:
    def test_matches_single_candidate_forward(self):
        rng = np.random.default_rng(3)
        shape = NetworkShape((3, 4, 5), "relu")
        thetas = [
            ThetaCandidate(
                layers=(
                    (rng.standard_normal((3, 4)), rng.standard_normal(4)),
                    (rng.standard_normal((4, 5)), rng.standard_normal(5)),
                )
            )
            for _ in range(7)
        ]
        inputs = rng.standard_normal((3, 6))
        stacked = forward_features_stack(thetas, inputs, shape)
        for j, theta in enumerate(thetas):
            single = forward_features(theta, inputs, shape).xl
            np.testing.assert_allclose(stacked[j], single, rtol=0, atol=1e-14)

    def test_empty_inputs_supported(self):
        rng = np.random.default_rng(4)
        shape = NetworkShape((3, 4))
        thetas = [two_layer(rng.standard_normal((3, 4)))]
        out = forward_features_stack(thetas, np.empty((3, 0)), shape)
        assert out.shape == (1, 4, 0)
