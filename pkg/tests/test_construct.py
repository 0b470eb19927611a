import numpy as np
import pytest

from bnnmix import (
    EquivalenceClassSpec,
    GaussianPriorSpec,
    GramTarget,
    InfeasibleError,
    NetworkShape,
    RELU_UNIT_VARIANCE_SCALE,
    build_equivalence_class,
    factor_gram_nonneg,
    forward_features,
    generate_dataset,
    log_marginal_likelihood,
    log_marginal_likelihood_from_gram,
    optimal_gram,
    project_onto_row_space,
    projected_optimal_gram,
    relu_optimal_gram,
    rotate_features,
    sample_colspace_theta,
    sample_gaussian_candidates,
    sample_preimage,
)
from bnnmix.construct import rotate_row_pair
from bnnmix.mixture import candidate_log_marginals
from bnnmix.regression import LOG_2PI


class TestSampleGaussianCandidates:
    def test_uniform_masses_and_shapes(self):
        shape = NetworkShape((4, 6))
        cands = sample_gaussian_candidates(shape, 8, seed=0)
        assert len(cands) == 8
        np.testing.assert_allclose(cands.log_prior_masses, -np.log(8), rtol=1e-15)
        for c in cands:
            assert c.widths == (4, 6)
            assert np.array_equal(c.layers[0][1], np.zeros(6))

    def test_single_candidate_mass_one(self):
        cands = sample_gaussian_candidates(NetworkShape((2, 2)), 1, seed=1)
        assert cands[0].log_prior_mass == 0.0

    def test_entry_variance_matches_prior(self):
        # Monte Carlo oracle: empirical per-entry variance within 5% of c/d.
        d, j = 10, 10_000
        prior = GaussianPriorSpec()
        cands = sample_gaussian_candidates(NetworkShape((d, 3)), j, prior, seed=2)
        entries = np.concatenate([c.layers[0][0].ravel() for c in cands])
        want = prior.variance_scale / d
        assert abs(entries.var() - want) / want < 0.05

    def test_deeper_shapes_scale_by_input_width(self):
        shape = NetworkShape((10, 40, 5))
        cands = sample_gaussian_candidates(shape, 400, seed=3)
        first = np.concatenate([c.layers[0][0].ravel() for c in cands])
        second = np.concatenate([c.layers[1][0].ravel() for c in cands])
        c = RELU_UNIT_VARIANCE_SCALE
        assert abs(first.var() - c / 10) / (c / 10) < 0.05
        assert abs(second.var() - c / 40) / (c / 40) < 0.05

    def test_reproducible_per_candidate(self):
        shape = NetworkShape((3, 3))
        a = sample_gaussian_candidates(shape, 5, seed=9)
        b = sample_gaussian_candidates(shape, 7, seed=9)
        for j in range(5):
            assert np.array_equal(a[j].layers[0][0], b[j].layers[0][0])


class TestOptimalGram:
    def test_direct_substitution(self):
        target = optimal_gram(np.array([2.0, 0.0]), 1.0)
        np.testing.assert_allclose(target.gram, [[3.0, 0.0], [0.0, 0.0]], rtol=0)
        assert np.isclose(target.scale_factor, 0.75)

    def test_infeasible_when_noise_dominates(self):
        with pytest.raises(InfeasibleError):
            optimal_gram(np.array([0.1]), 1.0)

    def test_closed_form_value(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(2, 9))
            y = rng.standard_normal(n)
            gv = 0.01
            value = log_marginal_likelihood_from_gram(optimal_gram(y, gv).gram, y, gv)
            closed = -0.5 * (n * LOG_2PI + np.log(y @ y) + 1 + (n - 1) * np.log(gv))
            assert abs(value - closed) <= 1e-10 * abs(closed)

    def test_beats_random_trace_matched_grams(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            n = int(rng.integers(2, 9))
            y = rng.standard_normal(n)
            gv = 0.01
            target = optimal_gram(y, gv)
            best = log_marginal_likelihood_from_gram(target.gram, y, gv)
            trace = np.trace(target.gram)
            for _ in range(500):
                b = rng.standard_normal((n, n))
                g = b @ b.T
                g *= trace / np.trace(g)
                assert best > log_marginal_likelihood_from_gram(g, y, gv)


class TestReluOptimalGram:
    def test_sign_split_example(self):
        target = relu_optimal_gram(np.array([1.0, -1.0]), 0.01)
        np.testing.assert_allclose(
            target.gram, [[0.995, 0.0], [0.0, 0.995]], rtol=1e-15
        )

    def test_sign_split_identity_exact(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            y = rng.standard_normal(int(rng.integers(1, 10)))
            split = np.outer(np.maximum(y, 0), np.maximum(y, 0)) + np.outer(
                np.maximum(-y, 0), np.maximum(-y, 0)
            )
            assert np.array_equal(split, np.maximum(np.outer(y, y), 0.0))

    def test_all_positive_targets_recover_unconstrained(self):
        y = np.array([0.5, 1.5, 2.0])
        a = relu_optimal_gram(y, 0.01)
        b = optimal_gram(y, 0.01)
        assert np.array_equal(a.gram, b.gram)

    def test_psd_without_clipping(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            y = rng.standard_normal(6)
            target = relu_optimal_gram(y, 0.01)
            assert np.min(np.linalg.eigvalsh(target.gram)) >= -1e-12


class TestProjectedOptimalGram:
    def test_full_rank_reduces_to_unprojected(self):
        rng = np.random.default_rng(4)
        x1 = rng.standard_normal((6, 4))
        y = rng.standard_normal(4)
        a = projected_optimal_gram(x1, y, 0.01)
        b = relu_optimal_gram(y, 0.01)
        np.testing.assert_allclose(a.gram, b.gram, rtol=0, atol=1e-12)

    def test_hand_projection(self):
        x1 = np.array([[1.0, 0.0]])
        y = np.array([1.0, 1.0])
        target = projected_optimal_gram(x1, y, 0.01)
        s = 1.0 - 0.01 / 2.0
        np.testing.assert_allclose(target.gram, [[s, 0.0], [0.0, 0.0]], atol=1e-15)
        np.testing.assert_allclose(
            project_onto_row_space(x1, y), [1.0, 0.0], atol=1e-15
        )

    def test_projection_never_beats_unprojected_target(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            d, n = 3, 8
            x1 = rng.standard_normal((d, n))
            y = rng.standard_normal(n)
            gv = 0.01
            lp = log_marginal_likelihood_from_gram(
                projected_optimal_gram(x1, y, gv).gram, y, gv
            )
            lu = log_marginal_likelihood_from_gram(
                relu_optimal_gram(y, gv).gram, y, gv
            )
            assert lp <= lu + 1e-9


class TestFactorGramNonneg:
    def test_hand_example(self):
        y = np.array([1.0, -1.0])
        target = relu_optimal_gram(y, 0.01)
        feats = factor_gram_nonneg(target, y, 3)
        root = np.sqrt(0.995)
        np.testing.assert_allclose(
            feats.xl, [[root, 0.0], [0.0, root], [0.0, 0.0]], rtol=1e-15
        )

    def test_gram_residual_and_nonnegativity(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            n = int(rng.integers(2, 9))
            y = rng.standard_normal(n)
            target = relu_optimal_gram(y, 0.01)
            feats = factor_gram_nonneg(target, y, int(rng.integers(2, 9)))
            assert np.all(feats.xl >= 0)
            assert np.max(np.abs(feats.xl.T @ feats.xl - target.gram)) < 1e-12

    def test_single_row_infeasible_for_mixed_signs(self):
        y = np.array([1.0, -1.0])
        target = relu_optimal_gram(y, 0.01)
        with pytest.raises(InfeasibleError):
            factor_gram_nonneg(target, y, 1)


class TestRotateFeatures:
    def test_quarter_turn_swaps_rows(self):
        # cos(pi/2) rounds to ~6e-17, so "swapped" holds to float precision.
        x = np.array([[1.0, 2.0], [3.0, 4.0], [0.0, 0.0]])
        out = rotate_row_pair(x, 0, 2, np.pi / 2)
        np.testing.assert_allclose(out[2], [1.0, 2.0], atol=1e-15)
        np.testing.assert_allclose(out[0], [0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(out[1], x[1], atol=0)

    def test_gram_preserved_and_nonnegative(self):
        rng = np.random.default_rng(7)
        y = rng.standard_normal(6)
        target = relu_optimal_gram(y, 0.01)
        feats = factor_gram_nonneg(target, y, 8)
        samples = rotate_features(feats, 10, seed=0)
        for s in samples:
            assert np.all(s.xl >= 0)
            assert np.max(np.abs(s.xl.T @ s.xl - target.gram)) < 1e-12

    def test_log_marginal_identical_across_samples(self):
        rng = np.random.default_rng(8)
        y = rng.standard_normal(5)
        gv = 0.01
        feats = factor_gram_nonneg(relu_optimal_gram(y, gv), y, 7)
        values = [
            log_marginal_likelihood(s, y, gv)
            for s in rotate_features(feats, 10, seed=1)
        ]
        spread = (max(values) - min(values)) / abs(np.mean(values))
        assert spread < 1e-8

    def test_requires_zero_row(self):
        with pytest.raises(InfeasibleError):
            rotate_features(np.ones((2, 3)), 1, seed=0)

    def test_rejects_negative_input(self):
        with pytest.raises(ValueError):
            rotate_features(np.array([[1.0, -1.0], [0.0, 0.0]]), 1, seed=0)


class TestSamplePreimage:
    def test_positive_entries_unique_preimage(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        for z in sample_preimage(x, 3, scale=1.0, seed=0):
            assert np.array_equal(z, x)

    def test_relu_roundtrip_exact(self):
        rng = np.random.default_rng(9)
        x = np.maximum(rng.standard_normal((5, 4)), 0.0)
        for z in sample_preimage(x, 5, scale=2.0, seed=1):
            assert np.array_equal(np.maximum(z, 0.0), x)

    def test_samples_differ_only_on_zero_set(self):
        x = np.array([[1.0, 0.0], [0.0, 2.0]])
        a, b = sample_preimage(x, 2, scale=1.0, seed=2)
        assert not np.array_equal(a, b)
        mask = x > 0
        assert np.array_equal(a[mask], b[mask])

    def test_rejects_negative_features(self):
        with pytest.raises(ValueError):
            sample_preimage(np.array([[-1.0]]), 1, 1.0)


class TestSampleColspaceTheta:
    def test_minimum_norm_solution(self):
        rng = np.random.default_rng(10)
        x1 = rng.standard_normal((6, 4))
        z = rng.standard_normal((3, 4))
        (theta,) = sample_colspace_theta(x1, z, 1, scale=0.0, seed=0)
        assert np.max(np.abs(theta.layers[0][0].T @ x1 - z)) < 1e-10

    def test_forward_roundtrip(self):
        rng = np.random.default_rng(11)
        d, n, p = 8, 5, 4
        x1 = rng.standard_normal((d, n))
        z = rng.standard_normal((p, n))
        shape = NetworkShape((d, p))
        for theta in sample_colspace_theta(x1, z, 3, scale=1.0, seed=1):
            feats = forward_features(theta, x1, shape)
            assert np.max(np.abs(feats.xl - np.maximum(z, 0.0))) < 1e-8

    def test_distinct_samples_same_evidence(self):
        rng = np.random.default_rng(12)
        d, n, p = 8, 5, 4
        x1 = rng.standard_normal((d, n))
        z = rng.standard_normal((p, n))
        shape = NetworkShape((d, p))
        thetas = sample_colspace_theta(x1, z, 2, scale=1.0, seed=2)
        assert not np.array_equal(thetas[0].layers[0][0], thetas[1].layers[0][0])
        y = rng.standard_normal(n)
        values = [
            log_marginal_likelihood(forward_features(t, x1, shape), y, 0.01)
            for t in thetas
        ]
        assert abs(values[0] - values[1]) <= 1e-8 * abs(values[0])

    def test_rank_deficient_reports_residual(self):
        x1 = np.array([[1.0, 2.0], [2.0, 4.0]])  # rank 1, n = 2
        with pytest.raises(InfeasibleError, match="residual"):
            sample_colspace_theta(x1, np.ones((2, 2)), 1, scale=0.0, seed=0)


class TestBuildEquivalenceClass:
    def test_singleton_class_matches_spectral_oracle(self):
        data = generate_dataset(12, 6, 0.01, seed=13)
        shape = NetworkShape((12, 5))
        cls = build_equivalence_class(
            data, shape, EquivalenceClassSpec(1, 1, 1), seed=0
        )
        assert len(cls) == 1
        feats = forward_features(cls[0], data.x1, shape)
        got = log_marginal_likelihood(feats, data.y, data.noise_var)
        target = relu_optimal_gram(data.y, data.noise_var)
        base = factor_gram_nonneg(target, data.y, shape.p)
        want = log_marginal_likelihood(base, data.y, data.noise_var)
        assert abs(got - want) <= 1e-8 * abs(want)

    def test_shared_evidence_and_gram(self):
        data = generate_dataset(15, 8, 0.01, seed=14)
        shape = NetworkShape((15, 6))
        cls = build_equivalence_class(
            data, shape, EquivalenceClassSpec(3, 3, 3), seed=1
        )
        assert len(cls) == 27
        lms = candidate_log_marginals(cls, data, shape)
        assert (lms.max() - lms.min()) / abs(lms.mean()) < 1e-6
        grams = [
            (f := forward_features(c, data.x1, shape).xl).T @ f for c in cls
        ]
        ref = grams[0]
        assert max(np.max(np.abs(g - ref)) for g in grams[1:]) < 1e-10

    def test_infeasible_configurations(self):
        data = generate_dataset(4, 6, 0.01, seed=15)
        with pytest.raises(InfeasibleError):
            build_equivalence_class(data, NetworkShape((4, 5)))
        data = generate_dataset(6, 4, 0.01, seed=16)
        with pytest.raises(InfeasibleError):
            build_equivalence_class(data, NetworkShape((6, 2)))

    def test_uniform_masses(self):
        data = generate_dataset(10, 5, 0.01, seed=17)
        cls = build_equivalence_class(
            data, NetworkShape((10, 4)), EquivalenceClassSpec(2, 2, 2), seed=2
        )
        np.testing.assert_allclose(cls.log_prior_masses, -np.log(8), rtol=1e-15)


class TestFeatureVarianceNormalization:
    def test_relu_feature_unit_variance(self):
        # Var relu(z) = c (pi - 1) / (2 pi) = 1 for z ~ N(0, c) at the
        # default prior scale; checked by Monte Carlo with 1e6 draws.
        rng = np.random.default_rng(18)
        z = rng.normal(scale=np.sqrt(RELU_UNIT_VARIANCE_SCALE), size=1_000_000)
        assert abs(np.maximum(z, 0).var() - 1.0) < 0.02

    def test_gram_target_validation(self):
        with pytest.raises(ValueError):
            GramTarget(np.array([[1.0, 2.0], [0.0, 1.0]]), 1.0)
        with pytest.raises(ValueError):
            GramTarget(np.array([[-1.0]]), 1.0)
