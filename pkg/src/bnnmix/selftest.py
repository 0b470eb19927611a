"""Built-in oracle checks runnable from the CLI without a test framework."""

from __future__ import annotations

import numpy as np

from .construct import optimal_gram, relu_optimal_gram
from .data import generate_dataset
from .classify import binary_class_prob, expected_sigmoid
from .mixture import mixture_weights, pdf_eval, MixturePredictive
from .regression import (
    LOG_2PI,
    component_predictive,
    log_marginal_likelihood,
    log_marginal_likelihood_from_gram,
    log_marginal_likelihood_spectral,
)


def _check_predictive_forms(rng) -> str | None:
    for _ in range(50):
        n, p = rng.integers(1, 9, size=2)
        x = rng.standard_normal((p, n))
        xt = rng.standard_normal(p)
        y = rng.standard_normal(n)
        gv = float(rng.uniform(0.01, 1.0))
        m1, v1 = component_predictive(x, xt, y, gv, form="train")
        m2, v2 = component_predictive(x, xt, y, gv, form="weight")
        mean_o = (xt @ x @ np.linalg.inv(x.T @ x / p + gv * np.eye(n)) @ y) / p
        var_o = gv + gv * (xt @ np.linalg.inv(x @ x.T / p + gv * np.eye(p)) @ xt) / p
        for got, want in ((m1, mean_o), (m2, mean_o), (v1, var_o), (v2, var_o)):
            if abs(got - want) > 1e-10 * max(1.0, abs(want)):
                return f"predictive mismatch: {got!r} vs {want!r}"
    return None


def _check_evidence_forms(rng) -> str | None:
    for _ in range(50):
        n, p = rng.integers(1, 9, size=2)
        x = rng.standard_normal((p, n))
        y = rng.standard_normal(n)
        gv = float(rng.uniform(0.01, 1.0))
        dense = log_marginal_likelihood(x, y, gv)
        spectral = log_marginal_likelihood_spectral(x, y, gv)
        if abs(dense - spectral) > 1e-10 * abs(dense):
            return f"dense {dense!r} vs spectral {spectral!r}"
    return None


def _check_closed_form_optimum(rng) -> str | None:
    for _ in range(20):
        n = int(rng.integers(2, 9))
        y = rng.standard_normal(n)
        gv = 0.01
        value = log_marginal_likelihood_from_gram(optimal_gram(y, gv).gram, y, gv)
        yty = float(y @ y)
        closed = -0.5 * (n * LOG_2PI + np.log(yty) + 1.0 + (n - 1) * np.log(gv))
        if abs(value - closed) > 1e-10 * abs(closed):
            return f"optimum {value!r} vs closed form {closed!r}"
        relu_val = log_marginal_likelihood_from_gram(
            relu_optimal_gram(y, gv).gram, y, gv
        )
        if relu_val > value + 1e-9:
            return "nonnegative-constrained value exceeded the unconstrained bound"
    return None


def _check_mixture_mechanics(rng) -> str | None:
    lm = rng.standard_normal(6)
    w = mixture_weights(lm, np.full(6, -np.log(6.0)))
    if abs(w.sum() - 1.0) > 1e-12:
        return "weights do not sum to 1"
    w_shift = mixture_weights(lm + 123.456, np.full(6, -np.log(6.0)))
    if np.max(np.abs(w - w_shift)) > 1e-14:
        return "weights not shift invariant"
    mix = MixturePredictive(w, rng.standard_normal(6), np.abs(rng.standard_normal(6)) + 0.5)
    span = 10.0 * float(np.max(mix.sds))
    grid = np.linspace(mix.means.min() - span, mix.means.max() + span, 10_000)
    mass = float(np.trapezoid(pdf_eval(mix, grid), grid))
    if abs(mass - 1.0) > 1e-6:
        return f"pdf mass {mass!r}"
    return None


def _check_probit(rng) -> str | None:
    if expected_sigmoid(0.0, 2.5) != 0.5:
        return "probit at zero mean is not 1/2"
    for _ in range(10):
        m, v = float(rng.normal()), float(rng.uniform(0.1, 4.0))
        a = expected_sigmoid(m, v, "probit")
        b = expected_sigmoid(m, v, "gauss_hermite")
        if abs(a - b) > 0.01:
            return f"probit {a!r} vs quadrature {b!r}"
    return None


def _check_generator() -> str | None:
    data = generate_dataset(5, 64, 0.01, seed=123)
    if abs(float(np.var(data.y)) - 1.0) > 1e-12:
        return "target variance not standardized"
    again = generate_dataset(5, 64, 0.01, seed=123)
    if not (np.array_equal(data.x1, again.x1) and np.array_equal(data.y, again.y)):
        return "regeneration is not bit-identical"
    return None


CHECKS = [
    ("predictive-forms-vs-explicit-inverse", _check_predictive_forms),
    ("evidence-dense-vs-spectral", _check_evidence_forms),
    ("closed-form-optimum", _check_closed_form_optimum),
    ("mixture-mechanics", _check_mixture_mechanics),
    ("probit-approximation", _check_probit),
    ("dataset-generator", lambda rng: _check_generator()),
]


def run_selftest(seed: int = 0) -> int:
    """Run all built-in checks; print one line each; return failure count."""
    failures = 0
    for name, check in CHECKS:
        message = check(np.random.default_rng(seed))
        if message is None:
            print(f"PASS {name}")
        else:
            failures += 1
            print(f"FAIL {name}: {message}")
    return failures
