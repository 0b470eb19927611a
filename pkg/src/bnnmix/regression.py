"""Per-candidate Bayesian linear regression over final-layer weights.

Model: targets ``y = w . x_L + noise`` with ``w ~ N(0, I/p)`` and noise
variance ``noise_var``.  All computations stay in log space; systems are
solved through symmetric positive-definite factorizations, choosing the
``n x n`` or ``p x p`` formulation by whichever is smaller and converting
through the push-through identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NumericError
from .features import as_feature_array

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class ComponentPosterior:
    """Predictive moments and log marginal likelihood for one candidate."""

    pred_mean: float
    pred_var: float
    log_marginal: float
    candidate_index: int | None = None


@dataclass(frozen=True)
class FinalLayerPosterior:
    """Gaussian posterior over the final-layer weight vector."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise ValueError("covariance must be p x p for a length-p mean")
        if np.max(np.abs(cov - cov.T)) > 1e-12:
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", 0.5 * (cov + cov.T))


def _prep(xl_train, y, noise_var, p):
    x = as_feature_array(xl_train)
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[1] != y.shape[0]:
        raise ValueError("xl_train must have one column per target entry")
    if not noise_var > 0:
        raise ValueError("noise_var must be positive")
    p = x.shape[0] if p is None else int(p)
    if p < 1:
        raise ValueError("p must be >= 1")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise NumericError("non-finite entries in features or targets")
    return x, y, float(noise_var), p


def _spd_solve(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return cho_solve(cho_factor(a, lower=True), rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded upstream
        raise NumericError(f"SPD factorization failed: {exc}") from exc


def component_predictive(
    xl_train,
    xl_test,
    y: np.ndarray,
    noise_var: float,
    p: int | None = None,
    *,
    form: str = "auto",
) -> tuple[float, float]:
    """Predictive mean and variance of the output at one test feature vector.

    mean = p^-1 xt.X (p^-1 X.T X + noise_var I)^-1 y
    var  = noise_var + noise_var p^-1 xt.(p^-1 X X.T + noise_var I)^-1 xt

    ``form`` selects the linear system: ``"train"`` solves the n x n system,
    ``"weight"`` the p x p system, ``"auto"`` whichever is smaller.  Both
    forms are algebraically identical.
    """
    x, y, gv, p = _prep(xl_train, y, noise_var, p)
    xt = as_feature_array(xl_test).ravel()
    if xt.shape[0] != x.shape[0]:
        raise ValueError("xl_test must match the feature dimension of xl_train")
    if not np.all(np.isfinite(xt)):
        raise NumericError("non-finite entries in test features")
    n = y.shape[0]
    if form == "auto":
        form = "train" if n <= x.shape[0] else "weight"
    if form == "train":
        a = x.T @ x / p + gv * np.eye(n)
        b = x.T @ xt
        sol = _spd_solve(a, np.column_stack([y, b]))
        mean = float(b @ sol[:, 0]) / p
        var = gv + (float(xt @ xt) - float(b @ sol[:, 1]) / p) / p
    elif form == "weight":
        m = x @ x.T / p + gv * np.eye(x.shape[0])
        sol = _spd_solve(m, np.column_stack([x @ y, xt]))
        mean = float(xt @ sol[:, 0]) / p
        var = gv + gv * float(xt @ sol[:, 1]) / p
    else:
        raise ValueError(f"unknown form {form!r}")
    return mean, var


def final_layer_posterior(
    xl_train, y: np.ndarray, noise_var: float, p: int | None = None
) -> FinalLayerPosterior:
    """Conjugate Gaussian posterior over the final-layer weights.

    covariance = (p I + noise_var^-1 X X.T)^-1,
    mean = noise_var^-1 covariance X y.
    """
    x, y, gv, p = _prep(xl_train, y, noise_var, p)
    prec = p * np.eye(x.shape[0]) + (x @ x.T) / gv
    cov = _spd_solve(prec, np.eye(x.shape[0]))
    mean = _spd_solve(prec, x @ y) / gv
    return FinalLayerPosterior(mean=mean, covariance=cov)


def log_marginal_likelihood(
    xl_train, y: np.ndarray, noise_var: float, p: int | None = None
) -> float:
    """Log density of ``y`` under N(0, p^-1 X.T X + noise_var I), dense form."""
    x, y, gv, p = _prep(xl_train, y, noise_var, p)
    n = y.shape[0]
    a = x.T @ x / p + gv * np.eye(n)
    try:
        chol, lower = cho_factor(a, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericError(f"SPD factorization failed: {exc}") from exc
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    quad = float(y @ cho_solve((chol, lower), y))
    return -0.5 * (n * LOG_2PI + logdet + quad)


def spectral_terms(
    xl_train, y: np.ndarray, noise_var: float, p: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of p^-1 X.T X and squared target projections, both length n.

    The SVD of X/sqrt(p) supplies a complete orthonormal basis q_1..q_n of
    target space; directions beyond the rank carry zero eigenvalue.
    """
    x, y, gv, p = _prep(xl_train, y, noise_var, p)
    n = y.shape[0]
    full = x.shape[0] < n
    _, s, vt = np.linalg.svd(x / np.sqrt(p), full_matrices=full)
    lam = np.zeros(n)
    lam[: s.shape[0]] = s**2
    qty = np.zeros(n)
    proj = vt @ y
    qty[: proj.shape[0]] = proj**2
    return lam, qty


def log_marginal_likelihood_spectral(
    xl_train, y: np.ndarray, noise_var: float, p: int | None = None
) -> float:
    """Spectral form of :func:`log_marginal_likelihood`.

    With eigenvalues lam_k of p^-1 X.T X and projections q_k.y, the log
    density is -1/2 sum_k [log 2pi + log(lam_k + noise_var)
    + (q_k.y)^2 / (lam_k + noise_var)].
    """
    lam, qty = spectral_terms(xl_train, y, noise_var, p)
    gv = float(noise_var)
    return -0.5 * float(np.sum(LOG_2PI + np.log(lam + gv) + qty / (lam + gv)))


def log_marginal_likelihood_from_gram(
    gram: np.ndarray, y: np.ndarray, noise_var: float
) -> float:
    """Log density of ``y`` under N(0, gram + noise_var I).

    ``gram`` is the width-normalized feature product p^-1 X.T X; tiny negative
    eigenvalues from round-off are clipped to zero.
    """
    g = np.asarray(gram, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if g.shape != (y.shape[0], y.shape[0]):
        raise ValueError("gram must be n x n for a length-n target vector")
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(y))):
        raise NumericError("non-finite entries in gram or targets")
    gv = float(noise_var)
    lam, q = np.linalg.eigh(0.5 * (g + g.T))
    lam = np.maximum(lam, 0.0)
    qty = (q.T @ y) ** 2
    return -0.5 * float(np.sum(LOG_2PI + np.log(lam + gv) + qty / (lam + gv)))


def evaluate_component(
    xl_train,
    xl_test,
    y: np.ndarray,
    noise_var: float,
    p: int | None = None,
    candidate_index: int | None = None,
) -> ComponentPosterior:
    """Bundle predictive moments and log marginal likelihood for one candidate."""
    mean, var = component_predictive(xl_train, xl_test, y, noise_var, p)
    logml = log_marginal_likelihood(xl_train, y, noise_var, p)
    return ComponentPosterior(
        pred_mean=mean,
        pred_var=var,
        log_marginal=logml,
        candidate_index=candidate_index,
    )


def batched_component_stats(
    feats_train: np.ndarray,
    feats_test: np.ndarray,
    y: np.ndarray,
    noise_var: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Log marginals and predictive moments for a stack of candidates.

    Parameters
    ----------
    feats_train : ndarray, shape (J, p, n)
    feats_test : ndarray, shape (J, p, m)
    y : ndarray, shape (n,)

    Returns
    -------
    (log_marginals (J,), means (J, m), variances (J, m))

    Same math as the scalar functions, vectorized over candidates; the n x n
    or p x p system is chosen once per batch by min(n, p).
    """
    x = np.asarray(feats_train, dtype=float)
    xt = np.asarray(feats_test, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    j, p, n = x.shape
    gv = float(noise_var)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xt))):
        bad = np.where(~np.all(np.isfinite(x), axis=(1, 2)))[0]
        bad = bad if bad.size else np.where(~np.all(np.isfinite(xt), axis=(1, 2)))[0]
        raise NumericError(f"non-finite features (candidate {bad[0]})")
    try:
        if n <= p:
            a = np.matmul(x.transpose(0, 2, 1), x) / p
            a[:, np.arange(n), np.arange(n)] += gv
            chol = np.linalg.cholesky(a)
            logdet = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2)), axis=1)
            b = np.matmul(x.transpose(0, 2, 1), xt)
            rhs = np.concatenate(
                [np.broadcast_to(y[None, :, None], (j, n, 1)), b], axis=2
            )
            sol = np.linalg.solve(a, rhs)
            u, v = sol[:, :, 0], sol[:, :, 1:]
            logml = -0.5 * (n * LOG_2PI + logdet + u @ y)
            means = np.einsum("jnm,jn->jm", b, u) / p
            variances = gv + (
                np.sum(xt**2, axis=1) - np.einsum("jnm,jnm->jm", b, v) / p
            ) / p
        else:
            m_mat = np.matmul(x, x.transpose(0, 2, 1)) / p
            m_mat[:, np.arange(p), np.arange(p)] += gv
            chol = np.linalg.cholesky(m_mat)
            logdet = 2.0 * np.sum(
                np.log(np.diagonal(chol, axis1=1, axis2=2)), axis=1
            ) + (n - p) * np.log(gv)
            cy = np.matmul(x, y)
            rhs = np.concatenate([cy[:, :, None], xt], axis=2)
            sol = np.linalg.solve(m_mat, rhs)
            u, v = sol[:, :, 0], sol[:, :, 1:]
            quad = (float(y @ y) - np.einsum("jp,jp->j", cy, u) / p) / gv
            logml = -0.5 * (n * LOG_2PI + logdet + quad)
            means = np.einsum("jpm,jp->jm", xt, u) / p
            variances = gv + gv * np.einsum("jpm,jpm->jm", xt, v) / p
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"batched SPD factorization failed: {exc}") from exc
    return logml, means, variances
