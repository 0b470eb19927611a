"""Candidate construction: Gaussian sampling and high-evidence classes.

Two families of interior-weight candidates are provided.  The first draws
entries iid from a zero-mean Gaussian (a discretized Gaussian prior).  The
second builds, for two-layer ReLU networks, an equivalence class of
candidates that all map to the evidence-maximizing feature Gram subject to
elementwise-nonnegative features: the class combines nonnegativity-preserving
rotations of the feature matrix, samples of the ReLU preimage, and samples of
the solution space of the first-layer equation.

Gram targets follow the width-normalized convention: ``target.gram`` is the
value of ``X.T X / p`` for the feature matrix ``X`` of a realizing candidate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import (
    RELU_UNIT_VARIANCE_SCALE,
    CandidateSet,
    Dataset,
    NetworkShape,
    ThetaCandidate,
)
from .errors import InfeasibleError, NumericError
from .features import FeatureMatrix, as_feature_array
from .rng import stream

RANK_TOL = 1e-10
GRAM_TOL = 1e-12


@dataclass(frozen=True)
class GaussianPriorSpec:
    """Entrywise-Gaussian prior on interior weights, variance ``scale / d_in``."""

    variance_scale: float = RELU_UNIT_VARIANCE_SCALE

    def __post_init__(self):
        if not self.variance_scale > 0:
            raise ValueError("variance_scale must be positive")


@dataclass(frozen=True)
class GramTarget:
    """A symmetric PSD target for the width-normalized feature Gram."""

    gram: np.ndarray
    scale_factor: float

    def __post_init__(self):
        g = np.array(self.gram, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("gram must be square")
        if np.max(np.abs(g - g.T)) > 1e-12:
            raise ValueError("gram must be symmetric within 1e-12")
        if np.min(np.linalg.eigvalsh(0.5 * (g + g.T))) < -1e-10:
            raise ValueError("gram must be PSD up to round-off")
        g.flags.writeable = False
        object.__setattr__(self, "gram", g)
        object.__setattr__(self, "scale_factor", float(self.scale_factor))

    @property
    def n(self) -> int:
        return self.gram.shape[0]


@dataclass(frozen=True)
class EquivalenceClassSpec:
    """Sample counts and noise scales for the equivalence-class generator."""

    n_rotations: int = 10
    n_preimage: int = 10
    n_colspace: int = 10
    preimage_scale: float = float(np.sqrt(RELU_UNIT_VARIANCE_SCALE))
    colspace_scale: float = float(np.sqrt(RELU_UNIT_VARIANCE_SCALE))

    def __post_init__(self):
        if min(self.n_rotations, self.n_preimage, self.n_colspace) < 1:
            raise ValueError("all sample counts must be >= 1")
        if self.preimage_scale < 0 or self.colspace_scale < 0:
            raise ValueError("scales must be nonnegative")

    @property
    def j_count(self) -> int:
        return self.n_rotations * self.n_preimage * self.n_colspace


def sample_gaussian_candidates(
    shape: NetworkShape,
    j_count: int,
    prior: GaussianPriorSpec | None = None,
    seed: int = 0,
) -> CandidateSet:
    """Draw candidates with iid N(0, scale/d_in) weights and zero biases.

    Each layer's entry variance is the prior scale divided by that layer's
    input width.  Candidate ``j`` draws from its own stream, so the set is
    reproducible independently of chunking or parallelism.
    """
    if j_count < 1:
        raise ValueError("j_count must be >= 1")
    prior = prior or GaussianPriorSpec()
    log_mass = -np.log(j_count)
    widths = shape.widths
    cands = []
    for j in range(j_count):
        rng = stream(seed, "gaussian_theta", j)
        layers = tuple(
            (
                rng.normal(
                    scale=np.sqrt(prior.variance_scale / widths[ell]),
                    size=(widths[ell], widths[ell + 1]),
                ),
                np.zeros(widths[ell + 1]),
            )
            for ell in range(len(widths) - 1)
        )
        cands.append(ThetaCandidate(layers=layers, log_prior_mass=log_mass))
    return CandidateSet(tuple(cands))


def _check_target_feasible(y: np.ndarray, noise_var: float) -> tuple[np.ndarray, float]:
    y = np.asarray(y, dtype=float).ravel()
    yty = float(y @ y)
    if not yty > noise_var:
        raise InfeasibleError(
            f"y.y = {yty!r} must exceed noise_var = {noise_var!r} for a "
            "well-defined evidence maximizer"
        )
    return y, 1.0 - noise_var / yty


def optimal_gram(y: np.ndarray, noise_var: float) -> GramTarget:
    """Unconstrained evidence-maximizing Gram: rank-one outer(y, y) scaled.

    The maximizer of the log marginal likelihood over feature Grams is
    ``y y.T (1 - noise_var / y.y)``; it is unique when ``y.y > noise_var``.
    """
    y, s = _check_target_feasible(y, noise_var)
    return GramTarget(gram=np.outer(y, y) * s, scale_factor=s)


def _sign_split_gram(y: np.ndarray, s: float) -> np.ndarray:
    # relu(outer(y, y)) == outer(relu(y), relu(y)) + outer(relu(-y), relu(-y))
    # exactly (entrywise sign case analysis), so the result is PSD of rank <= 2.
    pos = np.maximum(y, 0.0)
    neg = np.maximum(-y, 0.0)
    split = np.outer(pos, pos) + np.outer(neg, neg)
    direct = np.maximum(np.outer(y, y), 0.0)
    if not np.array_equal(split, direct):  # pragma: no cover - identity is exact
        raise NumericError("sign-split identity violated")
    return split * s


def relu_optimal_gram(y: np.ndarray, noise_var: float) -> GramTarget:
    """Evidence-maximizing Gram under elementwise-nonnegative features.

    Applies ReLU entrywise to the rank-one maximizer, which by the sign-split
    identity is PSD of rank at most 2 and realizable by nonnegative features.
    """
    y, s = _check_target_feasible(y, noise_var)
    return GramTarget(gram=_sign_split_gram(y, s), scale_factor=s)


def project_onto_row_space(x1: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Orthogonal projection of ``y`` onto the row space of the input matrix.

    The rows of any achievable first-layer pre-activation are combinations of
    the rows of ``x1``, so this is the component of ``y`` reachable by
    two-layer features.  Rank is determined at 1e-10 of the largest singular
    value.
    """
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if x1.shape[1] != y.shape[0]:
        raise ValueError("x1 must have one column per entry of y")
    if not np.any(x1):
        raise ValueError("x1 must be nonzero")
    _, sv, vt = np.linalg.svd(x1, full_matrices=False)
    keep = sv > RANK_TOL * sv[0]
    basis = vt[keep]
    return basis.T @ (basis @ y)


def projected_optimal_gram(
    x1: np.ndarray, y: np.ndarray, noise_var: float
) -> GramTarget:
    """Nonnegative evidence-target restricted to reachable directions.

    Projects ``y`` onto the row space of ``x1`` before the ReLU sign split;
    the scalar factor still uses the full ``y.y``.  When ``x1`` has rank
    ``n`` the projection is the identity and the result coincides with
    :func:`relu_optimal_gram`.
    """
    y, s = _check_target_feasible(y, noise_var)
    y_proj = project_onto_row_space(x1, y)
    return GramTarget(gram=_sign_split_gram(y_proj, s), scale_factor=s)


def factor_gram_nonneg(target: GramTarget, y: np.ndarray, p: int) -> FeatureMatrix:
    """Nonnegative ``p x n`` factor of a sign-split Gram target.

    Row 0 carries ``sqrt(s) relu(y)``, row 1 carries ``sqrt(s) relu(-y)``,
    remaining rows are zero; ``y`` is the (possibly projected) vector whose
    sign split generated the target.  The factor satisfies
    ``X.T X == target.gram`` to 1e-12.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != target.n:
        raise ValueError("y length must match the gram dimension")
    pos = np.maximum(y, 0.0)
    neg = np.maximum(-y, 0.0)
    mixed = bool(np.any(pos > 0) and np.any(neg > 0))
    if p < 1 or (mixed and p < 2):
        raise InfeasibleError(
            f"p = {p} rows cannot carry both sign parts of the target"
        )
    root = np.sqrt(target.scale_factor)
    xl = np.zeros((p, y.shape[0]))
    xl[0] = root * pos
    if p >= 2:
        xl[1] = root * neg
    elif np.any(neg > 0):  # pragma: no cover - excluded above
        raise InfeasibleError("negative part present but only one row available")
    residual = float(np.max(np.abs(xl.T @ xl - target.gram)))
    if residual > GRAM_TOL:
        raise NumericError(
            f"factor does not reproduce the gram target (residual {residual:.3e}); "
            "was the matching y passed?"
        )
    return FeatureMatrix(xl)


def rotate_row_pair(
    x: np.ndarray, active_row: int, zero_row: int, angle: float
) -> np.ndarray:
    """Apply one Givens rotation in the plane of an active and an all-zero row.

    For angles in [0, pi/2] both resulting rows are nonnegative whenever the
    active row is; at pi/2 the two rows swap contents.
    """
    if np.any(x[zero_row] != 0.0):
        raise ValueError("zero_row must be exactly all-zero")
    out = np.array(x, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    row = out[active_row].copy()
    out[active_row] = c * row - s * out[zero_row]
    out[zero_row] = s * row + c * out[zero_row]
    return out


def rotate_features(
    xl, n_samples: int, seed: int = 0, n_givens: int = 8
) -> list[FeatureMatrix]:
    """Gram-preserving, nonnegativity-preserving rotations of a feature matrix.

    Each sample composes up to ``n_givens`` random Givens rotations, each
    acting in the plane of one active row and one currently-all-zero row with
    an angle uniform in [0, pi/2].  Compositions that would leave entries
    below -1e-12 are resampled; entries above that are clamped to zero.
    """
    x = as_feature_array(xl)
    if np.any(x < 0):
        raise ValueError("feature matrix must be elementwise nonnegative")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not np.any(~x.any(axis=1)):
        raise InfeasibleError("rotations need at least one all-zero row")
    samples = []
    for i in range(n_samples):
        rng = stream(seed, "rotation", i)
        for _attempt in range(100):
            out = np.array(x)
            for _ in range(n_givens):
                zero_rows = np.flatnonzero(~out.any(axis=1))
                active_rows = np.flatnonzero(out.any(axis=1))
                if zero_rows.size == 0:
                    break
                out = rotate_row_pair(
                    out,
                    active_rows[rng.integers(active_rows.size)],
                    zero_rows[rng.integers(zero_rows.size)],
                    rng.uniform(0.0, np.pi / 2.0),
                )
            if np.min(out) >= -1e-12:
                out[out < 0] = 0.0
                samples.append(FeatureMatrix(out))
                break
        else:  # pragma: no cover - construction cannot go negative
            raise NumericError("could not find a nonnegative rotation composition")
    return samples


def sample_preimage(
    xl, n_samples: int, scale: float, seed: int = 0
) -> list[np.ndarray]:
    """Pre-activation matrices mapping to ``xl`` exactly under ReLU.

    Positive entries are their own unique preimage; zero entries receive
    independent draws ``-|N(0, scale^2)|``.  Sample ``i`` always uses stream
    ``i``, so preimage noise realizations are shared when called repeatedly
    with the same seed.
    """
    x = as_feature_array(xl)
    if np.any(x < 0):
        raise ValueError("feature matrix must be elementwise nonnegative")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    out = []
    for i in range(n_samples):
        rng = stream(seed, "preimage", i)
        free = -np.abs(rng.normal(scale=scale, size=x.shape)) if scale > 0 else np.zeros(x.shape)
        out.append(np.where(x > 0, x, free))
    return out


def sample_colspace_theta(
    x1: np.ndarray, z: np.ndarray, n_samples: int, scale: float, seed: int = 0
) -> list[ThetaCandidate]:
    """Two-layer interior weights solving ``theta.T x1 == z`` exactly.

    Uses the minimum-norm particular solution plus a Gaussian draw in the
    orthogonal complement of the column space of ``x1`` (entry variance
    ``scale^2 / d``).  Requires ``x1`` to have full column rank ``n``.
    """
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    z = np.atleast_2d(np.asarray(z, dtype=float))
    d, n = x1.shape
    if z.shape[1] != n:
        raise ValueError("z must have one column per training sample")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    u, sv, vt = np.linalg.svd(x1, full_matrices=False)
    rank = int(np.sum(sv > RANK_TOL * (sv[0] if sv.size else 0.0)))
    if rank < n:
        theta = x1 @ np.linalg.lstsq(x1.T @ x1, z.T, rcond=None)[0]
        res = float(np.max(np.abs(theta.T @ x1 - z)))
        raise InfeasibleError(
            f"x1 has rank {rank} < n = {n}; best least-squares residual {res:.3e}"
        )
    particular = u @ ((vt @ z.T) / sv[:, None])
    perp = np.eye(d) - u @ u.T
    out = []
    for i in range(n_samples):
        rng = stream(seed, "colspace", i)
        theta = particular
        if scale > 0:
            theta = particular + perp @ rng.normal(
                scale=scale / np.sqrt(d), size=(d, z.shape[0])
            )
        res = float(np.max(np.abs(theta.T @ x1 - z)))
        if res > 1e-8:
            raise NumericError(f"first-layer solve residual {res:.3e} exceeds 1e-8")
        out.append(
            ThetaCandidate(
                layers=((theta, np.zeros(z.shape[0])),), log_prior_mass=0.0
            )
        )
    return out


def build_equivalence_class(
    data: Dataset,
    shape: NetworkShape,
    spec: EquivalenceClassSpec | None = None,
    seed: int = 0,
) -> CandidateSet:
    """Cartesian product of rotations, preimages, and first-layer solutions.

    All members map to the nonnegative evidence-target Gram, hence share one
    marginal likelihood, while their predictions at new inputs differ.
    Candidate index order is rotation-major, then preimage, then column-space
    sample.  Requires a two-layer ReLU shape with ``n <= d`` and ``p >= 3``.
    """
    spec = spec or EquivalenceClassSpec()
    if shape.n_layers != 2:
        raise InfeasibleError("equivalence classes are built for two-layer shapes")
    if data.d != shape.d:
        raise ValueError("dataset dimension does not match shape")
    if data.y.ndim != 1:
        raise ValueError("equivalence classes require vector targets")
    if data.n > data.d:
        raise InfeasibleError(
            f"n = {data.n} > d = {data.d}: first-layer equation has no exact solution"
        )
    if shape.p < 3:
        raise InfeasibleError("p >= 3 required (two active rows plus one slack row)")
    target = relu_optimal_gram(data.y, data.noise_var)
    base = factor_gram_nonneg(target, data.y, shape.p)
    rotations = rotate_features(base, spec.n_rotations, seed=seed)
    log_mass = -np.log(spec.j_count)
    cands = []
    for rot in rotations:
        preimages = sample_preimage(rot, spec.n_preimage, spec.preimage_scale, seed=seed)
        for z in preimages:
            for theta in sample_colspace_theta(
                data.x1, z, spec.n_colspace, spec.colspace_scale, seed=seed
            ):
                cands.append(
                    ThetaCandidate(layers=theta.layers, log_prior_mass=log_mass)
                )
    return CandidateSet(tuple(cands))
