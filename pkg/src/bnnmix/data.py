"""Domain types, synthetic data generation, and CSV serialization.

Conventions: training inputs are stored column-wise (``x1`` is ``d x n``,
one column per sample) and targets are a length-``n`` vector.  All container
types are frozen dataclasses holding read-only arrays, so instances can be
shared freely across threads.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import stream

MASS_TOL = 1e-12

# Prior variance scale c such that a ReLU feature relu(theta.x) of a standard
# Gaussian input has unit variance when theta has iid N(0, c/d) entries:
# Var relu(z) = c (pi - 1) / (2 pi) for z ~ N(0, c).
RELU_UNIT_VARIANCE_SCALE = 2.0 * np.pi / (np.pi - 1.0)


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


def _require_finite(a: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must contain only finite values")


class Activation(str, enum.Enum):
    RELU = "relu"
    IDENTITY = "identity"

    @classmethod
    def coerce(cls, value: "Activation | str") -> "Activation":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown activation {value!r}; expected one of "
                f"{[m.value for m in cls]}"
            ) from None


@dataclass(frozen=True)
class Dataset:
    """Training inputs (columns are samples), targets, and noise level.

    ``y`` is normally a length-``n`` vector; an ``n x K`` one-hot matrix is
    accepted for multi-class classification use.
    """

    x1: np.ndarray
    y: np.ndarray
    noise_var: float
    seed: int | None = None
    generator: str | None = None

    def __post_init__(self):
        x1 = _frozen(np.atleast_2d(self.x1))
        y = _frozen(self.y)
        if x1.ndim != 2 or x1.shape[0] < 1 or x1.shape[1] < 1:
            raise ValueError("x1 must be a d x n matrix with d, n >= 1")
        if y.ndim not in (1, 2) or y.shape[0] != x1.shape[1]:
            raise ValueError("y must have one entry (or one-hot row) per sample")
        if not self.noise_var > 0:
            raise ValueError("noise_var must be positive")
        _require_finite(x1, "x1")
        _require_finite(y, "y")
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "noise_var", float(self.noise_var))

    @property
    def d(self) -> int:
        return self.x1.shape[0]

    @property
    def n(self) -> int:
        return self.x1.shape[1]


@dataclass(frozen=True)
class NetworkShape:
    """Layer widths ``[d, ..., p]`` plus the activation applied at each layer."""

    widths: tuple[int, ...]
    activation: Activation = Activation.RELU

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 2:
            raise ValueError("widths must list at least input and feature layer")
        if any(w < 1 for w in widths):
            raise ValueError("all widths must be >= 1")
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "activation", Activation.coerce(self.activation))

    @property
    def d(self) -> int:
        return self.widths[0]

    @property
    def p(self) -> int:
        return self.widths[-1]

    @property
    def n_layers(self) -> int:
        return len(self.widths)


@dataclass(frozen=True)
class ThetaCandidate:
    """Interior weights and biases for layers 1..L-1, plus log prior mass."""

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    log_prior_mass: float = 0.0

    def __post_init__(self):
        if len(self.layers) < 1:
            raise ValueError("candidate needs at least one interior layer")
        frozen_layers = []
        prev_out = None
        for i, (w, b) in enumerate(self.layers):
            w = _frozen(np.atleast_2d(w))
            b = _frozen(np.atleast_1d(b))
            if w.ndim != 2 or b.ndim != 1 or b.shape[0] != w.shape[1]:
                raise ValueError(f"layer {i}: weights must be 2-d with bias per output")
            if prev_out is not None and w.shape[0] != prev_out:
                raise ValueError(f"layer {i}: input width {w.shape[0]} does not chain")
            _require_finite(w, f"layer {i} weights")
            _require_finite(b, f"layer {i} bias")
            prev_out = w.shape[1]
            frozen_layers.append((w, b))
        lpm = float(self.log_prior_mass)
        if not (np.isfinite(lpm) and lpm <= 0.0):
            raise ValueError("log_prior_mass must be finite and <= 0")
        object.__setattr__(self, "layers", tuple(frozen_layers))
        object.__setattr__(self, "log_prior_mass", lpm)

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.layers[0][0].shape[0],) + tuple(w.shape[1] for w, _ in self.layers)

    def chains_with(self, shape: NetworkShape) -> bool:
        return self.widths == shape.widths


@dataclass(frozen=True)
class CandidateSet:
    """A finite family of interior-weight candidates whose prior masses sum to 1."""

    candidates: tuple[ThetaCandidate, ...]

    def __post_init__(self):
        cands = tuple(self.candidates)
        if len(cands) < 1:
            raise ValueError("candidate set must be non-empty")
        total = np.sum(np.exp([c.log_prior_mass for c in cands]))
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"prior masses must sum to 1, got {total!r}")
        object.__setattr__(self, "candidates", cands)

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    def __getitem__(self, j: int) -> ThetaCandidate:
        return self.candidates[j]

    @property
    def log_prior_masses(self) -> np.ndarray:
        return np.array([c.log_prior_mass for c in self.candidates])


@dataclass(frozen=True)
class TestPoint:
    """A single input location at which the predictive is evaluated."""

    __test__ = False  # not a pytest class

    x1_tilde: np.ndarray
    index: int | None = field(default=None, compare=False)

    def __post_init__(self):
        v = _frozen(np.atleast_1d(self.x1_tilde))
        if v.ndim != 1 or v.shape[0] < 1:
            raise ValueError("x1_tilde must be a vector")
        _require_finite(v, "x1_tilde")
        object.__setattr__(self, "x1_tilde", v)

    @property
    def d(self) -> int:
        return self.x1_tilde.shape[0]


def _standardize(y: np.ndarray) -> np.ndarray:
    # Divide by the population (1/n) standard deviation; the mean is kept so
    # that y.y is unchanged up to the single scale factor.
    sd = float(np.std(y))
    if sd == 0.0:
        raise ValueError("cannot variance-standardize a constant target vector")
    return y / sd


def generate_dataset(
    d: int,
    n: int,
    noise_var: float,
    generator: str = "standard_gaussian_y",
    seed: int = 0,
) -> Dataset:
    """Draw a synthetic regression dataset with exactly unit target variance.

    Parameters
    ----------
    d, n : int
        Input dimension and sample count.
    noise_var : float
        Observation noise variance attached to the dataset.
    generator : str
        ``"standard_gaussian_y"`` draws targets iid N(0, 1) and rescales them
        to unit empirical variance.  ``"teacher_network"`` evaluates a fixed
        random two-layer ReLU network on the inputs, adds N(0, noise_var)
        noise, and rescales.
    seed : int
        Master seed; inputs, targets, and the teacher use separate streams.
    """
    if d < 1 or n < 1:
        raise ValueError("d and n must be >= 1")
    if not noise_var > 0:
        raise ValueError("noise_var must be positive")
    x1 = stream(seed, "dataset_inputs").standard_normal((d, n))
    if generator == "standard_gaussian_y":
        y = stream(seed, "dataset_targets").standard_normal(n)
    elif generator == "teacher_network":
        rng = stream(seed, "dataset_teacher")
        hidden = 64
        w1 = rng.normal(scale=1.0 / np.sqrt(d), size=(d, hidden))
        w2 = rng.normal(scale=1.0 / np.sqrt(hidden), size=hidden)
        y = np.maximum(w1.T @ x1, 0.0).T @ w2
        y = y + stream(seed, "dataset_noise").normal(scale=np.sqrt(noise_var), size=n)
    else:
        raise ValueError(f"unknown generator {generator!r}")
    return Dataset(
        x1=x1, y=_standardize(y), noise_var=noise_var, seed=seed, generator=generator
    )


def generate_test_points(d: int, m: int, seed: int = 0) -> list[TestPoint]:
    """Draw ``m`` iid standard-Gaussian test inputs of dimension ``d``.

    Each point has its own stream keyed by its index, so the i-th point does
    not depend on ``m``.
    """
    if d < 1 or m < 1:
        raise ValueError("d and m must be >= 1")
    return [
        TestPoint(stream(seed, "test_point", i).standard_normal(d), index=i)
        for i in range(m)
    ]


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _write_matrix_csv(path: Path, a: np.ndarray) -> None:
    a = np.atleast_2d(a)
    with open(path, "w", newline="\n") as fh:
        for row in a:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _read_matrix_csv(path: Path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    return np.array(rows)


def save_dataset(dataset: Dataset, directory: str | Path) -> None:
    """Write ``x1.csv`` (d x n), ``y.csv`` (n x 1), and ``meta.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_matrix_csv(directory / "x1.csv", dataset.x1)
    _write_matrix_csv(directory / "y.csv", np.atleast_2d(dataset.y).T)
    meta = {
        "d": dataset.d,
        "n": dataset.n,
        "noise_var": dataset.noise_var,
        "seed": dataset.seed,
        "generator": dataset.generator,
    }
    with open(directory / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(directory: str | Path) -> Dataset:
    directory = Path(directory)
    with open(directory / "meta.json") as fh:
        meta = json.load(fh)
    x1 = _read_matrix_csv(directory / "x1.csv")
    y = _read_matrix_csv(directory / "y.csv")
    return Dataset(
        x1=x1,
        y=y[:, 0] if y.shape[1] == 1 else y,
        noise_var=meta["noise_var"],
        seed=meta.get("seed"),
        generator=meta.get("generator"),
    )


def save_candidate_set(candidates: CandidateSet, directory: str | Path) -> None:
    """Write one CSV per candidate layer plus ``masses.csv``.

    A layer CSV holds the weight matrix with the bias appended as a final row.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for j, cand in enumerate(candidates):
        for ell, (w, b) in enumerate(cand.layers):
            block = np.vstack([w, b[None, :]])
            _write_matrix_csv(directory / f"candidate_{j:05d}_layer_{ell}.csv", block)
    _write_matrix_csv(
        directory / "masses.csv",
        np.atleast_2d([c.log_prior_mass for c in candidates]).T,
    )
    meta = {
        "j_count": len(candidates),
        "n_layers": len(candidates[0].layers),
        "widths": list(candidates[0].widths),
    }
    with open(directory / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_candidate_set(directory: str | Path) -> CandidateSet:
    directory = Path(directory)
    with open(directory / "meta.json") as fh:
        meta = json.load(fh)
    masses = _read_matrix_csv(directory / "masses.csv")[:, 0]
    cands = []
    for j in range(meta["j_count"]):
        layers = []
        for ell in range(meta["n_layers"]):
            block = _read_matrix_csv(directory / f"candidate_{j:05d}_layer_{ell}.csv")
            layers.append((block[:-1], block[-1]))
        cands.append(ThetaCandidate(layers=tuple(layers), log_prior_mass=masses[j]))
    return CandidateSet(tuple(cands))
