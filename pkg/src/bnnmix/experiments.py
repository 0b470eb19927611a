"""Experiment drivers: grid sweeps, CSV/JSON emission, reproducible seeds.

Every run is a pure function of (config, seed): output files carry the
config hash, floats are written with shortest round-trip formatting, and
cells draw from streams keyed by their coordinates, so reruns (serial or
threaded) are byte-identical.  Per-cell failures are recorded as rows with
an ``error`` column and do not abort the sweep.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .classify import binary_class_prob, multiclass_probs
from .construct import (
    EquivalenceClassSpec,
    GaussianPriorSpec,
    build_equivalence_class,
    factor_gram_nonneg,
    optimal_gram,
    project_onto_row_space,
    projected_optimal_gram,
    sample_gaussian_candidates,
)
from .data import Dataset, NetworkShape, generate_dataset, generate_test_points
from .errors import InfeasibleError, NumericError
from .mixture import (
    DEFAULT_WEIGHT_THRESHOLD,
    MixturePredictive,
    candidate_log_marginals,
    default_grid,
    local_mode_count,
    mixture_moments,
    mixture_weights,
    pdf_eval,
    posterior_predictive_batch,
    significant_component_count,
    _component_stats,
)
from .regression import (
    final_layer_posterior,
    log_marginal_likelihood_from_gram,
    log_marginal_likelihood_spectral,
)
from .rng import stream

DESK_RATIOS = (0.5, 0.8, 1.0, 1.2, 1.5, 2.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid and sampling settings shared by all experiment drivers."""

    d_list: tuple[int, ...] = (10, 50, 100)
    n_over_d: tuple[float, ...] = DESK_RATIOS
    p_over_d: tuple[float, ...] = DESK_RATIOS
    j_count: int = 2000
    noise_var_list: tuple[float, ...] = (0.01,)
    threshold: float = DEFAULT_WEIGHT_THRESHOLD
    n_test_points: int = 10
    n_y_realizations: int = 10
    seed: int = 0
    candidate_source: str = "gaussian"
    class_spec: EquivalenceClassSpec | None = None
    output_dir: str = "runs"
    # Driver-specific extras: variance scaling sweeps p relative to n, and
    # the classify demo bins targets into this many classes.
    p_over_n: tuple[float, ...] | None = None
    n_classes: int = 2
    grid_points: int = 512

    def __post_init__(self):
        object.__setattr__(self, "d_list", tuple(int(d) for d in self.d_list))
        object.__setattr__(self, "n_over_d", tuple(float(r) for r in self.n_over_d))
        object.__setattr__(self, "p_over_d", tuple(float(r) for r in self.p_over_d))
        object.__setattr__(
            self, "noise_var_list", tuple(float(v) for v in self.noise_var_list)
        )
        if self.p_over_n is not None:
            object.__setattr__(
                self, "p_over_n", tuple(float(r) for r in self.p_over_n)
            )
        for name in ("d_list", "n_over_d", "p_over_d", "noise_var_list"):
            values = getattr(self, name)
            if len(values) == 0 or any(v <= 0 for v in values):
                raise ValueError(f"{name} must be nonempty with positive entries")
        if self.j_count < 1 or self.n_test_points < 1 or self.n_y_realizations < 1:
            raise ValueError("counts must be >= 1")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")
        if self.candidate_source not in ("gaussian", "equivalence_class"):
            raise ValueError(f"unknown candidate_source {self.candidate_source!r}")
        if self.grid_points < 3:
            raise ValueError("grid_points must be >= 3")

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.class_spec is not None:
            out["class_spec"] = asdict(self.class_spec)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        if raw.get("class_spec") is not None:
            raw["class_spec"] = EquivalenceClassSpec(**raw["class_spec"])
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def hash(self) -> str:
        """Hash of the run-defining settings (the output path is excluded)."""
        payload = self.to_dict()
        payload.pop("output_dir")
        canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _cell_seed(master_seed: int, tag: str) -> int:
    digest = hashlib.blake2s(
        f"{master_seed}:{tag}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


def _fmt(value) -> str:
    if isinstance(value, float) or isinstance(value, np.floating):
        return repr(float(value))
    return "" if value is None else str(value)


def write_table(
    path: Path, columns: list[str], rows: list[dict], config_hash: str
) -> None:
    """Long-format CSV with a config-hash comment line and stable columns."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# config_sha256={config_hash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])


def read_table(path: str | Path) -> list[dict]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _write_metadata(out: Path, cfg: ExperimentConfig, experiment: str) -> None:
    payload = cfg.to_dict()
    payload.pop("output_dir")
    meta = {"experiment": experiment, "config": payload, "config_sha256": cfg.hash()}
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{experiment}.meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _map_cells(worker, cells, threads: int):
    if threads <= 1:
        return [worker(c) for c in cells]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, cells))


@dataclass
class RunResult:
    rows: list[dict]
    n_errors: int
    files: list[Path] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Heatmap: significant-component counts, mixture variance, evidence spread
# ---------------------------------------------------------------------------

HEATMAP_COLUMNS = [
    "d", "n", "p", "noise_var",
    "n_significant", "log10_n_significant", "mixture_variance", "logl_spread",
    "error",
]


def run_heatmap(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    """Mode-count phase diagram over the (d, n/d, p/d, noise) grid.

    Per cell: draw a dataset and Gaussian candidates, evaluate the mixture at
    one test point, and record the significant-component count, the mixture
    variance, and the standard deviation of the per-candidate scaled
    log evidence.
    """
    if cfg.candidate_source != "gaussian":
        raise ValueError("heatmap runs use gaussian candidates")
    cells = [
        (d, rn, rp, nv)
        for d in cfg.d_list
        for rn in cfg.n_over_d
        for rp in cfg.p_over_d
        for nv in cfg.noise_var_list
    ]

    def worker(cell):
        d, rn, rp, nv = cell
        n, p = max(1, round(rn * d)), max(1, round(rp * d))
        row = {"d": d, "n": n, "p": p, "noise_var": nv, "error": None}
        tag = f"heatmap:d={d}:n={n}:p={p}:nv={nv!r}"
        try:
            data = generate_dataset(d, n, nv, seed=_cell_seed(cfg.seed, tag))
            shape = NetworkShape((d, p))
            cands = sample_gaussian_candidates(
                shape, cfg.j_count, GaussianPriorSpec(), seed=_cell_seed(cfg.seed, tag)
            )
            test = generate_test_points(d, 1, seed=_cell_seed(cfg.seed, tag))[0]
            logml, means, variances = _component_stats(
                cands, data, test.x1_tilde[:, None], shape
            )
            weights = mixture_weights(logml, cands.log_prior_masses)
            mix = MixturePredictive(weights, means[:, 0], np.sqrt(variances[:, 0]))
            count = significant_component_count(mix, cfg.threshold)
            row["n_significant"] = count
            row["log10_n_significant"] = float(np.log10(max(count, 1)))
            row["mixture_variance"] = mixture_moments(mix)[1]
            row["logl_spread"] = float(np.std(logml / n))
        except (NumericError, InfeasibleError, ValueError) as exc:
            row["error"] = str(exc)
        return row

    rows = _map_cells(worker, cells, threads)
    out = Path(cfg.output_dir)
    _write_metadata(out, cfg, "heatmap")
    path = out / "heatmap.csv"
    write_table(path, HEATMAP_COLUMNS, rows, cfg.hash())
    return RunResult(rows, sum(r["error"] is not None for r in rows), [path])


# ---------------------------------------------------------------------------
# Density dumps: per-cell grids, mixture pdf, and component tables
# ---------------------------------------------------------------------------

PDF_SUMMARY_COLUMNS = [
    "d", "n", "p", "noise_var", "test_point",
    "n_significant", "n_local_modes", "mixture_mean", "mixture_variance",
    "error",
]


def _cell_candidates(cfg: ExperimentConfig, data: Dataset, shape: NetworkShape, tag: str):
    if cfg.candidate_source == "equivalence_class":
        return build_equivalence_class(
            data, shape, cfg.class_spec or EquivalenceClassSpec(),
            seed=_cell_seed(cfg.seed, tag),
        )
    return sample_gaussian_candidates(
        shape, cfg.j_count, GaussianPriorSpec(), seed=_cell_seed(cfg.seed, tag)
    )


def run_pdf_dump(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    """Emit density grids and component tables for every cell and test point."""
    cells = [
        (d, rn, rp, nv)
        for d in cfg.d_list
        for rn in cfg.n_over_d
        for rp in cfg.p_over_d
        for nv in cfg.noise_var_list
    ]
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    def worker(cell):
        d, rn, rp, nv = cell
        n, p = max(1, round(rn * d)), max(1, round(rp * d))
        tag = f"pdf:d={d}:n={n}:p={p}:nv={nv!r}"
        base = {"d": d, "n": n, "p": p, "noise_var": nv}
        try:
            data = generate_dataset(d, n, nv, seed=_cell_seed(cfg.seed, tag))
            shape = NetworkShape((d, p))
            cands = _cell_candidates(cfg, data, shape, tag)
            tests = generate_test_points(
                d, cfg.n_test_points, seed=_cell_seed(cfg.seed, tag)
            )
            mixes = posterior_predictive_batch(cands, data, tests, shape)
        except (NumericError, InfeasibleError, ValueError) as exc:
            return [dict(base, test_point=None, error=str(exc))], []
        rows, files = [], []
        cell_id = f"d{d}_n{n}_p{p}_nv{nv!r}"
        for t, mix in enumerate(mixes):
            grid = default_grid(mix, cfg.grid_points)
            density = pdf_eval(mix, grid)
            pdf_path = out / f"pdf_{cell_id}_t{t}.csv"
            with open(pdf_path, "w", newline="\n") as fh:
                fh.write(f"# config_sha256={cfg.hash()}\n")
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["grid", "density"])
                for g, v in zip(grid, density):
                    writer.writerow([repr(float(g)), repr(float(v))])
            comp_path = out / f"components_{cell_id}_t{t}.csv"
            with open(comp_path, "w", newline="\n") as fh:
                fh.write(f"# config_sha256={cfg.hash()}\n")
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
            mean, var = mixture_moments(mix)
            rows.append(
                dict(
                    base,
                    test_point=t,
                    n_significant=significant_component_count(mix, cfg.threshold),
                    n_local_modes=local_mode_count(mix, cfg.grid_points),
                    mixture_mean=mean,
                    mixture_variance=var,
                    error=None,
                )
            )
            files.extend([pdf_path, comp_path])
        return rows, files

    results = _map_cells(worker, cells, threads)
    rows = [r for rs, _ in results for r in rs]
    files = [f for _, fs in results for f in fs]
    _write_metadata(out, cfg, "pdf_dump")
    path = out / "pdf_summary.csv"
    write_table(path, PDF_SUMMARY_COLUMNS, rows, cfg.hash())
    return RunResult(rows, sum(r.get("error") is not None for r in rows), files + [path])


# ---------------------------------------------------------------------------
# Variance scaling: predictive spread under proportional growth
# ---------------------------------------------------------------------------

VARIANCE_COLUMNS = [
    "d", "n", "p", "p_over_n", "noise_var",
    "mean_median_variance", "stderr_median_variance", "n_realizations",
    "error",
]


def run_variance_scaling(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    """Scale of the predictive under proportional (n, p, d) growth.

    For each (d, p/n) with n/d fixed by the first ``n_over_d`` entry: over
    ``n_y_realizations`` datasets, take the median mixture variance across
    ``n_test_points`` test points, then report the mean and standard error of
    that median across realizations.
    """
    if cfg.candidate_source != "equivalence_class":
        raise ValueError("variance scaling runs use equivalence-class candidates")
    n_over_d = cfg.n_over_d[0]
    ratios = cfg.p_over_n or tuple(rp / n_over_d for rp in cfg.p_over_d)
    nv = cfg.noise_var_list[0]
    cells = [(d, pn) for d in cfg.d_list for pn in ratios]

    def worker(cell):
        d, pn = cell
        n = max(1, round(n_over_d * d))
        p = max(3, round(pn * n))
        row = {"d": d, "n": n, "p": p, "p_over_n": pn, "noise_var": nv, "error": None}
        if n > d:
            row["error"] = f"infeasible: n = {n} > d = {d}"
            return row
        tag = f"varscale:d={d}:n={n}:p={p}:nv={nv!r}"
        try:
            medians = []
            for r in range(cfg.n_y_realizations):
                data = generate_dataset(
                    d, n, nv, seed=_cell_seed(cfg.seed, f"{tag}:data:{r}")
                )
                shape = NetworkShape((d, p))
                cands = build_equivalence_class(
                    data, shape, cfg.class_spec or EquivalenceClassSpec(),
                    seed=_cell_seed(cfg.seed, f"{tag}:class:{r}"),
                )
                tests = generate_test_points(
                    d, cfg.n_test_points, seed=_cell_seed(cfg.seed, f"{tag}:test:{r}")
                )
                mixes = posterior_predictive_batch(cands, data, tests, shape)
                medians.append(
                    float(np.median([mixture_moments(m)[1] for m in mixes]))
                )
            medians = np.array(medians)
            row["mean_median_variance"] = float(np.mean(medians))
            row["stderr_median_variance"] = float(
                np.std(medians, ddof=1) / np.sqrt(len(medians))
            ) if len(medians) > 1 else 0.0
            row["n_realizations"] = len(medians)
        except (NumericError, InfeasibleError, ValueError) as exc:
            row["error"] = str(exc)
        return row

    rows = _map_cells(worker, cells, threads)
    out = Path(cfg.output_dir)
    _write_metadata(out, cfg, "variance_scaling")
    path = out / "variance_scaling.csv"
    write_table(path, VARIANCE_COLUMNS, rows, cfg.hash())
    return RunResult(rows, sum(r["error"] is not None for r in rows), [path])


# ---------------------------------------------------------------------------
# Optimality gap: constructed evidence target vs empirical Gaussian maximum
# ---------------------------------------------------------------------------

GAP_COLUMNS = [
    "d", "n", "p", "noise_var",
    "conjectured_scaled_logl", "best_gaussian_scaled_logl",
    "unconstrained_bound_scaled_logl", "gap",
    "error",
]


def run_optimality_gap(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    """Scaled evidence at the projected nonnegative target minus the best
    Gaussian candidate, with the unconstrained bound alongside.

    The target evidence is evaluated with the spectral regression form on the
    factored features rescaled to the width-normalized convention.
    """
    if cfg.candidate_source != "gaussian":
        raise ValueError("optimality gap runs use gaussian candidates as baseline")
    cells = [
        (d, rn, rp, nv)
        for d in cfg.d_list
        for rn in cfg.n_over_d
        for rp in cfg.p_over_d
        for nv in cfg.noise_var_list
    ]

    def worker(cell):
        d, rn, rp, nv = cell
        n, p = max(1, round(rn * d)), max(2, round(rp * d))
        row = {"d": d, "n": n, "p": p, "noise_var": nv, "error": None}
        tag = f"gap:d={d}:n={n}:p={p}:nv={nv!r}"
        try:
            data = generate_dataset(d, n, nv, seed=_cell_seed(cfg.seed, tag))
            shape = NetworkShape((d, p))
            cands = sample_gaussian_candidates(
                shape, cfg.j_count, GaussianPriorSpec(), seed=_cell_seed(cfg.seed, tag)
            )
            best = float(np.max(candidate_log_marginals(cands, data, shape))) / n
            target = projected_optimal_gram(data.x1, data.y, nv)
            y_reach = project_onto_row_space(data.x1, data.y)
            feats = factor_gram_nonneg(target, y_reach, p).xl * np.sqrt(p)
            conj = log_marginal_likelihood_spectral(feats, data.y, nv, p) / n
            bound = (
                log_marginal_likelihood_from_gram(
                    optimal_gram(data.y, nv).gram, data.y, nv
                )
                / n
            )
            row.update(
                conjectured_scaled_logl=conj,
                best_gaussian_scaled_logl=best,
                unconstrained_bound_scaled_logl=bound,
                gap=conj - best,
            )
        except (NumericError, InfeasibleError, ValueError) as exc:
            row["error"] = str(exc)
        return row

    rows = _map_cells(worker, cells, threads)
    out = Path(cfg.output_dir)
    _write_metadata(out, cfg, "optimality_gap")
    path = out / "optimality_gap.csv"
    write_table(path, GAP_COLUMNS, rows, cfg.hash())
    return RunResult(rows, sum(r["error"] is not None for r in rows), [path])


# ---------------------------------------------------------------------------
# Prior comparison: constructed parameters vs Gaussian-prior draws
# ---------------------------------------------------------------------------

HIST_COLUMNS = ["bin_left", "bin_right", "count_constructed", "count_prior"]


def _histogram_pair(constructed, prior, n_bins=80):
    lo = min(float(np.min(constructed)), float(np.min(prior)))
    hi = max(float(np.max(constructed)), float(np.max(prior)))
    edges = np.linspace(lo, hi, n_bins + 1)
    hc, _ = np.histogram(constructed, bins=edges)
    hp, _ = np.histogram(prior, bins=edges)
    rows = [
        {
            "bin_left": edges[i],
            "bin_right": edges[i + 1],
            "count_constructed": int(hc[i]),
            "count_prior": int(hp[i]),
        }
        for i in range(n_bins)
    ]
    return rows


def run_prior_comparison(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    """Histogram constructed interior/final-layer parameters against prior draws.

    Uses the first grid cell.  Interior entries pool every class member; the
    final-layer comparison uses the posterior mean at the first member against
    draws from the N(0, 1/p) prior.
    """
    if cfg.candidate_source != "equivalence_class":
        raise ValueError("prior comparison runs use equivalence-class candidates")
    d = cfg.d_list[0]
    n = max(1, round(cfg.n_over_d[0] * d))
    p = max(3, round(cfg.p_over_d[0] * d))
    nv = cfg.noise_var_list[0]
    tag = f"priorcmp:d={d}:n={n}:p={p}:nv={nv!r}"
    data = generate_dataset(d, n, nv, seed=_cell_seed(cfg.seed, tag))
    shape = NetworkShape((d, p))
    cands = build_equivalence_class(
        data, shape, cfg.class_spec or EquivalenceClassSpec(),
        seed=_cell_seed(cfg.seed, tag),
    )
    theta_entries = np.concatenate([c.layers[0][0].ravel() for c in cands])
    prior_sd = float(np.sqrt(GaussianPriorSpec().variance_scale / d))
    prior_entries = stream(_cell_seed(cfg.seed, tag), "prior_theta").normal(
        scale=prior_sd, size=theta_entries.shape[0]
    )
    from .features import forward_features

    feats = forward_features(cands[0], data.x1, shape)
    w_mean = final_layer_posterior(feats, data.y, nv).mean
    w_prior = stream(_cell_seed(cfg.seed, tag), "prior_w").normal(
        scale=1.0 / np.sqrt(p), size=p
    )
    out = Path(cfg.output_dir)
    _write_metadata(out, cfg, "prior_comparison")
    theta_path = out / "prior_comparison_theta.csv"
    w_path = out / "prior_comparison_w.csv"
    write_table(
        theta_path, HIST_COLUMNS, _histogram_pair(theta_entries, prior_entries), cfg.hash()
    )
    write_table(w_path, HIST_COLUMNS, _histogram_pair(w_mean, w_prior), cfg.hash())
    summary = {
        "theta_sd_constructed": float(np.std(theta_entries)),
        "theta_sd_prior": float(np.std(prior_entries)),
        "w_sd_constructed": float(np.std(w_mean)),
        "w_sd_prior": float(np.std(w_prior)),
        "d": d, "n": n, "p": p, "noise_var": nv,
    }
    with open(out / "prior_comparison_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return RunResult([summary], 0, [theta_path, w_path])


# ---------------------------------------------------------------------------
# Single-cell drivers for the CLI
# ---------------------------------------------------------------------------

def run_predict(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    """Dump the mixture at the first grid cell and first test point."""
    d = cfg.d_list[0]
    n = max(1, round(cfg.n_over_d[0] * d))
    p = max(1, round(cfg.p_over_d[0] * d))
    nv = cfg.noise_var_list[0]
    tag = f"predict:d={d}:n={n}:p={p}:nv={nv!r}"
    data = generate_dataset(d, n, nv, seed=_cell_seed(cfg.seed, tag))
    shape = NetworkShape((d, p))
    cands = _cell_candidates(cfg, data, shape, tag)
    test = generate_test_points(d, 1, seed=_cell_seed(cfg.seed, tag))[0]
    mixes = posterior_predictive_batch(cands, data, [test], shape)
    mix = mixes[0]
    rows = [
        {
            "component": jj,
            "weight": mix.weights[jj],
            "mean": mix.means[jj],
            "sd": mix.sds[jj],
        }
        for jj in range(mix.n_components)
    ]
    out = Path(cfg.output_dir)
    _write_metadata(out, cfg, "predict")
    path = out / "mixture.csv"
    write_table(path, ["component", "weight", "mean", "sd"], rows, cfg.hash())
    return RunResult(rows, 0, [path])


CLASSIFY_COLUMNS = ["test_point", "class", "probability", "error"]


def run_classify(cfg: ExperimentConfig, threads: int = 1) -> RunResult:
    """Per-class probabilities on a synthetic labeled dataset.

    Labels come from quantile-binning the regression targets of the first
    grid cell into ``n_classes`` groups (a documented demo encoding; the
    probabilities themselves are the module contract).
    """
    if cfg.n_classes < 2:
        raise ValueError("n_classes must be >= 2")
    d = cfg.d_list[0]
    n = max(1, round(cfg.n_over_d[0] * d))
    p = max(1, round(cfg.p_over_d[0] * d))
    nv = cfg.noise_var_list[0]
    tag = f"classify:d={d}:n={n}:p={p}:nv={nv!r}"
    base = generate_dataset(d, n, nv, seed=_cell_seed(cfg.seed, tag))
    shape = NetworkShape((d, p))
    edges = np.quantile(base.y, np.linspace(0, 1, cfg.n_classes + 1)[1:-1])
    labels = np.searchsorted(edges, base.y)
    if cfg.n_classes == 2:
        data = Dataset(x1=base.x1, y=labels.astype(float), noise_var=nv)
    else:
        data = Dataset(x1=base.x1, y=np.eye(cfg.n_classes)[labels], noise_var=nv)
    cands = sample_gaussian_candidates(
        shape, cfg.j_count, GaussianPriorSpec(), seed=_cell_seed(cfg.seed, tag)
    )
    tests = generate_test_points(d, cfg.n_test_points, seed=_cell_seed(cfg.seed, tag))
    rows = []
    n_err = 0
    for t, test in enumerate(tests):
        try:
            if cfg.n_classes == 2:
                p1 = binary_class_prob(cands, data, test, shape)
                probs = [1.0 - p1, p1]
            else:
                probs = list(multiclass_probs(cands, data, test, shape))
            for k, prob in enumerate(probs):
                rows.append(
                    {"test_point": t, "class": k, "probability": prob, "error": None}
                )
        except (NumericError, InfeasibleError, ValueError) as exc:
            n_err += 1
            rows.append(
                {"test_point": t, "class": None, "probability": None, "error": str(exc)}
            )
    out = Path(cfg.output_dir)
    _write_metadata(out, cfg, "classify")
    path = out / "class_probabilities.csv"
    write_table(path, CLASSIFY_COLUMNS, rows, cfg.hash())
    return RunResult(rows, n_err, [path])
