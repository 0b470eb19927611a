"""Exact Gaussian-mixture posterior predictives for networks with a
Gaussian prior on final-layer weights and a discrete prior on interior
weights, plus constructors for high-evidence interior-weight candidates and
experiment drivers for mode-count, variance-scaling, and optimality-gap
studies.
"""

from .data import (
    RELU_UNIT_VARIANCE_SCALE,
    Activation,
    CandidateSet,
    Dataset,
    NetworkShape,
    TestPoint,
    ThetaCandidate,
    generate_dataset,
    generate_test_points,
    load_candidate_set,
    load_dataset,
    save_candidate_set,
    save_dataset,
)
from .errors import InfeasibleError, NumericError
from .features import FeatureMatrix, forward_features
from .regression import (
    ComponentPosterior,
    FinalLayerPosterior,
    component_predictive,
    evaluate_component,
    final_layer_posterior,
    log_marginal_likelihood,
    log_marginal_likelihood_from_gram,
    log_marginal_likelihood_spectral,
)
from .mixture import (
    MixturePredictive,
    local_mode_count,
    mixture_moments,
    mixture_weights,
    pdf_eval,
    posterior_predictive,
    posterior_predictive_batch,
    save_mixture_csv,
    significant_component_count,
)
from .construct import (
    EquivalenceClassSpec,
    GaussianPriorSpec,
    GramTarget,
    build_equivalence_class,
    factor_gram_nonneg,
    optimal_gram,
    project_onto_row_space,
    projected_optimal_gram,
    relu_optimal_gram,
    rotate_features,
    sample_colspace_theta,
    sample_gaussian_candidates,
    sample_preimage,
)
from .classify import (
    LogitPosterior,
    binary_class_prob,
    expected_sigmoid,
    multiclass_prob,
    multiclass_probs,
)
from .estimators import MixtureClassifier, MixtureRegressor
from .rng import RngPolicy

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "CandidateSet",
    "ComponentPosterior",
    "Dataset",
    "EquivalenceClassSpec",
    "FeatureMatrix",
    "FinalLayerPosterior",
    "GaussianPriorSpec",
    "GramTarget",
    "InfeasibleError",
    "LogitPosterior",
    "MixtureClassifier",
    "MixturePredictive",
    "MixtureRegressor",
    "NetworkShape",
    "NumericError",
    "RELU_UNIT_VARIANCE_SCALE",
    "RngPolicy",
    "TestPoint",
    "ThetaCandidate",
    "binary_class_prob",
    "build_equivalence_class",
    "component_predictive",
    "evaluate_component",
    "expected_sigmoid",
    "factor_gram_nonneg",
    "final_layer_posterior",
    "forward_features",
    "generate_dataset",
    "generate_test_points",
    "load_candidate_set",
    "load_dataset",
    "local_mode_count",
    "log_marginal_likelihood",
    "log_marginal_likelihood_from_gram",
    "log_marginal_likelihood_spectral",
    "mixture_moments",
    "mixture_weights",
    "multiclass_prob",
    "multiclass_probs",
    "optimal_gram",
    "pdf_eval",
    "posterior_predictive",
    "posterior_predictive_batch",
    "project_onto_row_space",
    "projected_optimal_gram",
    "relu_optimal_gram",
    "rotate_features",
    "sample_colspace_theta",
    "sample_gaussian_candidates",
    "sample_preimage",
    "save_candidate_set",
    "save_dataset",
    "save_mixture_csv",
    "significant_component_count",
]
