"""Exact and ensemble-approximated Shapley value explanations for black-box models."""
from .blackbox import (
    BlackBoxModel,
    CountingModel,
    ExternalModel,
    FunctionModel,
    LinearModel,
    RbfKernelClassifier,
    load_model,
    predict_batch,
    save_model,
    train_rbf_classifier,
)
from .data import (
    Dataset,
    SyntheticPattern,
    background_means,
    generate_neighbors,
    generate_synthetic,
    load_csv,
    paper_instance,
    save_csv,
)
from .ensemble import ExplainerConfig, combine, er_shap, er_shap_rf, erw_shap
from .forest import ForestConfig, fit_forest, impurity_importance, temperature_scale
from .metrics import compare, concordance_index, cost_ratio, normalized_euclidean
from .shapley import (
    ValueFunctionContext,
    exact_shapley,
    kernel_shap_baseline,
    permutation_shapley,
    shapley_coefficient,
)

__version__ = "0.1.0"
