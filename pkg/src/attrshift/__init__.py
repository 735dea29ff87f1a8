"""Zero-shot domain adaptation by attribute-prior instance weighting."""

from .classifier import (CvGrid, KernelLogisticCV, WeightedKernelLogisticRegression,
                         train_weighted, weighted_risk)
from .core import (Dataset, DatasetSchema, LabeledSample, empirical_attribute_prior,
                   load_dataset, load_weights, save_dataset, save_weights)
from .density_ratio import ULSIF, fit_ulsif, ground_truth_weights, predict_ulsif
from .metrics import accuracy, assumption_diagnostic, weight_rmse
from .toydata import (BUILTIN_SPECS, OverlapSpec, ToySpec, generate_overlap_demo, generate_toy,
                      true_density)
from .weights import (AttributeWeightEstimator, KnnAttributePosterior,
                      StraightforwardWeightEstimator, domain_posterior, estimate_weights,
                      knn_attribute_posterior, straightforward_weights)

__version__ = "0.1.0"

__all__ = [
    "AttributeWeightEstimator", "BUILTIN_SPECS", "CvGrid", "Dataset", "DatasetSchema",
    "KernelLogisticCV", "KnnAttributePosterior", "LabeledSample", "OverlapSpec",
    "StraightforwardWeightEstimator", "ToySpec", "ULSIF", "WeightedKernelLogisticRegression",
    "accuracy", "assumption_diagnostic", "domain_posterior", "empirical_attribute_prior",
    "estimate_weights", "fit_ulsif", "generate_overlap_demo", "generate_toy",
    "ground_truth_weights", "knn_attribute_posterior", "load_dataset", "load_weights",
    "predict_ulsif", "save_dataset", "save_weights", "straightforward_weights", "train_weighted",
    "true_density", "weight_rmse", "weighted_risk",
]
