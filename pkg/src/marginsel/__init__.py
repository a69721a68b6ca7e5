"""Normalized-margin feature selection and region selection for additive-kernel SVMs."""

from .data import (Bag, SampleDataset, SyntheticSpec, generate_planted_features,
                   generate_planted_instances)
from .evaluation import average_precision, pr_curve
from .feature_select import (FeatureSelectModel, FeatureSelectOptions, predict_fs,
                             train_feature_selection)
from .kernels import KernelKind
from .qp import DualSolution, solve_dual
from .region_select import (RegionSelectModel, RegionSelectOptions, score_bag, score_instance,
                            train_region_selection)

__version__ = "0.1.0"
