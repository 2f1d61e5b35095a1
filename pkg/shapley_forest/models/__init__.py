# Domain entities
from shapley_forest.models.dataset import Dataset
from shapley_forest.models.forest import Forest, Tree
from shapley_forest.models.subsets import (
    DrawEntry,
    SubsetDraw,
    SubsetOrigin,
    SubsetTable,
    VarSubset,
)
from shapley_forest.models.regression import KernelWeight, RegressionSystem, ShapleyEstimate
from shapley_forest.models.ground_truth import DuplicationSpec, Exp2Model, LinearGaussianModel
from shapley_forest.models.projection import ProjectedPrediction, ProjectionQuery
