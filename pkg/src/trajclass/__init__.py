"""Classification of linear dynamical system output trajectories.

Two classifiers over length-N output sequences: a model-based projection
classifier built from observability subspaces, and a data-driven max-margin
classifier with a homogeneous polynomial kernel, plus the margin and
expected-risk bounds that connect them.
"""

from .experiments import ExperimentConfig, ValidationReport, run_experiment, sweep
from .margins import MarginReport, RiskBoundInput, beta, margin_bound, margin_chain_report, risk_bound
from .modelbased import ModelBasedClassifier, build, classify, decision_value
from .svm import SvmModel, feature_map, kernel, margin, predict, train_hard_margin, train_soft_margin
from .sysmodel import (
    ContinuousSiso,
    LinearSystem,
    close_loop,
    discretize,
    feasibility_check,
    observability_matrix,
    parallel_interconnection,
    tf_to_ss,
)
from .trajectories import Dataset, Trajectory, normalize, random_dataset, simulate

__version__ = "0.1.0"
