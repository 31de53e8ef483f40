"""Worker reliability estimation and label aggregation under the one-coin model."""

from .aggregate import majority, predict_dataset, predict_majority, vote_scores, weighted_majority, weights_from_theta
from .estimator import TeEstimate, TeState, estimate, inject_population, load_state, merge, save_state
from .model import (
    InvalidDimensionError,
    ModelParams,
    TaskSample,
    a_functional,
    b_functional,
    in_hardness_class,
    in_identifiable_set,
    population_covariance,
    worker_weights,
)
from .simulate import InstanceKind, InstanceSpec, SimulatedRun, generate_run, run_rng, sample_tasks

__all__ = [
    "InstanceKind", "InstanceSpec", "InvalidDimensionError", "ModelParams", "SimulatedRun",
    "TaskSample", "TeEstimate", "TeState", "a_functional", "b_functional", "estimate",
    "generate_run", "in_hardness_class", "in_identifiable_set", "inject_population", "load_state",
    "majority", "merge", "population_covariance", "predict_dataset", "predict_majority", "run_rng",
    "sample_tasks", "save_state", "vote_scores", "weighted_majority", "weights_from_theta",
    "worker_weights",
]
