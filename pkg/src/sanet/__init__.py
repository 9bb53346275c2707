"""Simplicial attention networks on numpy/scipy with a small autodiff tape."""
from .complex import SimplicialComplex, build_complex, incidence_matrix, laplacian, neighborhoods
from .config import DataConfig, ModelConfig, OptimConfig, RunConfig, load_config, task_defaults
from .hodge import (
    ProjectorSpec,
    exact_harmonic_projector,
    hodge_decompose,
    lambda_max,
    sparse_harmonic_projector,
)
from .san import SanModel, SimplicialOperators, param_count, reduction_config
from .train import build_model, train_mdi, train_trajectory

__all__ = [
    "SimplicialComplex", "build_complex", "incidence_matrix", "laplacian", "neighborhoods",
    "DataConfig", "ModelConfig", "OptimConfig", "RunConfig", "load_config", "task_defaults",
    "ProjectorSpec", "exact_harmonic_projector", "hodge_decompose", "lambda_max",
    "sparse_harmonic_projector", "SanModel", "SimplicialOperators", "param_count",
    "reduction_config", "build_model", "train_mdi", "train_trajectory",
]
