from .layers import (
    ARCHITECTURES,
    AttentionalLaplacians,
    SanLayerConfig,
    SanLayerParams,
    SimplicialOperators,
    attention_coefficients,
    head_preactivation,
    init_layer_params,
    matrix_polynomial,
    multi_head,
    param_count,
    reduction_config,
    san_layer_forward,
    scn_layer_forward,
    transform_features,
)
from .model import SanModel, readout

__all__ = [
    "ARCHITECTURES", "AttentionalLaplacians", "SanLayerConfig", "SanLayerParams",
    "SimplicialOperators", "attention_coefficients", "head_preactivation", "init_layer_params",
    "matrix_polynomial", "multi_head", "param_count", "reduction_config", "san_layer_forward",
    "scn_layer_forward", "transform_features", "SanModel", "readout",
]
