import math

import numpy as np

from .autograd import Tensor


def xavier_bound(shape, gain: float = 1.0) -> float:
    fan_in, fan_out = shape[0], shape[1] if len(shape) > 1 else 1
    return gain * math.sqrt(6.0 / (fan_in + fan_out))


def xavier_uniform_init(shape, gain: float, rng: np.random.Generator, name=None) -> Tensor:
    """Glorot-uniform parameter in ``[-b, b]`` with ``b = gain*sqrt(6/(fan_in+fan_out))``."""
    if any(d <= 0 for d in shape):
        raise ValueError(f"dimensions must be positive: {shape}")
    b = xavier_bound(shape, gain)
    return Tensor(rng.uniform(-b, b, size=shape), requires_grad=True, name=name)


def zeros_init(shape, name=None) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True, name=name)
