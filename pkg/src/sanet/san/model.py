"""Stacked SAN layers with a task readout."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ..errors import ShapeMismatch
from ..hodge import ProjectorSpec
from ..nn import functional as F
from ..nn.autograd import Tensor, as_tensor
from ..nn.init import xavier_uniform_init, zeros_init
from .layers import SanLayerConfig, SanLayerParams, init_layer_params, san_layer_forward

READOUTS = ("mean_pool_mlp", "flatten_mlp", "per_simplex_linear")


@dataclass
class MlpParams:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor


def readout(Z, mode: str, mlp: MlpParams | None = None) -> Tensor:
    """Map final simplex features to logits (pooled or flattened MLP) or per-simplex predictions.

    ``flatten_mlp`` concatenates the features of every simplex in index
    order, so it only applies when all inputs live on the same complex.
    """
    Z = as_tensor(Z)
    if mode in ("mean_pool_mlp", "flatten_mlp"):
        if mode == "mean_pool_mlp":
            pooled = F.mean_rows(Z)
        else:
            pooled = F.reshape(Z, Z.shape[:-2] + (Z.shape[-2] * Z.shape[-1],))
        if pooled.shape[-1] != mlp.w1.shape[0]:
            raise ShapeMismatch(f"pooled width {pooled.shape[-1]} vs MLP input {mlp.w1.shape[0]}")
        hidden = F.relu(F.add(F.matmul(pooled, mlp.w1), mlp.b1))
        return F.add(F.matmul(hidden, mlp.w2), mlp.b2)
    if mode == "per_simplex_linear":
        if Z.shape[-1] != 1:
            raise ShapeMismatch(f"per-simplex readout needs one output feature, got {Z.shape[-1]}")
        return F.reshape(Z, Z.shape[:-1])
    raise ValueError(f"unknown readout {mode!r}")


class SanModel:
    def __init__(self, layers: Sequence[SanLayerConfig], readout: str = "mean_pool_mlp",
                 n_classes: int = 2, mlp_hidden: int | None = None, gain: float = 1.0,
                 dropout: float = 0.0, seed: int = 0, n_simplices: int | None = None):
        if readout not in READOUTS:
            raise ValueError(f"readout must be one of {READOUTS}")
        if readout == "flatten_mlp" and not n_simplices:
            raise ValueError("flatten_mlp readout needs n_simplices")
        for a, b in zip(layers, layers[1:]):
            if a.out_width != b.f_in:
                raise ShapeMismatch(f"layer widths do not chain: {a.out_width} -> {b.f_in}")
        self.layers = list(layers)
        self.readout_mode = readout
        self.n_classes = n_classes
        self.dropout = dropout
        self.gain = gain
        self.n_simplices = n_simplices
        rng = np.random.default_rng(seed)
        self.layer_params: list[list[SanLayerParams]] = [
            init_layer_params(cfg, rng, gain, prefix=f"l{i}.") for i, cfg in enumerate(self.layers)
        ]
        self.mlp = None
        if readout in ("mean_pool_mlp", "flatten_mlp"):
            width = self.layers[-1].out_width
            self.mlp_hidden = mlp_hidden or width
            if readout == "flatten_mlp":
                width *= n_simplices
            self.mlp = MlpParams(
                w1=xavier_uniform_init((width, self.mlp_hidden), gain, rng, "mlp.w1"),
                b1=zeros_init((self.mlp_hidden,), "mlp.b1"),
                w2=xavier_uniform_init((self.mlp_hidden, n_classes), gain, rng, "mlp.w2"),
                b2=zeros_init((n_classes,), "mlp.b2"),
            )
        else:
            self.mlp_hidden = None

    def parameters(self) -> list[Tensor]:
        out = []
        for heads in self.layer_params:
            for p in heads:
                out.extend(p.parameters())
        if self.mlp is not None:
            out.extend([self.mlp.w1, self.mlp.b1, self.mlp.w2, self.mlp.b2])
        return out

    def regularized_parameters(self) -> list[Tensor]:
        """Filter, attention and MLP weights; biases are left out."""
        return [p for p in self.parameters() if not (p.name or "").startswith("mlp.b")]

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def forward(self, X, ops, training: bool = False, rng: np.random.Generator | None = None,
                signs=None) -> Tensor:
        Z = as_tensor(X)
        for cfg, heads in zip(self.layers, self.layer_params):
            Z = san_layer_forward(Z, ops, heads, cfg, signs)
            Z = F.dropout(Z, self.dropout, training, rng)
        return readout(Z, self.readout_mode, self.mlp)

    __call__ = forward

    # -- serialisation -----------------------------------------------------------
    def spec(self) -> dict:
        return {
            "layers": [layer_config_to_dict(c) for c in self.layers],
            "readout": self.readout_mode,
            "n_classes": self.n_classes,
            "mlp_hidden": self.mlp_hidden,
            "gain": self.gain,
            "dropout": self.dropout,
            "n_simplices": self.n_simplices,
        }

    @classmethod
    def from_spec(cls, spec: dict) -> "SanModel":
        return cls(
            [layer_config_from_dict(d) for d in spec["layers"]],
            readout=spec["readout"],
            n_classes=spec["n_classes"],
            mlp_hidden=spec["mlp_hidden"],
            gain=spec["gain"],
            dropout=spec["dropout"],
            n_simplices=spec.get("n_simplices"),
        )


def layer_config_to_dict(cfg: SanLayerConfig) -> dict:
    d = asdict(cfg)
    d["projector"] = asdict(cfg.projector) if cfg.projector is not None else None
    return d


def layer_config_from_dict(d: dict) -> SanLayerConfig:
    d = dict(d)
    if d.get("projector") is not None:
        d["projector"] = ProjectorSpec(**d["projector"])
    return SanLayerConfig(**d)
