"""Simplicial convolutional and simplicial attention layers.

A layer mixes three branches acting on the k-signal matrix ``Z``
(simplices x features):

* lower branch: ``sum_p L_down^p Z W_down[p]``
* upper branch: ``sum_p L_up^p Z W_up[p]``
* harmonic branch: ``P Z W_h`` with ``P = (I - eps L)^J`` (or ``P = I``)

In attention mode ``L_down`` and ``L_up`` are replaced by row-stochastic
matrices learned on the same sparsity patterns (self loops included).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from ..complex import SimplicialComplex
from ..errors import ShapeMismatch
from ..hodge import ProjectorSpec, lambda_max, sparse_harmonic_projector
from ..nn import functional as F
from ..nn.autograd import Tensor, as_tensor
from ..nn.functional import SetPattern
from ..nn.init import xavier_uniform_init

HARMONIC_MODES = ("projector", "skip", "off")
SIGMAS = ("identity", "relu", "tanh")


@dataclass(frozen=True)
class SanLayerConfig:
    f_in: int
    f_out: int
    j_down: int = 1
    j_up: int = 1
    harmonic: str = "projector"
    projector: ProjectorSpec | None = None
    sigma: str = "identity"
    heads: int = 1
    head_combine: str = "concat"
    attention_enabled: bool = True
    shared_attention: bool = False
    tie_weights: bool = False
    leaky_slope: float = 0.2

    def __post_init__(self):
        if self.f_in < 1 or self.f_out < 1:
            raise ValueError("feature widths must be >= 1")
        if self.j_down < 0 or self.j_up < 0:
            raise ValueError("filter orders must be >= 0")
        if self.heads < 1:
            raise ValueError("heads must be >= 1")
        if self.harmonic not in HARMONIC_MODES:
            raise ValueError(f"harmonic must be one of {HARMONIC_MODES}")
        if self.harmonic == "projector" and self.projector is None:
            raise ValueError("projector mode needs a ProjectorSpec")
        if self.sigma not in SIGMAS:
            raise ValueError(f"sigma must be one of {SIGMAS}")
        if self.head_combine not in ("concat", "average"):
            raise ValueError("head_combine must be 'concat' or 'average'")
        if (self.shared_attention or self.tie_weights) and self.j_down != self.j_up:
            raise ValueError("shared attention / tied weights need j_down == j_up")

    @property
    def out_width(self) -> int:
        return self.f_out * self.heads if self.head_combine == "concat" else self.f_out


@dataclass
class SanLayerParams:
    """Weights of one attention head."""

    w_down: list[Tensor]
    w_up: list[Tensor]
    w_h: Tensor | None = None
    a_up: Tensor | None = None
    a_down: Tensor | None = None

    def parameters(self) -> list[Tensor]:
        seen, out = set(), []
        for t in [*self.w_down, *self.w_up, self.w_h, self.a_up, self.a_down]:
            if t is not None and id(t) not in seen:
                seen.add(id(t))
                out.append(t)
        return out


def init_layer_params(config: SanLayerConfig, rng: np.random.Generator, gain: float = 1.0,
                      prefix: str = "") -> list[SanLayerParams]:
    heads = []
    fi, fo = config.f_in, config.f_out
    for h in range(config.heads):
        tag = f"{prefix}h{h}."
        w_down = [xavier_uniform_init((fi, fo), gain, rng, f"{tag}w_down{p}") for p in range(config.j_down)]
        if config.tie_weights:
            w_up = list(w_down)
        else:
            w_up = [xavier_uniform_init((fi, fo), gain, rng, f"{tag}w_up{p}") for p in range(config.j_up)]
        w_h = xavier_uniform_init((fi, fo), gain, rng, f"{tag}w_h") if config.harmonic != "off" else None
        a_up = a_down = None
        if config.attention_enabled:
            if config.j_up:
                a_up = xavier_uniform_init((2 * config.j_up * fo, 1), gain, rng, f"{tag}a_up")
            if config.shared_attention:
                a_down = a_up
            elif config.j_down:
                a_down = xavier_uniform_init((2 * config.j_down * fo, 1), gain, rng, f"{tag}a_down")
        heads.append(SanLayerParams(w_down, w_up, w_h, a_up, a_down))
    return heads


def param_count(config: SanLayerConfig) -> int:
    """Number of trainable scalars registered for a layer."""
    fi, fo = config.f_in, config.f_out
    attn = 0
    if config.attention_enabled:
        attn += 2 * config.j_up * fo
        if not config.shared_attention:
            attn += 2 * config.j_down * fo
    n_filters = config.j_down if config.tie_weights else config.j_down + config.j_up
    filt = n_filters * fi * fo
    harm = fi * fo if config.harmonic != "off" else 0
    return config.heads * (attn + filt + harm)


# -- complex-side operators --------------------------------------------------------

def _unit_spectrum(M: sp.csr_matrix) -> sp.csr_matrix:
    if M.nnz == 0:
        return M
    lam = lambda_max(M)
    return (M / lam).tocsr() if lam > 0 else M


class SimplicialOperators:
    """Laplacians, neighbourhood patterns and cached projectors of one order.

    With ``normalize`` the lower and upper Laplacians used by fixed-operator
    (non-attention) filters are divided by their largest eigenvalues; ``L``
    and the projector always use the raw Hodge Laplacian.
    """

    def __init__(self, complex_: SimplicialComplex, k: int, normalize: bool = False):
        self.complex = complex_
        self.k = k
        self.normalize = normalize
        self.L_down, self.L_up, self.L = complex_.laplacians(k)
        if normalize:
            self.L_down = _unit_spectrum(self.L_down)
            self.L_up = _unit_spectrum(self.L_up)
        table = complex_.neighborhoods(k)
        self.up_pattern = SetPattern(table.upper)
        self.down_pattern = SetPattern(table.lower)
        self.n = complex_.n(k)
        self._projectors: dict[ProjectorSpec, object] = {}

    def projector(self, spec: ProjectorSpec):
        if spec not in self._projectors:
            self._projectors[spec] = sparse_harmonic_projector(self.L, spec)
        return self._projectors[spec]


@dataclass
class AttentionalLaplacians:
    """Softmax-normalised coefficients on the upper/lower patterns.

    ``up``/``down`` hold ``[..., nnz]`` coefficient tensors (None when the
    branch is absent).
    """

    up: Tensor | None
    down: Tensor | None
    up_pattern: SetPattern
    down_pattern: SetPattern

    def to_sparse(self, which: str = "up", batch: int | None = None) -> sp.csr_matrix:
        t = self.up if which == "up" else self.down
        pat = self.up_pattern if which == "up" else self.down_pattern
        vals = t.value if batch is None else t.value[batch]
        return pat.matrix(np.asarray(vals).reshape(-1))


def transform_features(Z, weights: Sequence[Tensor]) -> tuple[list[Tensor], Tensor | None]:
    """Per-order transforms ``Z W_p`` and their concatenation along features."""
    blocks = [F.matmul(Z, W) for W in weights]
    if not blocks:
        return blocks, None
    return blocks, (blocks[0] if len(blocks) == 1 else F.concat(blocks, axis=-1))


def _scores(h: Tensor, a: Tensor, pattern: SetPattern, slope: float) -> Tensor:
    width = h.shape[-1]
    if a.shape[0] != 2 * width:
        raise ShapeMismatch(f"attention vector {a.shape} for features of width {width}")
    a_src = F.getitem(a, slice(0, width))
    a_dst = F.getitem(a, slice(width, 2 * width))
    lead = h.shape[:-1]
    s_src = F.reshape(F.matmul(h, a_src), lead)
    s_dst = F.reshape(F.matmul(h, a_dst), lead)
    e = F.leaky_relu(F.pair_scores(s_src, s_dst, pattern), slope)
    return F.softmax_over_sets(e, pattern)


def attention_coefficients(h_up, h_down, a_up, a_down, ops: SimplicialOperators,
                           slope: float = 0.2) -> AttentionalLaplacians:
    up = _scores(h_up, a_up, ops.up_pattern, slope) if h_up is not None else None
    down = _scores(h_down, a_down, ops.down_pattern, slope) if h_down is not None else None
    return AttentionalLaplacians(up, down, ops.up_pattern, ops.down_pattern)


def matrix_polynomial(apply: Callable[[Tensor], Tensor], blocks: Sequence[Tensor]) -> Tensor | None:
    """``sum_{p=1..J} A^p X_p`` evaluated Horner-style with J applications of A."""
    if not blocks:
        return None
    acc = blocks[-1]
    for X in reversed(blocks[:-1]):
        acc = F.add(X, apply(acc))
    return apply(acc)


def _fixed(S, signs):
    """Left action of a fixed symmetric operator, conjugated by orientation signs."""
    if signs is None:
        return lambda Y: F.sparse_matmul(S, Y, symmetric=True)
    return lambda Y: F.mul(F.sparse_matmul(S, F.mul(Y, signs), symmetric=True), signs)


def head_preactivation(Z, ops: SimplicialOperators, params: SanLayerParams, config: SanLayerConfig,
                       signs=None, attention: AttentionalLaplacians | None = None) -> Tensor:
    """Filter-bank output of one head before the nonlinearity."""
    Z = as_tensor(Z)
    if Z.shape[-1] != config.f_in or Z.shape[-2] != ops.n:
        raise ShapeMismatch(f"input {Z.shape} vs ({ops.n}, {config.f_in})")
    down_blocks, h_down = transform_features(Z, params.w_down)
    up_blocks, h_up = transform_features(Z, params.w_up)
    if config.attention_enabled:
        if attention is None:
            attention = attention_coefficients(h_up, h_down, params.a_up, params.a_down, ops,
                                               config.leaky_slope)
        apply_down = lambda Y: F.attention_matmul(ops.down_pattern, attention.down, Y)  # noqa: E731
        apply_up = lambda Y: F.attention_matmul(ops.up_pattern, attention.up, Y)  # noqa: E731
    else:
        apply_down = _fixed(ops.L_down, signs)
        apply_up = _fixed(ops.L_up, signs)
    terms = []
    for apply, blocks in ((apply_down, down_blocks), (apply_up, up_blocks)):
        t = matrix_polynomial(apply, blocks)
        if t is not None:
            terms.append(t)
    if config.harmonic != "off":
        ZW = F.matmul(Z, params.w_h)
        if config.harmonic == "projector" and config.projector.j_h > 0:
            ZW = _fixed(ops.projector(config.projector), signs)(ZW)
        terms.append(ZW)
    if not terms:
        lead = Z.shape[:-1]
        return as_tensor(np.zeros(lead + (config.f_out,)))
    return terms[0] if len(terms) == 1 else F.add_n(terms)


def multi_head(outputs: Sequence[Tensor], mode: str, sigma: str = "identity") -> Tensor:
    """Combine per-head pre-activations: ``concat`` of ``sigma(head)`` or ``sigma(mean)``."""
    if not outputs:
        raise ShapeMismatch("no heads")
    shape = outputs[0].shape
    if any(o.shape != shape for o in outputs):
        raise ShapeMismatch("heads must share a shape")
    if mode == "concat":
        acts = [F.activation(o, sigma) for o in outputs]
        return acts[0] if len(acts) == 1 else F.concat(acts, axis=-1)
    if mode == "average":
        mean = outputs[0] if len(outputs) == 1 else F.scale(F.add_n(outputs), 1.0 / len(outputs))
        return F.activation(mean, sigma)
    raise ValueError(f"unknown head mode {mode!r}")


def san_layer_forward(Z, ops: SimplicialOperators, params: Sequence[SanLayerParams],
                      config: SanLayerConfig, signs=None) -> Tensor:
    """One SAN layer (attention on) or SCN layer (attention off), all heads."""
    pre = [head_preactivation(Z, ops, p, config, signs) for p in params]
    return multi_head(pre, config.head_combine, config.sigma)


def scn_layer_forward(Z, L_down, L_up, P, params: SanLayerParams, config: SanLayerConfig) -> Tensor:
    """Convolutional layer on explicit, fixed operators (single head)."""
    Z = as_tensor(Z)
    down_blocks, _ = transform_features(Z, params.w_down)
    up_blocks, _ = transform_features(Z, params.w_up)
    terms = [
        t for t in (
            matrix_polynomial(lambda Y: F.sparse_matmul(L_down, Y), down_blocks),
            matrix_polynomial(lambda Y: F.sparse_matmul(L_up, Y), up_blocks),
        ) if t is not None
    ]
    if config.harmonic != "off":
        ZW = F.matmul(Z, params.w_h)
        terms.append(F.sparse_matmul(P, ZW) if P is not None else ZW)
    pre = terms[0] if len(terms) == 1 else F.add_n(terms)
    return F.activation(pre, config.sigma)


# -- reductions to earlier architectures -----------------------------------------------

ARCHITECTURES = ("san", "san-no-harmonic", "scnn", "snn", "sat", "gat")


def reduction_config(target: str, f_in: int, f_out: int, *, j: int = 1,
                     projector: ProjectorSpec | None = None, **overrides) -> SanLayerConfig:
    """Layer configuration that specialises the SAN layer to a known architecture.

    ``j`` is the filter order for the targets that keep it free (SAN variants
    and SCNN). Weight tying and attention sharing are part of the config.
    """
    target = target.lower()
    if target == "san":
        if projector is None:
            raise ValueError("SAN needs a projector spec")
        cfg = SanLayerConfig(f_in, f_out, j, j, harmonic="projector", projector=projector)
    elif target == "san-no-harmonic":
        cfg = SanLayerConfig(f_in, f_out, j, j, harmonic="off")
    elif target == "scnn":
        cfg = SanLayerConfig(f_in, f_out, j, j, harmonic="skip", attention_enabled=False)
    elif target == "snn":
        cfg = SanLayerConfig(f_in, f_out, 1, 1, harmonic="off", attention_enabled=False, tie_weights=True)
    elif target == "sat":
        cfg = SanLayerConfig(f_in, f_out, 1, 1, harmonic="off", shared_attention=True)
    elif target == "gat":
        cfg = SanLayerConfig(f_in, f_out, 0, 1, harmonic="off")
    else:
        raise ValueError(f"unknown architecture {target!r}; expected one of {ARCHITECTURES}")
    if projector is not None and target != "san":
        overrides["projector"] = projector
    return replace(cfg, **overrides) if overrides else cfg
