"""Transformer motion predictor.

A post-norm encoder refines the trajectory embedding; the spatial part of
the embedding is added back before every layer. A three-layer MLP head reads
only the refined prediction token and emits a normalized box through a
sigmoid.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .embedding import (
    DEFAULT_SPATIAL_SCALE,
    EmbeddingParams,
    HistoricalTrajectory,
    build_embedding_batch,
    stack_histories,
)
from .geometry import BBox

LN_EPS = 1e-5


@dataclass(frozen=True)
class EncoderConfig:
    n_layers: int = 6
    n_heads: int = 8
    d_model: int = 512
    ffn_dim: int = 0  # 0 -> 4 * d_model
    head_hidden: int = 0  # 0 -> d_model
    history_len: int = 30
    spatial_scale: float = DEFAULT_SPATIAL_SCALE

    def __post_init__(self):
        if self.ffn_dim == 0:
            object.__setattr__(self, "ffn_dim", 4 * self.d_model)
        if self.head_hidden == 0:
            object.__setattr__(self, "head_hidden", self.d_model)
        for name in ("n_layers", "n_heads", "d_model", "ffn_dim", "head_hidden", "history_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.d_model % 8:
            raise ValueError(f"d_model {self.d_model} must be a multiple of 8")
        if not self.spatial_scale > 0:
            raise ValueError("spatial_scale must be positive")

    @property
    def T(self) -> int:
        return self.history_len

    def as_dict(self) -> dict:
        return asdict(self)


def _param_shapes(cfg: EncoderConfig) -> "OrderedDict[str, tuple[int, ...]]":
    D, F, Hh = cfg.d_model, cfg.ffn_dim, cfg.head_hidden
    shapes: OrderedDict[str, tuple[int, ...]] = OrderedDict()
    shapes["embed.pred_token"] = (D,)
    shapes["embed.mask_token"] = (D,)
    for l in range(cfg.n_layers):
        p = f"enc.{l}."
        for m in ("q", "k", "v", "o"):
            shapes[p + f"attn.w{m}"] = (D, D)
            shapes[p + f"attn.b{m}"] = (D,)
        shapes[p + "norm1.gain"] = (D,)
        shapes[p + "norm1.bias"] = (D,)
        shapes[p + "ffn.w1"] = (D, F)
        shapes[p + "ffn.b1"] = (F,)
        shapes[p + "ffn.w2"] = (F, D)
        shapes[p + "ffn.b2"] = (D,)
        shapes[p + "norm2.gain"] = (D,)
        shapes[p + "norm2.bias"] = (D,)
    dims = [D, Hh, Hh, 4]
    for i in range(3):
        shapes[f"head.{i}.w"] = (dims[i], dims[i + 1])
        shapes[f"head.{i}.b"] = (dims[i + 1],)
    return shapes


@dataclass
class ModelParams:
    config: EncoderConfig
    tensors: "OrderedDict[str, ad.Tensor]" = field(default_factory=OrderedDict)

    @classmethod
    def init(cls, config: EncoderConfig, seed: int = 0) -> "ModelParams":
        rng = np.random.default_rng(seed)
        tensors: OrderedDict[str, ad.Tensor] = OrderedDict()
        for name, shape in _param_shapes(config).items():
            if name.startswith("embed."):
                data = rng.normal(0.0, 0.02, shape)
            elif name.endswith(".gain"):
                data = np.ones(shape)
            elif len(shape) == 2:
                limit = math.sqrt(6.0 / (shape[0] + shape[1]))
                data = rng.uniform(-limit, limit, shape)
            else:
                data = np.zeros(shape)
            tensors[name] = ad.parameter(data)
        return cls(config, tensors)

    @classmethod
    def from_arrays(cls, config: EncoderConfig, arrays: dict[str, np.ndarray]) -> "ModelParams":
        shapes = _param_shapes(config)
        missing = [k for k in shapes if k not in arrays]
        if missing:
            raise ValueError(f"checkpoint lacks parameters {missing[:3]}")
        extra = [k for k in arrays if k not in shapes]
        if extra:
            raise ValueError(f"checkpoint has unexpected parameters {extra[:3]}")
        tensors = OrderedDict()
        for name, shape in shapes.items():
            if arrays[name].shape != shape:
                raise ValueError(f"parameter {name} has shape {arrays[name].shape}, expected {shape}")
            tensors[name] = ad.parameter(arrays[name])
        return cls(config, tensors)

    def arrays(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, t.data) for k, t in self.tensors.items())

    def copy(self) -> "ModelParams":
        return ModelParams.from_arrays(self.config, {k: v.copy() for k, v in self.arrays().items()})

    def __getitem__(self, name: str) -> ad.Tensor:
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors)

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.grad = None

    @property
    def embedding(self) -> EmbeddingParams:
        return EmbeddingParams(self.tensors["embed.pred_token"], self.tensors["embed.mask_token"])

    def n_parameters(self) -> int:
        return sum(t.data.size for t in self.tensors.values())


def _linear(x, w, b):
    return ad.add(ad.matmul(x, w), b)


def _attention(h: ad.Tensor, params: ModelParams, prefix: str, n_heads: int):
    B, L, D = h.shape
    dh = D // n_heads

    def heads(t):
        return ad.transpose(ad.reshape(t, (B, L, n_heads, dh)), (0, 2, 1, 3))

    q = heads(_linear(h, params[prefix + "wq"], params[prefix + "bq"]))
    k = heads(_linear(h, params[prefix + "wk"], params[prefix + "bk"]))
    v = heads(_linear(h, params[prefix + "wv"], params[prefix + "bv"]))
    scores = ad.scalar_mul(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dh))
    attn = ad.softmax(scores, axis=-1)
    ctx = ad.reshape(ad.transpose(ad.matmul(attn, v), (0, 2, 1, 3)), (B, L, D))
    return _linear(ctx, params[prefix + "wo"], params[prefix + "bo"]), attn


def encode(
    Z: ad.Tensor,
    X_spat: ad.Tensor,
    params: ModelParams,
    config: EncoderConfig,
    *,
    layer_norms: bool = True,
    return_attention: bool = False,
):
    """Run the encoder on ``(T+1, D)`` or ``(B, T+1, D)`` inputs.

    ``layer_norms=False`` skips the normalizations; it exists only so tests
    can probe the residual path in isolation.
    """
    Z, X_spat = ad.as_tensor(Z), ad.as_tensor(X_spat)
    if Z.shape != X_spat.shape:
        raise ad.ShapeError(f"encode: Z {Z.shape} and X_spat {X_spat.shape} differ")
    if Z.shape[-1] != config.d_model:
        raise ad.ShapeError(f"encode: feature dim {Z.shape[-1]} != d_model {config.d_model}")
    single = Z.ndim == 2
    if single:
        Z = ad.reshape(Z, (1,) + Z.shape)
        X_spat = ad.reshape(X_spat, (1,) + X_spat.shape)
    h = Z
    attentions = []
    for l in range(config.n_layers):
        p = f"enc.{l}."
        h = ad.add(h, X_spat)
        a, attn = _attention(h, params, p + "attn.", config.n_heads)
        attentions.append(attn.data)
        h = ad.add(h, a)
        if layer_norms:
            h = ad.layer_norm(h, params[p + "norm1.gain"], params[p + "norm1.bias"], LN_EPS)
        f = _linear(ad.relu(_linear(h, params[p + "ffn.w1"], params[p + "ffn.b1"])), params[p + "ffn.w2"], params[p + "ffn.b2"])
        h = ad.add(h, f)
        if layer_norms:
            h = ad.layer_norm(h, params[p + "norm2.gain"], params[p + "norm2.bias"], LN_EPS)
    if single:
        h = ad.reshape(h, h.shape[1:])
    if return_attention:
        return h, attentions
    return h


def head(z_pred: ad.Tensor, params: ModelParams) -> ad.Tensor:
    y = ad.relu(_linear(z_pred, params["head.0.w"], params["head.0.b"]))
    y = ad.relu(_linear(y, params["head.1.w"], params["head.1.b"]))
    return ad.sigmoid(_linear(y, params["head.2.w"], params["head.2.b"]))


def forward_arrays(boxes: np.ndarray, mask: np.ndarray, params: ModelParams) -> ad.Tensor:
    """Predicted boxes ``(B, 4)`` from stacked ``(B, T, 4)`` histories."""
    cfg = params.config
    if boxes.shape[1] != cfg.history_len:
        raise ad.ShapeError(f"history length {boxes.shape[1]} != configured T {cfg.history_len}")
    z, x = build_embedding_batch(boxes, mask, params.embedding, cfg.spatial_scale)
    refined = encode(z, x, params, cfg)
    return head(refined[:, -1, :], params)


def predict_batch(
    hs: Sequence[HistoricalTrajectory], params: ModelParams, config: EncoderConfig | None = None
) -> list[BBox]:
    config = config or params.config
    if not hs:
        return []
    for i, h in enumerate(hs):
        if h.T != config.history_len:
            raise ValueError(f"trajectory {i}: length {h.T} != T {config.history_len}")
        if h.n_boxes() == 0:
            raise ValueError(f"trajectory {i}: all slots are masked")
    boxes, mask = stack_histories(hs)
    out = forward_arrays(boxes, mask, params).data
    return [BBox.from_array(row) for row in out]


def predict_box(h: HistoricalTrajectory, params: ModelParams, config: EncoderConfig | None = None) -> BBox:
    return predict_batch([h], params, config)[0]
