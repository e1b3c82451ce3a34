"""Pose-sequence classifier heads: frame-embedding + (bi)LSTM and a
transformer encoder (PoseTransformer), assembled from ndcore layers, plus
parameter init, counting, and the versioned checkpoint container."""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ndcore
from .ndcore import (
    EncoderLayerParams,
    LSTMWeights,
    Parameter,
    Tensor,
    bilstm,
    dropout,
    encoder_layer,
    linear,
    lstm_sequence,
    masked_mean_pool,
    positional_encoding,
)
from .rng import PARAM_INIT, derive_rng

INPUT_DIM = 237  # 79 landmarks x 3 coordinates


@dataclass(frozen=True)
class PoseLSTMConfig:
    """Frame embed -> (bi)LSTM -> masked mean pool -> dropout -> classifier."""

    n_classes: int
    input_dim: int = INPUT_DIM
    embed_dim: int = 128
    hidden_dim: int = 256
    bidirectional: bool = True
    dropout_rate: float = 0.2

    def __post_init__(self):
        if min(self.n_classes, self.input_dim, self.embed_dim, self.hidden_dim) < 1:
            raise ValueError("all dimensions must be positive")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")


@dataclass(frozen=True)
class PoseTransformerConfig:
    """Frame embed -> positional encoding -> encoder stack -> pooled classifier."""

    n_classes: int
    input_dim: int = INPUT_DIM
    d_model: int = 256
    n_heads: int = 4
    n_layers: int = 3
    d_ff: int = 0  # 0 means 4 * d_model
    dropout_rate: float = 0.1
    inter_layer_dropout: bool = False

    def __post_init__(self):
        if min(self.n_classes, self.input_dim, self.d_model, self.n_heads, self.n_layers) < 1:
            raise ValueError("all dimensions must be positive")
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")

    @property
    def ff_dim(self) -> int:
        return self.d_ff if self.d_ff else 4 * self.d_model


ModelConfig = PoseLSTMConfig | PoseTransformerConfig


@dataclass(frozen=True)
class ClassifierOutput:
    logits: Tensor  # (B, n_classes)


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Name -> shape of every trainable tensor, in construction order."""
    shapes: dict[str, tuple[int, ...]] = {}
    if isinstance(cfg, PoseLSTMConfig):
        e, h = cfg.embed_dim, cfg.hidden_dim
        shapes["embed.w"] = (cfg.input_dim, e)
        shapes["embed.b"] = (e,)
        directions = ("fwd", "bwd") if cfg.bidirectional else ("fwd",)
        for d in directions:
            shapes[f"lstm.{d}.w_ih"] = (e, 4 * h)
            shapes[f"lstm.{d}.w_hh"] = (h, 4 * h)
            shapes[f"lstm.{d}.b_ih"] = (4 * h,)
            shapes[f"lstm.{d}.b_hh"] = (4 * h,)
        pooled = 2 * h if cfg.bidirectional else h
        shapes["head.w"] = (pooled, cfg.n_classes)
        shapes["head.b"] = (cfg.n_classes,)
    elif isinstance(cfg, PoseTransformerConfig):
        d, dff = cfg.d_model, cfg.ff_dim
        shapes["embed.w"] = (cfg.input_dim, d)
        shapes["embed.b"] = (d,)
        for i in range(cfg.n_layers):
            p = f"layers.{i}."
            for name in ("w_q", "w_k", "w_v", "w_o"):
                shapes[p + name] = (d, d)
                shapes[p + name.replace("w", "b")] = (d,)
            shapes[p + "ln1_gamma"] = (d,)
            shapes[p + "ln1_beta"] = (d,)
            shapes[p + "w_ff1"] = (d, dff)
            shapes[p + "b_ff1"] = (dff,)
            shapes[p + "w_ff2"] = (dff, d)
            shapes[p + "b_ff2"] = (d,)
            shapes[p + "ln2_gamma"] = (d,)
            shapes[p + "ln2_beta"] = (d,)
        shapes["head.w"] = (d, cfg.n_classes)
        shapes["head.b"] = (cfg.n_classes,)
    else:
        raise TypeError(f"unsupported config type {type(cfg)!r}")
    return shapes


def count_scalars(shapes_or_params) -> int:
    """Total number of scalar parameters in a shapes dict or params dict."""
    total = 0
    for v in shapes_or_params.values():
        shape = v.data.shape if isinstance(v, Tensor) else tuple(v)
        total += int(np.prod(shape)) if shape else 1
    return total


def param_count(cfg: ModelConfig) -> int:
    return count_scalars(param_shapes(cfg))


def init_params(cfg: ModelConfig, seed: int) -> dict[str, Parameter]:
    """Seeded uniform Xavier init for matrices; zeros for biases.

    Layer-norm gains start at 1. The LSTM forget-gate bias starts at 1 to
    open the forget gate early in training.
    """
    rng = derive_rng(seed, PARAM_INIT)
    params: dict[str, Parameter] = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if len(shape) == 2:
            a = np.sqrt(6.0 / (shape[0] + shape[1]))
            data = rng.uniform(-a, a, size=shape)
        elif "gamma" in leaf:
            data = np.ones(shape)
        else:
            data = np.zeros(shape)
        if isinstance(cfg, PoseLSTMConfig) and leaf == "b_ih" and name.startswith("lstm."):
            h = cfg.hidden_dim
            data = data.copy()
            data[h : 2 * h] = 1.0
        params[name] = Parameter(data, name)
    return params


def _lstm_weights(params: dict[str, Parameter], direction: str) -> LSTMWeights:
    p = f"lstm.{direction}."
    return LSTMWeights(
        params[p + "w_ih"], params[p + "w_hh"], params[p + "b_ih"], params[p + "b_hh"]
    )


def _check_batch(batch, mask, input_dim):
    batch = ndcore.as_tensor(batch)
    if batch.ndim != 3 or batch.shape[-1] != input_dim:
        raise ValueError(f"batch must be (B, T, {input_dim}), got {batch.shape}")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != batch.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} does not match batch {batch.shape[:2]}")
    if (~mask).all(axis=1).any():
        raise ValueError("a batch row consists entirely of padding")
    return batch, mask


def pose_lstm_forward(
    batch,
    mask,
    cfg: PoseLSTMConfig,
    params: dict[str, Parameter],
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> ClassifierOutput:
    """(B, T, 237) + validity mask -> logits (B, n_classes)."""
    batch, mask = _check_batch(batch, mask, cfg.input_dim)
    emb = linear(batch, params["embed.w"], params["embed.b"])
    # Zero embedded padding so neither LSTM direction can see past the mask.
    emb = emb * Tensor(mask[:, :, None].astype(np.float64))
    if cfg.bidirectional:
        states = bilstm(emb, _lstm_weights(params, "fwd"), _lstm_weights(params, "bwd"))
    else:
        states = lstm_sequence(emb, _lstm_weights(params, "fwd"))
    pooled = masked_mean_pool(states, mask)
    pooled = dropout(pooled, cfg.dropout_rate, training, rng)
    return ClassifierOutput(logits=linear(pooled, params["head.w"], params["head.b"]))


def pose_transformer_forward(
    batch,
    mask,
    cfg: PoseTransformerConfig,
    params: dict[str, Parameter],
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> ClassifierOutput:
    """(B, T, 237) + validity mask -> logits via the encoder stack."""
    batch, mask = _check_batch(batch, mask, cfg.input_dim)
    x = linear(batch, params["embed.w"], params["embed.b"])
    x = x + Tensor(positional_encoding(batch.shape[1], cfg.d_model))
    layer_rate = cfg.dropout_rate if cfg.inter_layer_dropout else 0.0
    for i in range(cfg.n_layers):
        p = f"layers.{i}."
        layer = EncoderLayerParams(*(params[p + f] for f in (
            "w_q", "b_q", "w_k", "b_k", "w_v", "b_v", "w_o", "b_o",
            "ln1_gamma", "ln1_beta", "w_ff1", "b_ff1", "w_ff2", "b_ff2",
            "ln2_gamma", "ln2_beta",
        )))
        x = encoder_layer(x, layer, cfg.n_heads, mask, layer_rate, training, rng)
    pooled = masked_mean_pool(x, mask)
    pooled = dropout(pooled, cfg.dropout_rate, training, rng)
    return ClassifierOutput(logits=linear(pooled, params["head.w"], params["head.b"]))


def forward(batch, mask, cfg: ModelConfig, params, training=False, rng=None) -> ClassifierOutput:
    if isinstance(cfg, PoseLSTMConfig):
        return pose_lstm_forward(batch, mask, cfg, params, training, rng)
    return pose_transformer_forward(batch, mask, cfg, params, training, rng)


# -- checkpoint container -----------------------------------------------------
#
# One UTF-8 JSON document, format tag "signpose-checkpoint-v1". Parameter and
# optimizer arrays are base64 of little-endian binary64 bytes in row-major
# order, so the container is endian-fixed and loads bit-exactly everywhere.

CHECKPOINT_FORMAT = "signpose-checkpoint-v1"

_CONFIG_TYPES = {"pose_lstm": PoseLSTMConfig, "pose_transformer": PoseTransformerConfig}


def _encode_array(a: np.ndarray) -> dict:
    return {
        "shape": list(a.shape),
        "data": base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii"),
    }


def _decode_array(d: dict) -> np.ndarray:
    a = np.frombuffer(base64.b64decode(d["data"]), dtype="<f8").astype(np.float64)
    return a.reshape(d["shape"])


def model_type_name(cfg: ModelConfig) -> str:
    return "pose_lstm" if isinstance(cfg, PoseLSTMConfig) else "pose_transformer"


def config_from_dict(model_type: str, d: dict) -> ModelConfig:
    cls = _CONFIG_TYPES[model_type]
    d = dict(d)
    if "nuisance_scale_range" in d:  # defensive: never expected here
        d["nuisance_scale_range"] = tuple(d["nuisance_scale_range"])
    return cls(**d)


@dataclass
class Checkpoint:
    """Loadable training snapshot: config echo, parameters, optimizer moments,
    epoch, rng seed, class names, and the metrics history so far."""

    config: ModelConfig
    params: dict[str, Parameter]
    classes: list[str]
    epoch: int
    seed: int
    normalization: str = "com"
    seq_len: int = 64
    optimizer: ndcore.AdamState | None = None
    history: list[dict] = field(default_factory=list)

    def clone_params(self) -> dict[str, Parameter]:
        return {k: Parameter(v.data.copy(), k) for k, v in self.params.items()}


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "model_type": model_type_name(ckpt.config),
        "config": ckpt.config.__dict__,
        "classes": ckpt.classes,
        "epoch": ckpt.epoch,
        "seed": ckpt.seed,
        "normalization": ckpt.normalization,
        "seq_len": ckpt.seq_len,
        "params": {k: _encode_array(p.data) for k, p in ckpt.params.items()},
        "history": ckpt.history,
    }
    if ckpt.optimizer is not None:
        opt = ckpt.optimizer
        doc["optimizer"] = {
            "lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps,
            "t": opt.t,
            "m": {k: _encode_array(v) for k, v in opt.m.items()},
            "v": {k: _encode_array(v) for k, v in opt.v.items()},
        }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path) -> Checkpoint:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a {CHECKPOINT_FORMAT} file: {path}")
    cfg = config_from_dict(doc["model_type"], doc["config"])
    params = {k: Parameter(_decode_array(v), k) for k, v in doc["params"].items()}
    expected = param_shapes(cfg)
    got = {k: p.data.shape for k, p in params.items()}
    if {k: tuple(v) for k, v in got.items()} != expected:
        raise ValueError("checkpoint parameters do not match its config")
    optimizer = None
    if "optimizer" in doc:
        o = doc["optimizer"]
        optimizer = ndcore.AdamState(
            lr=o["lr"], beta1=o["beta1"], beta2=o["beta2"], eps=o["eps"], t=o["t"],
            m={k: _decode_array(v) for k, v in o["m"].items()},
            v={k: _decode_array(v) for k, v in o["v"].items()},
        )
    return Checkpoint(
        config=cfg,
        params=params,
        classes=list(doc["classes"]),
        epoch=doc["epoch"],
        seed=doc["seed"],
        normalization=doc.get("normalization", "com"),
        seq_len=doc.get("seq_len", 64),
        optimizer=optimizer,
        history=list(doc.get("history", [])),
    )
