"""Differentiable layers for the pose classifiers.

All layers operate on batched inputs; the LSTM cell and the cross-entropy
loss carry hand-derived backward passes, everything else composes autodiff
primitives. Every gradient here is covered by finite_difference_check.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .tensor import Tensor, as_tensor, concat, exp, relu, sqrt, stack

_MASK_NEG = -1e30  # additive bias that removes masked keys from attention


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """y = x @ w + b with broadcast over leading axes of x."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.shape[-1] != w.shape[0]:
        raise ValueError(f"linear shape mismatch: x {x.shape} vs w {w.shape}")
    if b.shape != (w.shape[1],):
        raise ValueError(f"linear bias shape {b.shape} does not match w {w.shape}")
    return x @ w + b


@dataclass
class LSTMWeights:
    """Gate weights in i, f, g, o order; two bias vectors per stack."""

    w_ih: Tensor  # (D, 4H)
    w_hh: Tensor  # (H, 4H)
    b_ih: Tensor  # (4H,)
    b_hh: Tensor  # (4H,)

    @property
    def hidden_dim(self) -> int:
        return self.w_hh.shape[0]

    def tensors(self):
        return [getattr(self, f.name) for f in fields(self)]


def lstm_step(x_t: Tensor, h_prev: Tensor, c_prev: Tensor, weights: LSTMWeights):
    """One LSTM cell update; returns (h_t, c_t).

    Accepts (B, D) batches or single (D,) vectors. Fused forward/backward:
    the cell is one graph node emitting packed [h, c].
    """
    x_t, h_prev, c_prev = as_tensor(x_t), as_tensor(h_prev), as_tensor(c_prev)
    single = x_t.ndim == 1
    if single:
        x_t, h_prev, c_prev = x_t.reshape(1, -1), h_prev.reshape(1, -1), c_prev.reshape(1, -1)
    w = weights
    H = w.hidden_dim
    if x_t.shape[-1] != w.w_ih.shape[0] or h_prev.shape[-1] != H or c_prev.shape[-1] != H:
        raise ValueError(
            f"lstm_step shape mismatch: x {x_t.shape}, h {h_prev.shape}, c {c_prev.shape}"
        )

    z = x_t.data @ w.w_ih.data + w.b_ih.data + h_prev.data @ w.w_hh.data + w.b_hh.data
    i = _sig(z[:, :H])
    f = _sig(z[:, H : 2 * H])
    g = np.tanh(z[:, 2 * H : 3 * H])
    o = _sig(z[:, 3 * H :])
    c = f * c_prev.data + i * g
    tc = np.tanh(c)
    h = o * tc

    xd, hd, cd = x_t.data, h_prev.data, c_prev.data

    def bw(up):
        dh, dc_up = up[:, :H], up[:, H:]
        do = dh * tc
        dct = dc_up + dh * o * (1.0 - tc * tc)
        dz = np.concatenate(
            [
                dct * g * i * (1.0 - i),
                dct * cd * f * (1.0 - f),
                dct * i * (1.0 - g * g),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        db = dz.sum(axis=0)
        return (
            dz @ w.w_ih.data.T,
            dz @ w.w_hh.data.T,
            dct * f,
            xd.T @ dz,
            hd.T @ dz,
            db,
            db,
        )

    packed = Tensor._result(
        np.concatenate([h, c], axis=1),
        (x_t, h_prev, c_prev, w.w_ih, w.w_hh, w.b_ih, w.b_hh),
        bw,
    )
    h_t, c_t = packed[:, :H], packed[:, H:]
    if single:
        h_t, c_t = h_t.reshape(-1), c_t.reshape(-1)
    return h_t, c_t


def _sig(v):
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def lstm_sequence(seq: Tensor, weights: LSTMWeights, reverse: bool = False) -> Tensor:
    """Run an LSTM over time; (B, T, D) -> (B, T, H)."""
    seq = as_tensor(seq)
    if seq.ndim != 3:
        raise ValueError(f"lstm_sequence expects (B, T, D), got {seq.shape}")
    B, T, _ = seq.shape
    H = weights.hidden_dim
    h = Tensor(np.zeros((B, H)))
    c = Tensor(np.zeros((B, H)))
    steps = range(T - 1, -1, -1) if reverse else range(T)
    outputs: list[Tensor | None] = [None] * T
    for t in steps:
        h, c = lstm_step(seq[:, t, :], h, c, weights)
        outputs[t] = h
    return stack(outputs, axis=1)


def bilstm(seq: Tensor, weights_fwd: LSTMWeights, weights_bwd: LSTMWeights) -> Tensor:
    """Bidirectional LSTM; per-step concat of forward and backward states.

    Accepts (T, D) or (B, T, D); returns (..., T, 2H).
    """
    seq = as_tensor(seq)
    single = seq.ndim == 2
    if single:
        seq = seq.reshape(1, *seq.shape)
    fwd = lstm_sequence(seq, weights_fwd)
    bwd = lstm_sequence(seq, weights_bwd, reverse=True)
    out = concat([fwd, bwd], axis=-1)
    return out.reshape(out.shape[1:]) if single else out


@dataclass
class EncoderLayerParams:
    """One transformer encoder layer: MHA + FFN with post-layer-norm."""

    w_q: Tensor
    b_q: Tensor
    w_k: Tensor
    b_k: Tensor
    w_v: Tensor
    b_v: Tensor
    w_o: Tensor
    b_o: Tensor
    ln1_gamma: Tensor
    ln1_beta: Tensor
    w_ff1: Tensor
    b_ff1: Tensor
    w_ff2: Tensor
    b_ff2: Tensor
    ln2_gamma: Tensor
    ln2_beta: Tensor

    def tensors(self):
        return [getattr(self, f.name) for f in fields(self)]


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    return xc / sqrt(var + eps) * gamma + beta


def _softmax_lastaxis(x: Tensor) -> Tensor:
    shift = x - x.data.max(axis=-1, keepdims=True)  # detached max: constant shift
    e = exp(shift)
    return e / e.sum(axis=-1, keepdims=True)


def encoder_layer(
    x: Tensor,
    params: EncoderLayerParams,
    n_heads: int,
    mask: np.ndarray,
    dropout_rate: float = 0.0,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Masked multi-head self-attention block.

    ``mask`` holds True at valid positions; masked keys receive a large
    negative additive bias before the softmax. Accepts (T, d) or (B, T, d).
    The optional dropout applies at the two standard sites (after attention
    projection and after the feed-forward), before each residual add.
    """
    x = as_tensor(x)
    single = x.ndim == 2
    if single:
        x = x.reshape(1, *x.shape)
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim == 1:
        mask = mask[None, :]
    B, T, d_model = x.shape
    if d_model % n_heads != 0:
        raise ValueError(f"d_model {d_model} not divisible by n_heads {n_heads}")
    if mask.shape != (B, T):
        raise ValueError(f"mask shape {mask.shape} does not match batch {(B, T)}")
    d_head = d_model // n_heads

    def split_heads(t):
        return t.reshape(B, T, n_heads, d_head).swapaxes(1, 2)  # (B, h, T, dh)

    q = split_heads(linear(x, params.w_q, params.b_q))
    k = split_heads(linear(x, params.w_k, params.b_k))
    v = split_heads(linear(x, params.w_v, params.b_v))

    scores = (q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(d_head))
    bias = np.where(mask, 0.0, _MASK_NEG)[:, None, None, :]
    attn = _softmax_lastaxis(scores + bias)
    ctx = (attn @ v).swapaxes(1, 2).reshape(B, T, d_model)
    ctx = linear(ctx, params.w_o, params.b_o)
    ctx = dropout(ctx, dropout_rate, training, rng)
    x = layer_norm(x + ctx, params.ln1_gamma, params.ln1_beta)

    ff = linear(relu(linear(x, params.w_ff1, params.b_ff1)), params.w_ff2, params.b_ff2)
    ff = dropout(ff, dropout_rate, training, rng)
    x = layer_norm(x + ff, params.ln2_gamma, params.ln2_beta)
    return x.reshape(x.shape[1:]) if single else x


def positional_encoding(T: int, d_model: int) -> np.ndarray:
    """Sinusoidal encoding: PE[p, 2i] = sin(p / 10000^(2i/d)), PE[p, 2i+1] = cos."""
    if d_model % 2 != 0:
        raise ValueError(f"d_model must be even, got {d_model}")
    pos = np.arange(T, dtype=np.float64)[:, None]
    i = np.arange(d_model // 2, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, 2.0 * i / d_model)
    pe = np.empty((T, d_model))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe


def dropout(
    x: Tensor, rate: float, training: bool, rng: np.random.Generator | None = None
) -> Tensor:
    """Inverted dropout: zero with probability rate, scale survivors by 1/(1-rate).

    Identity (the same tensor) at inference or rate 0.
    """
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return as_tensor(x)
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    x = as_tensor(x)
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * Tensor(keep)


def masked_mean_pool(seq: Tensor, mask: np.ndarray) -> Tensor:
    """Mean over time of positions where mask is True; padding never leaks.

    Accepts (T, D) with mask (T,) or (B, T, D) with mask (B, T).
    """
    seq = as_tensor(seq)
    single = seq.ndim == 2
    if single:
        seq = seq.reshape(1, *seq.shape)
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim == 1:
        mask = mask[None, :]
    if mask.shape != seq.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} does not match sequence {seq.shape}")
    counts = mask.sum(axis=1)
    if (counts == 0).any():
        raise ValueError("masked_mean_pool: a row has no valid positions")
    total = (seq * Tensor(mask[:, :, None].astype(np.float64))).sum(axis=1)
    pooled = total * Tensor(1.0 / counts[:, None])
    return pooled.reshape(pooled.shape[1:]) if single else pooled


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax on plain arrays (for metrics/inference)."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray):
    """Mean negative log-likelihood; returns (loss tensor, dloss/dlogits array).

    The gradient is (softmax - onehot) / N, also used as the backward rule.
    """
    logits = as_tensor(logits)
    z = logits.data
    if z.ndim != 2:
        raise ValueError(f"logits must be (N, C), got {z.shape}")
    n, c = z.shape
    labels = np.asarray(labels)
    if labels.shape != (n,) or not np.issubdtype(labels.dtype, np.integer):
        raise ValueError("labels must be an int array of shape (N,)")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"label out of range [0, {c})")

    m = z.max(axis=1, keepdims=True)
    shifted = z - m
    lse = np.log(np.exp(shifted).sum(axis=1))
    loss_val = float(np.mean(lse - shifted[np.arange(n), labels]))

    p = softmax(z)
    grad = p.copy()
    grad[np.arange(n), labels] -= 1.0
    grad /= n

    loss = Tensor._result(np.float64(loss_val), (logits,), lambda g: (g * grad,))
    return loss, grad.copy()
