"""Attention blocks for lane and connected-lane queries.

Two blocks live here, both pure numpy with analytic backward passes:

* self_attention: multi-head self-attention inside one query group, with a
  positional embedding added to queries and keys (values are taken from the
  raw input), a residual connection, and a layer norm.
* masked_cross_attention: single-head cross-attention from lane queries to
  connected-lane queries whose logits are biased by log(S), where S is a
  sigmoid mask derived from the geometric correlation matrix.

The mask path (sigmoid_mask) is an elementwise MLP + sigmoid with a numeric
floor so the log never sees 0. One parameter set serves every layer that
needs the mask; callers share the instance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn import (
    LN_EPS,
    MASK_EPS,
    MlpParams,
    layer_norm_backward,
    layer_norm_forward,
    mlp_backward,
    mlp_forward,
    mlp_forward_cached,
    sigmoid,
    softmax_backward,
    softmax_rows,
    uniform_init,
)


@dataclass(frozen=True)
class ModelDims:
    """Feature width and head count used across the query stack."""

    c: int = 32
    n_heads: int = 4

    def __post_init__(self):
        if self.c % self.n_heads != 0:
            raise ValueError(f"width {self.c} not divisible by {self.n_heads} heads")


@dataclass
class SelfAttentionParams:
    wq: np.ndarray
    bq: np.ndarray
    wk: np.ndarray
    bk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    wo: np.ndarray
    bo: np.ndarray
    ln_gain: np.ndarray
    ln_bias: np.ndarray
    n_heads: int

    @classmethod
    def init(cls, dims: ModelDims, rng: np.random.Generator) -> "SelfAttentionParams":
        c = dims.c
        mk = lambda: uniform_init(rng, (c, c), c)
        mb = lambda: uniform_init(rng, (c,), c)
        return cls(
            wq=mk(), bq=mb(), wk=mk(), bk=mb(), wv=mk(), bv=mb(), wo=mk(), bo=mb(),
            ln_gain=np.ones(c), ln_bias=np.zeros(c), n_heads=dims.n_heads,
        )

    def variables(self, prefix: str) -> dict[str, np.ndarray]:
        return {
            f"{prefix}.wq": self.wq, f"{prefix}.bq": self.bq,
            f"{prefix}.wk": self.wk, f"{prefix}.bk": self.bk,
            f"{prefix}.wv": self.wv, f"{prefix}.bv": self.bv,
            f"{prefix}.wo": self.wo, f"{prefix}.bo": self.bo,
            f"{prefix}.ln_gain": self.ln_gain, f"{prefix}.ln_bias": self.ln_bias,
        }


def _split_heads(x: np.ndarray, h: int) -> np.ndarray:
    n, c = x.shape
    return x.reshape(n, h, c // h).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    h, n, dh = x.shape
    return x.transpose(1, 0, 2).reshape(n, h * dh)


def self_attention_forward(params: SelfAttentionParams, q: np.ndarray, p: np.ndarray):
    """LN(MultiHeadAttn(q + p as queries/keys, q as values) + q), with cache."""
    if q.shape != p.shape:
        raise ValueError(f"query/positional shapes differ: {q.shape} vs {p.shape}")
    h = params.n_heads
    src = q + p
    xq = src @ params.wq + params.bq
    xk = src @ params.wk + params.bk
    xv = q @ params.wv + params.bv
    qh, kh, vh = _split_heads(xq, h), _split_heads(xk, h), _split_heads(xv, h)
    dh = qh.shape[-1]
    z = qh @ kh.transpose(0, 2, 1) / np.sqrt(dh)
    a = softmax_rows(z)
    ctx = _merge_heads(a @ vh)
    o = ctx @ params.wo + params.bo
    r = o + q
    y, ln_cache = layer_norm_forward(r, params.ln_gain, params.ln_bias)
    cache = (q, src, xq, xk, xv, a, ctx, ln_cache)
    return y, cache


def self_attention_backward(params: SelfAttentionParams, cache, gy: np.ndarray):
    """Gradients wrt q, p, and all parameters (dict keyed like variables())."""
    q, src, xq, xk, xv, a, ctx, ln_cache = cache
    h = params.n_heads
    dh = xq.shape[-1] // h

    gr, g_gain, g_bias = layer_norm_backward(ln_cache, params.ln_gain, gy)
    go = gr
    gq = gr.copy()  # residual branch

    g_ctx = go @ params.wo.T
    g_wo = ctx.T @ go
    g_bo = go.sum(axis=0)

    gch = _split_heads(g_ctx, h)
    vh = _split_heads(xv, h)
    qh, kh = _split_heads(xq, h), _split_heads(xk, h)
    ga = gch @ vh.transpose(0, 2, 1)
    gvh = a.transpose(0, 2, 1) @ gch
    gz = softmax_backward(a, ga)
    gqh = gz @ kh / np.sqrt(dh)
    gkh = gz.transpose(0, 2, 1) @ qh / np.sqrt(dh)

    gxq, gxk, gxv = _merge_heads(gqh), _merge_heads(gkh), _merge_heads(gvh)
    g_wq, g_bq = src.T @ gxq, gxq.sum(axis=0)
    g_wk, g_bk = src.T @ gxk, gxk.sum(axis=0)
    g_wv, g_bv = q.T @ gxv, gxv.sum(axis=0)

    gsrc = gxq @ params.wq.T + gxk @ params.wk.T
    gq += gsrc + gxv @ params.wv.T
    gp = gsrc

    grads = {
        "wq": g_wq, "bq": g_bq, "wk": g_wk, "bk": g_bk,
        "wv": g_wv, "bv": g_bv, "wo": g_wo, "bo": g_bo,
        "ln_gain": g_gain, "ln_bias": g_bias,
    }
    return gq, gp, grads


def self_attention(q: np.ndarray, p: np.ndarray, params: SelfAttentionParams) -> np.ndarray:
    y, _ = self_attention_forward(params, q, p)
    return y


@dataclass
class SigmoidMaskParams:
    """Shared elementwise MLP mapping a correlation distance to a mask value."""

    mlp: MlpParams

    @classmethod
    def init(cls, hidden: int, rng: np.random.Generator) -> "SigmoidMaskParams":
        return cls(mlp=MlpParams.init((1, hidden, 1), rng))

    def variables(self, prefix: str) -> dict[str, np.ndarray]:
        return self.mlp.variables(prefix)


def sigmoid_mask_forward(params: SigmoidMaskParams, d: np.ndarray):
    """S = clip(sigmoid(MLP(D)), MASK_EPS, 1), applied entrywise, with cache."""
    flat = d.reshape(-1, 1)
    logits, mlp_cache = mlp_forward_cached(params.mlp, flat)
    sg = sigmoid(logits)
    s = np.clip(sg, MASK_EPS, 1.0).reshape(d.shape)
    return s, (d.shape, mlp_cache, sg)


def sigmoid_mask_backward(params: SigmoidMaskParams, cache, gs: np.ndarray):
    shape, mlp_cache, sg = cache
    # the clip floor zeroes the gradient below MASK_EPS; the ceiling at 1 is
    # never strictly binding because sigmoid saturates with zero slope anyway
    g_logits = gs.reshape(-1, 1) * sg * (1.0 - sg) * (sg >= MASK_EPS)
    gd, mlp_grads = mlp_backward(params.mlp, mlp_cache, g_logits)
    return gd.reshape(shape), mlp_grads


def sigmoid_mask(d: np.ndarray, params: SigmoidMaskParams) -> np.ndarray:
    s, _ = sigmoid_mask_forward(params, d)
    return s


@dataclass
class CrossAttentionParams:
    """Single-head masked cross-attention: projections plus the output layer norm."""

    wq: np.ndarray
    bq: np.ndarray
    wk: np.ndarray
    bk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    ln_gain: np.ndarray
    ln_bias: np.ndarray

    @classmethod
    def init(cls, dims: ModelDims, rng: np.random.Generator) -> "CrossAttentionParams":
        c = dims.c
        mk = lambda: uniform_init(rng, (c, c), c)
        mb = lambda: uniform_init(rng, (c,), c)
        return cls(
            wq=mk(), bq=mb(), wk=mk(), bk=mb(), wv=mk(), bv=mb(),
            ln_gain=np.ones(c), ln_bias=np.zeros(c),
        )

    def variables(self, prefix: str) -> dict[str, np.ndarray]:
        return {
            f"{prefix}.wq": self.wq, f"{prefix}.bq": self.bq,
            f"{prefix}.wk": self.wk, f"{prefix}.bk": self.bk,
            f"{prefix}.wv": self.wv, f"{prefix}.bv": self.bv,
            f"{prefix}.ln_gain": self.ln_gain, f"{prefix}.ln_bias": self.ln_bias,
        }


def masked_cross_attention_forward(
    params: CrossAttentionParams,
    q: np.ndarray,
    qc: np.ndarray,
    s: np.ndarray | None,
):
    """LN(softmax(f_q(q) f_k(qc)^T / sqrt(C) + log S) f_v(qc) + q), with cache.

    s=None runs the unmasked block: no bias term is added at all, so an
    all-ones mask and no mask produce bitwise identical outputs (log 1 == 0).
    """
    n, c = q.shape
    if qc.ndim != 2 or qc.shape[0] == 0:
        raise ValueError(f"cross-attention needs at least one context row, got {qc.shape}")
    if qc.shape[1] != c:
        raise ValueError(f"feature widths differ: {q.shape} vs {qc.shape}")
    if s is not None and s.shape != (n, qc.shape[0]):
        raise ValueError(f"mask shape {s.shape} != ({n}, {qc.shape[0]})")
    xq = q @ params.wq + params.bq
    xk = qc @ params.wk + params.bk
    xv = qc @ params.wv + params.bv
    z = xq @ xk.T / np.sqrt(c)
    if s is not None:
        z = z + np.log(s)
    a = softmax_rows(z)
    ctx = a @ xv
    r = ctx + q
    y, ln_cache = layer_norm_forward(r, params.ln_gain, params.ln_bias)
    cache = (q, qc, s, xq, xk, xv, a, ln_cache)
    return y, cache


def masked_cross_attention_backward(params: CrossAttentionParams, cache, gy: np.ndarray):
    """Gradients wrt q, qc, the mask s, and all parameters."""
    q, qc, s, xq, xk, xv, a, ln_cache = cache
    c = q.shape[1]

    gr, g_gain, g_bias = layer_norm_backward(ln_cache, params.ln_gain, gy)
    g_ctx = gr
    gq = gr.copy()  # residual branch

    ga = g_ctx @ xv.T
    gxv = a.T @ g_ctx
    gz = softmax_backward(a, ga)
    gs = gz / s if s is not None else None

    gxq = gz @ xk / np.sqrt(c)
    gxk = gz.T @ xq / np.sqrt(c)

    g_wq, g_bq = q.T @ gxq, gxq.sum(axis=0)
    g_wk, g_bk = qc.T @ gxk, gxk.sum(axis=0)
    g_wv, g_bv = qc.T @ gxv, gxv.sum(axis=0)

    gq += gxq @ params.wq.T
    gqc = gxk @ params.wk.T + gxv @ params.wv.T

    grads = {
        "wq": g_wq, "bq": g_bq, "wk": g_wk, "bk": g_bk, "wv": g_wv, "bv": g_bv,
        "ln_gain": g_gain, "ln_bias": g_bias,
    }
    return gq, gqc, gs, grads


def masked_cross_attention(
    q: np.ndarray,
    qc: np.ndarray,
    s: np.ndarray | None,
    params: CrossAttentionParams,
) -> np.ndarray:
    y, _ = masked_cross_attention_forward(params, q, qc, s)
    return y
