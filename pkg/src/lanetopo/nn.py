"""Dense numeric primitives with hand-written backward passes.

All parameters are float64 numpy arrays initialised from a seeded generator
with the uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] convention. Forward
functions come in two flavours: a plain one, and a *_cached one that records
the intermediates the matching backward function needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit as sigmoid

LN_EPS = 1e-5
MASK_EPS = 1e-6


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class MlpParams:
    """Weights/biases for a stack of affine layers with ReLU between them.

    widths (d0, d1, ..., dk) gives k layers; the last layer has no
    activation. A single pair of widths is just an affine map, and an empty
    layer list is the identity.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(cls, widths: tuple[int, ...], rng: np.random.Generator) -> "MlpParams":
        ws, bs = [], []
        for d_in, d_out in zip(widths[:-1], widths[1:]):
            ws.append(uniform_init(rng, (d_in, d_out), d_in))
            bs.append(uniform_init(rng, (d_out,), d_in))
        return cls(weights=ws, biases=bs)

    def variables(self, prefix: str) -> dict[str, np.ndarray]:
        out = {}
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}.w{l}"] = w
            out[f"{prefix}.b{l}"] = b
        return out

    @property
    def n_layers(self) -> int:
        return len(self.weights)


def mlp_forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    h = x
    last = params.n_layers - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if l != last:
            h = np.maximum(h, 0.0)
    return h


def mlp_forward_cached(params: MlpParams, x: np.ndarray):
    """Forward pass keeping layer inputs and pre-activations for backward."""
    h = x
    inputs, preacts = [], []
    last = params.n_layers - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        z = h @ w + b
        preacts.append(z)
        h = np.maximum(z, 0.0) if l != last else z
    return h, (inputs, preacts)


def mlp_backward(params: MlpParams, cache, gy: np.ndarray):
    """Gradients of a scalar loss wrt the MLP input and all parameters.

    Returns (gx, grads) where grads maps layer index to (gw, gb). ReLU uses
    the z > 0 subgradient.
    """
    inputs, preacts = cache
    last = params.n_layers - 1
    g = gy
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * params.n_layers
    for l in range(last, -1, -1):
        if l != last:
            g = g * (preacts[l] > 0.0)
        h = inputs[l]
        gw = h.reshape(-1, h.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        gb = g.reshape(-1, g.shape[-1]).sum(axis=0)
        grads[l] = (gw, gb)
        g = g @ params.weights[l].T
    return g, grads


def mlp_grad_vars(prefix: str, grads) -> dict[str, np.ndarray]:
    out = {}
    for l, (gw, gb) in enumerate(grads):
        out[f"{prefix}.w{l}"] = gw
        out[f"{prefix}.b{l}"] = gb
    return out


def apply_mlp_update(params: MlpParams, grads, lr: float) -> None:
    for l, (gw, gb) in enumerate(grads):
        params.weights[l] -= lr * gw
        params.biases[l] -= lr * gb


def layer_norm_forward(x: np.ndarray, gain: np.ndarray, bias: np.ndarray):
    """Row-wise layer norm with learnable affine. eps sits inside the sqrt."""
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * inv
    y = gain * xhat + bias
    return y, (xhat, inv)


def layer_norm_backward(cache, gain: np.ndarray, gy: np.ndarray):
    xhat, inv = cache
    c = xhat.shape[-1]
    g_gain = (gy * xhat).reshape(-1, c).sum(axis=0)
    g_bias = gy.reshape(-1, c).sum(axis=0)
    gxhat = gy * gain
    gx = inv * (
        gxhat
        - gxhat.mean(axis=-1, keepdims=True)
        - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return gx, g_gain, g_bias


def softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(s: np.ndarray, gs: np.ndarray) -> np.ndarray:
    return s * (gs - (gs * s).sum(axis=-1, keepdims=True))
