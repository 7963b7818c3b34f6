"""
Structured layers on NHWC tensors: layer norm, dropout, convolutions, pooling,
dense and LSTM. Convolutions use sliding windows and einsum with explicit
backward closures.
"""

import hashlib
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from app.errors import ShapeError
from app.nn.tensor import Tensor, concat, matmul, sigmoid, stack, tanh


# ============================================================================
# Counter-based random streams
# ============================================================================


def _key(seed: int, path: str) -> int:
    digest = hashlib.blake2b(f"{seed}|{path}".encode("utf-8"), digest_size=16).digest()
    return int.from_bytes(digest, "little")


def counter_rng(seed: int, path: str, step: int = 0) -> np.random.Generator:
    """Philox stream keyed by (seed, path) and positioned at `step`"""
    return np.random.Generator(np.random.Philox(key=_key(seed, path), counter=step))


# ============================================================================
# Normalization and dropout
# ============================================================================


def normalize(x: Tensor, eps: float = 1e-12) -> Tensor:
    """Zero-mean, unit-variance over the last axis (the pre-affine layer norm)"""
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv

    def backward(g):
        gm = g.mean(axis=-1, keepdims=True)
        gx = (g * xhat).mean(axis=-1, keepdims=True)
        x._accumulate(inv * (g - gm - xhat * gx))

    return Tensor._make(xhat, (x,), "normalize", backward)


def layer_norm(x: Tensor, gamma: Optional[Tensor] = None, beta: Optional[Tensor] = None,
               eps: float = 1e-12) -> Tensor:
    out = normalize(x, eps)
    if gamma is not None:
        out = out * gamma
    if beta is not None:
        out = out + beta
    return out


def dropout(x: Tensor, p: float, training: bool, seed: int = 0, path: str = "", step: int = 0) -> Tensor:
    """Inverted dropout; identity outside training or when p == 0"""
    if not training or p <= 0.0:
        return x
    keep = counter_rng(seed, path, step).random(x.shape) >= p
    return x * Tensor(keep / (1.0 - p))


# ============================================================================
# Convolutions (NHWC)
# ============================================================================


def _pad_amounts(size: int, kernel: int, stride: int, padding: str) -> Tuple[int, int, int]:
    if padding == "valid":
        return 0, 0, size
    if padding != "same":
        raise ValueError(f"Unknown padding '{padding}'")
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return total // 2, total - total // 2, size + total


def _windows(x: np.ndarray, kh: int, kw: int, stride: int, padding: str):
    n, h, w, c = x.shape
    top, bottom, hp = _pad_amounts(h, kh, stride, padding)
    left, right, wp = _pad_amounts(w, kw, stride, padding)
    if kh > hp or kw > wp:
        raise ShapeError(
            f"kernel {(kh, kw)} larger than padded input {(hp, wp)} (input shape {x.shape})"
        )
    xp = np.pad(x, ((0, 0), (top, bottom), (left, right), (0, 0)))
    patches = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    return xp, patches, (top, left)


def _scatter_windows(g_per_tap, xp_shape, kh, kw, stride, ho, wo, offset, in_shape):
    dxp = np.zeros(xp_shape)
    for i in range(kh):
        for j in range(kw):
            dxp[:, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride, :] += g_per_tap(i, j)
    top, left = offset
    return dxp[:, top:top + in_shape[1], left:left + in_shape[2], :]


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1,
           padding: str = "same") -> Tensor:
    """x: (N, H, W, Cin); weight: (kh, kw, Cin, Cout)"""
    if x.ndim != 4:
        raise ShapeError(f"conv2d expects (batch, height, width, channels), got {x.shape}")
    kh, kw, cin, _ = weight.shape
    if x.shape[-1] != cin:
        raise ShapeError(f"conv2d: input channels {x.shape} do not match weight {weight.shape}")
    xp, patches, offset = _windows(x.data, kh, kw, stride, padding)
    out = np.einsum("nhwcij,ijco->nhwo", patches, weight.data, optimize=True)
    ho, wo = out.shape[1], out.shape[2]

    def backward(g):
        weight._accumulate(np.einsum("nhwcij,nhwo->ijco", patches, g, optimize=True))
        if x.requires_grad:
            x._accumulate(_scatter_windows(
                lambda i, j: np.einsum("nhwo,co->nhwc", g, weight.data[i, j]),
                xp.shape, kh, kw, stride, ho, wo, offset, x.shape,
            ))

    result = Tensor._make(out, (x, weight), "conv2d", backward)
    return result + bias if bias is not None else result


def depthwise_conv2d(x: Tensor, weight: Tensor, stride: int = 1, padding: str = "same") -> Tensor:
    """Per-channel spatial convolution; weight: (kh, kw, C)"""
    if x.ndim != 4:
        raise ShapeError(f"depthwise_conv2d expects (batch, height, width, channels), got {x.shape}")
    kh, kw, c = weight.shape
    if x.shape[-1] != c:
        raise ShapeError(f"depthwise_conv2d: input {x.shape} does not match weight {weight.shape}")
    xp, patches, offset = _windows(x.data, kh, kw, stride, padding)
    out = np.einsum("nhwcij,ijc->nhwc", patches, weight.data, optimize=True)
    ho, wo = out.shape[1], out.shape[2]

    def backward(g):
        weight._accumulate(np.einsum("nhwcij,nhwc->ijc", patches, g, optimize=True))
        if x.requires_grad:
            x._accumulate(_scatter_windows(
                lambda i, j: g * weight.data[i, j],
                xp.shape, kh, kw, stride, ho, wo, offset, x.shape,
            ))

    return Tensor._make(out, (x, weight), "depthwise_conv2d", backward)


def pointwise_conv(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """1x1 convolution; weight: (Cin, Cout)"""
    out = matmul(x, weight)
    return out + bias if bias is not None else out


def depthwise_separable_conv(x: Tensor, depthwise: Tensor, pointwise: Tensor,
                             bias: Optional[Tensor] = None, stride: int = 1,
                             padding: str = "same") -> Tensor:
    return pointwise_conv(depthwise_conv2d(x, depthwise, stride, padding), pointwise, bias)


def global_avg_pool(x: Tensor, keepdims: bool = False) -> Tensor:
    if x.ndim != 4:
        raise ShapeError(f"global_avg_pool expects a 4-D map, got {x.shape}")
    return x.mean(axis=(1, 2), keepdims=keepdims)


def max_pool_set(tensors: Sequence[Tensor]) -> Tensor:
    """Elementwise max over a set of equally shaped tensors"""
    return stack(tensors, axis=0).max(axis=0)


# ============================================================================
# Dense and recurrent
# ============================================================================


def dense(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    out = matmul(x, weight)
    return out + bias if bias is not None else out


def lstm(x: Tensor, w_input: Tensor, w_hidden: Tensor, bias: Tensor, reverse: bool = False) -> Tensor:
    """
    Unidirectional LSTM over (N, T, D); returns hidden states (N, T, U).

    Gate order in the packed weights is input, forget, cell, output.
    """
    n, steps, _ = x.shape
    units = w_hidden.shape[0]
    projected = matmul(x, w_input) + bias
    h = Tensor(np.zeros((n, units)))
    c = Tensor(np.zeros((n, units)))
    outputs: List[Optional[Tensor]] = [None] * steps
    order = range(steps - 1, -1, -1) if reverse else range(steps)
    for t in order:
        z = projected[:, t, :] + matmul(h, w_hidden)
        i = sigmoid(z[:, :units])
        f = sigmoid(z[:, units:2 * units])
        g = tanh(z[:, 2 * units:3 * units])
        o = sigmoid(z[:, 3 * units:])
        c = f * c + i * g
        h = o * tanh(c)
        outputs[t] = h
    return stack(outputs, axis=1)


def lstm_step(x_t: Tensor, h: Tensor, c: Tensor, w_input: Tensor, w_hidden: Tensor,
              bias: Tensor) -> Tuple[Tensor, Tensor]:
    """One LSTM cell update for decoders that feed inputs step by step"""
    units = w_hidden.shape[0]
    z = matmul(x_t, w_input) + matmul(h, w_hidden) + bias
    i = sigmoid(z[:, :units])
    f = sigmoid(z[:, units:2 * units])
    g = tanh(z[:, 2 * units:3 * units])
    o = sigmoid(z[:, 3 * units:])
    c = f * c + i * g
    return o * tanh(c), c


def bidirectional_lstm(x: Tensor, forward_params: Tuple[Tensor, Tensor, Tensor],
                       backward_params: Tuple[Tensor, Tensor, Tensor]) -> Tensor:
    """Concatenate forward and backward hidden states along the feature axis"""
    fwd = lstm(x, *forward_params)
    bwd = lstm(x, *backward_params, reverse=True)
    return concat([fwd, bwd], axis=-1)


def last_step(sequence: Tensor) -> Tensor:
    return sequence[:, -1, :]
