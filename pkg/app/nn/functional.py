"""
Kind-dispatched entry points over the tensor ops.

The model heads pick activations, merges and pooling layers by name through
these; parameterised helpers (dense, lstm, depthwise_conv2d) are called directly.
"""

from typing import Any, Callable, Dict

from app.errors import ShapeError
from app.nn import layers
from app.nn.tensor import Tensor, concat, gelu, linear, matmul, relu, sigmoid, softmax, tanh

ACTIVATIONS: Dict[str, Callable[[Tensor], Tensor]] = {
    "linear": linear,
    "relu": relu,
    "gelu": gelu,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "softmax_lastdim": softmax,
}


def activation(x: Tensor, kind: str) -> Tensor:
    if kind not in ACTIVATIONS:
        raise ValueError(f"Unknown activation '{kind}'")
    return ACTIVATIONS[kind](x)


def _broadcastable(a: Tensor, b: Tensor) -> bool:
    for da, db in zip(reversed(a.shape), reversed(b.shape)):
        if da != db and 1 not in (da, db):
            return False
    return True


def linalg(a: Tensor, b: Tensor, kind: str) -> Tensor:
    if kind == "matmul":
        return matmul(a, b)
    if kind in ("add_broadcast", "mul_broadcast"):
        if not _broadcastable(a, b):
            raise ShapeError(f"{kind}: shapes {a.shape} and {b.shape} do not broadcast")
        return a + b if kind == "add_broadcast" else a * b
    if kind == "concat_lastdim":
        return concat([a, b], axis=-1)
    raise ValueError(f"Unknown linalg kind '{kind}'")


STRUCTURED: Dict[str, Callable[..., Tensor]] = {
    "layer_norm": layers.layer_norm,
    "dropout": layers.dropout,
    "conv2d": layers.conv2d,
    "depthwise_separable_conv": layers.depthwise_separable_conv,
    "global_avg_pool": layers.global_avg_pool,
}


def structured_layer(x: Any, kind: str, **params) -> Tensor:
    """`max_pool_set` takes a sequence of tensors as `x`"""
    if kind == "max_pool_set":
        return layers.max_pool_set(x)
    if kind not in STRUCTURED:
        raise ValueError(f"Unknown structured layer '{kind}'")
    return STRUCTURED[kind](x, **params)
