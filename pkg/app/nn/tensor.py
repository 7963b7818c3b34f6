"""
Dense float64 tensors with reverse-mode automatic differentiation.

Every op records its parents and a closure that maps the output gradient to
parent gradients. `Tensor.backward()` walks the graph in reverse topological
order. Inside `no_grad()` no graph is recorded.
"""

from contextlib import contextmanager
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

from app.errors import DomainError, ShapeError

ArrayLike = Union[np.ndarray, float, int, Sequence]

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable graph recording (inference, finite differences)"""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back to `shape`"""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def check_finite(data: np.ndarray, op: str, allow_neg_inf: bool = False):
    if allow_neg_inf:
        bad = np.isnan(data) | (data == np.inf)
    else:
        bad = ~np.isfinite(data)
    if bad.any():
        raise DomainError(f"{op}: non-finite input ({int(bad.sum())} entries)")


class Tensor:
    """
    Row-major float64 array with optional gradient.

    `data` holds the values; `grad` is filled by `backward()` for every tensor
    with `requires_grad` that is reachable from the loss.
    """

    def __init__(self, values: ArrayLike, requires_grad: bool = False,
                 _parents: Tuple["Tensor", ...] = (), _op: str = ""):
        self.data = np.asarray(values, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self._op = _op

    # ------------------------------------------------------------------
    # Basic properties
    # ------------------------------------------------------------------

    @property
    def values(self) -> np.ndarray:
        return self.data

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op='{self._op}', requires_grad={self.requires_grad})"

    def __len__(self) -> int:
        return self.data.shape[0]

    # ------------------------------------------------------------------
    # Graph plumbing
    # ------------------------------------------------------------------

    @staticmethod
    def _make(data: np.ndarray, parents: Tuple["Tensor", ...], op: str,
              backward: Callable[[np.ndarray], None]) -> "Tensor":
        needs = _GRAD_ENABLED and any(p.requires_grad for p in parents)
        out = Tensor(data, requires_grad=needs, _parents=parents if needs else (), _op=op)
        if needs:
            out._backward = backward
        return out

    def _accumulate(self, grad: np.ndarray):
        if not self.requires_grad:
            return
        grad = _unbroadcast(np.asarray(grad, dtype=np.float64), self.shape)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad = self.grad + grad

    def backward(self, grad: Optional[ArrayLike] = None):
        """Reverse-mode sweep from this tensor"""
        if not self.requires_grad:
            raise DomainError("backward() called on a tensor that does not require grad")
        if grad is None:
            if self.size != 1:
                raise ShapeError(f"backward() without grad needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)

        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

        for node in order:
            if node.grad is None:
                node.grad = np.zeros_like(node.data)
        self.grad = self.grad + np.asarray(grad, dtype=np.float64).reshape(self.shape)

        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # ------------------------------------------------------------------
    # Arithmetic
    # ------------------------------------------------------------------

    def __add__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)

        def backward(g):
            self._accumulate(g)
            other._accumulate(g)

        return Tensor._make(self.data + other.data, (self, other), "add", backward)

    __radd__ = __add__

    def __sub__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)

        def backward(g):
            self._accumulate(g)
            other._accumulate(-g)

        return Tensor._make(self.data - other.data, (self, other), "sub", backward)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return as_tensor(other) - self

    def __mul__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)

        def backward(g):
            self._accumulate(g * other.data)
            other._accumulate(g * self.data)

        return Tensor._make(self.data * other.data, (self, other), "mul", backward)

    __rmul__ = __mul__

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)

        def backward(g):
            self._accumulate(g / other.data)
            other._accumulate(-g * self.data / (other.data ** 2))

        return Tensor._make(self.data / other.data, (self, other), "div", backward)

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return as_tensor(other) / self

    def __neg__(self) -> "Tensor":
        def backward(g):
            self._accumulate(-g)

        return Tensor._make(-self.data, (self,), "neg", backward)

    def __pow__(self, exponent: float) -> "Tensor":
        if not isinstance(exponent, (int, float)):
            raise TypeError("only scalar exponents are supported")

        def backward(g):
            self._accumulate(g * exponent * self.data ** (exponent - 1))

        return Tensor._make(self.data ** exponent, (self,), "pow", backward)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, index) -> "Tensor":
        out_data = self.data[index]

        def backward(g):
            full = np.zeros_like(self.data)
            np.add.at(full, index, g)
            self._accumulate(full)

        return Tensor._make(np.array(out_data, dtype=np.float64), (self,), "index", backward)

    # ------------------------------------------------------------------
    # Elementwise functions
    # ------------------------------------------------------------------

    def exp(self) -> "Tensor":
        out_data = np.exp(self.data)

        def backward(g):
            self._accumulate(g * out_data)

        return Tensor._make(out_data, (self,), "exp", backward)

    def log(self) -> "Tensor":
        if np.any(self.data <= 0):
            raise DomainError("log of a nonpositive value")

        def backward(g):
            self._accumulate(g / self.data)

        return Tensor._make(np.log(self.data), (self,), "log", backward)

    def sqrt(self) -> "Tensor":
        return self ** 0.5

    def abs(self) -> "Tensor":
        def backward(g):
            self._accumulate(g * np.sign(self.data))

        return Tensor._make(np.abs(self.data), (self,), "abs", backward)

    # ------------------------------------------------------------------
    # Reductions and reshaping
    # ------------------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, self.shape))

        return Tensor._make(np.sum(self.data, axis=axis, keepdims=keepdims), (self,), "sum", backward)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            count = self.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            count = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def max(self, axis: int, keepdims: bool = False) -> "Tensor":
        out_keep = np.max(self.data, axis=axis, keepdims=True)

        def backward(g):
            mask = (self.data == out_keep).astype(np.float64)
            mask = mask / mask.sum(axis=axis, keepdims=True)
            if not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(mask * g)

        out = out_keep if keepdims else np.squeeze(out_keep, axis=axis)
        return Tensor._make(out, (self,), "max", backward)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])

        def backward(g):
            self._accumulate(g.reshape(self.shape))

        return Tensor._make(self.data.reshape(shape), (self,), "reshape", backward)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = np.argsort(axes)

        def backward(g):
            self._accumulate(np.transpose(g, inverse))

        return Tensor._make(np.transpose(self.data, axes), (self,), "transpose", backward)

    def swapaxes(self, a: int, b: int) -> "Tensor":
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return self.transpose(tuple(axes))

    def masked_fill(self, mask: np.ndarray, value: float) -> "Tensor":
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), self.shape)

        def backward(g):
            self._accumulate(np.where(mask, 0.0, g))

        return Tensor._make(np.where(mask, value, self.data), (self,), "masked_fill", backward)


# ============================================================================
# Constructors
# ============================================================================


def as_tensor(value: Union[Tensor, ArrayLike]) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def zeros(shape: Tuple[int, ...], requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=requires_grad)


# ============================================================================
# Linear algebra and joins
# ============================================================================


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} are not conformable")

    def backward(g):
        a._accumulate(np.matmul(g, np.swapaxes(b.data, -1, -2)))
        b._accumulate(np.matmul(np.swapaxes(a.data, -1, -2), g))

    return Tensor._make(np.matmul(a.data, b.data), (a, b), "matmul", backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ndim = tensors[0].ndim
    ax = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != ax):
            raise ShapeError(
                f"concat: shapes {tensors[0].shape} and {t.shape} differ off axis {axis}"
            )
    sizes = [t.shape[ax] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            index = [slice(None)] * ndim
            index[ax] = slice(lo, hi)
            t._accumulate(g[tuple(index)])

    data = np.concatenate([t.data for t in tensors], axis=ax)
    return Tensor._make(data, tuple(tensors), "concat", backward)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    for t in tensors[1:]:
        if t.shape != tensors[0].shape:
            raise ShapeError(f"stack: shapes {tensors[0].shape} and {t.shape} differ")

    def backward(g):
        for i, t in enumerate(tensors):
            t._accumulate(np.take(g, i, axis=axis))

    data = np.stack([t.data for t in tensors], axis=axis)
    return Tensor._make(data, tuple(tensors), "stack", backward)


def where(mask: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    mask = np.asarray(mask, dtype=bool)

    def backward(g):
        a._accumulate(np.where(mask, g, 0.0))
        b._accumulate(np.where(mask, 0.0, g))

    return Tensor._make(np.where(mask, a.data, b.data), (a, b), "where", backward)


# ============================================================================
# Activations
# ============================================================================


def relu(x: Tensor) -> Tensor:
    check_finite(x.data, "relu")

    def backward(g):
        x._accumulate(g * (x.data > 0))

    return Tensor._make(np.maximum(x.data, 0.0), (x,), "relu", backward)


def gelu(x: Tensor) -> Tensor:
    """Exact gelu: 0.5x(1 + erf(x/sqrt 2))"""
    check_finite(x.data, "gelu")
    cdf = 0.5 * (1.0 + special.erf(x.data / np.sqrt(2.0)))
    pdf = np.exp(-0.5 * x.data ** 2) / np.sqrt(2.0 * np.pi)

    def backward(g):
        x._accumulate(g * (cdf + x.data * pdf))

    return Tensor._make(x.data * cdf, (x,), "gelu", backward)


def tanh(x: Tensor) -> Tensor:
    check_finite(x.data, "tanh")
    out = np.tanh(x.data)

    def backward(g):
        x._accumulate(g * (1.0 - out ** 2))

    return Tensor._make(out, (x,), "tanh", backward)


def sigmoid(x: Tensor) -> Tensor:
    check_finite(x.data, "sigmoid")
    out = special.expit(x.data)

    def backward(g):
        x._accumulate(g * out * (1.0 - out))

    return Tensor._make(out, (x,), "sigmoid", backward)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last dimension; -inf entries (masks) get weight 0"""
    check_finite(x.data, "softmax", allow_neg_inf=True)
    shifted = x.data - np.max(x.data, axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        x._accumulate(out * (g - np.sum(g * out, axis=-1, keepdims=True)))

    return Tensor._make(out, (x,), "softmax", backward)


def log_sigmoid(x: Tensor) -> Tensor:
    check_finite(x.data, "log_sigmoid")
    out = -np.logaddexp(0.0, -x.data)
    sig = special.expit(x.data)

    def backward(g):
        x._accumulate(g * (1.0 - sig))

    return Tensor._make(out, (x,), "log_sigmoid", backward)


def log_softmax(x: Tensor) -> Tensor:
    check_finite(x.data, "log_softmax")
    out = x.data - special.logsumexp(x.data, axis=-1, keepdims=True)
    soft = np.exp(out)

    def backward(g):
        x._accumulate(g - soft * np.sum(g, axis=-1, keepdims=True))

    return Tensor._make(out, (x,), "log_softmax", backward)


def linear(x: Tensor) -> Tensor:
    check_finite(x.data, "linear")
    return x
