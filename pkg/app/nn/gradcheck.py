"""Central finite-difference gradient checking."""

from typing import Callable, Optional

import numpy as np
import structlog

from app.errors import DomainError
from app.nn.params import ParamStore
from app.nn.tensor import Tensor, no_grad

logger = structlog.get_logger()


def _loss_value(f: Callable[[ParamStore], Tensor], store: ParamStore) -> float:
    with no_grad():
        value = float(np.sum(f(store).data))
    if not np.isfinite(value):
        raise DomainError(f"grad_check: non-finite loss {value}")
    return value


def grad_check(f: Callable[[ParamStore], Tensor], store: ParamStore, eps: float = 1e-5,
               max_entries: Optional[int] = None, seed: int = 0) -> float:
    """
    Max over checked entries of |analytic - numeric| / max(1, |analytic|).

    `f` must be deterministic in the store (eval-mode dropout or a fixed step).
    `max_entries` caps the entries checked per parameter, sampled with `seed`.
    """
    if not 0.0 < eps <= 1e-2:
        raise DomainError(f"grad_check: eps must lie in (0, 1e-2], got {eps}")

    store.zero_grad()
    loss = f(store)
    if not np.all(np.isfinite(loss.data)):
        raise DomainError("grad_check: non-finite loss")
    if loss.requires_grad:
        loss.backward()

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, param in store.items():
        analytic = param.grad if param.grad is not None else np.zeros_like(param.data)
        flat = param.data.reshape(-1)
        indices = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            indices = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        for index in indices:
            original = flat[index]
            flat[index] = original + eps
            plus = _loss_value(f, store)
            flat[index] = original - eps
            minus = _loss_value(f, store)
            flat[index] = original
            numeric = (plus - minus) / (2.0 * eps)
            a = analytic.reshape(-1)[index]
            worst = max(worst, abs(a - numeric) / max(1.0, abs(a)))
        logger.debug("grad_check_param", name=name, checked=len(indices), max_error=worst)
    return float(worst)
