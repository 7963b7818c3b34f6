"""Training losses."""

import numpy as np

from app.nn.tensor import Tensor, as_tensor, log_sigmoid, log_softmax


def mse(pred: Tensor, target) -> Tensor:
    target = as_tensor(np.asarray(target, dtype=np.float64).reshape(pred.shape))
    return ((pred - target) ** 2).mean()


def binary_cross_entropy_with_logits(logits: Tensor, target) -> Tensor:
    target = as_tensor(np.asarray(target, dtype=np.float64).reshape(logits.shape))
    return -(target * log_sigmoid(logits) + (1.0 - target) * log_sigmoid(-logits)).mean()


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """logits (N, C); labels integer classes (N,)"""
    labels = np.asarray(labels, dtype=int).reshape(-1)
    onehot = np.zeros(logits.shape)
    onehot[np.arange(labels.size), labels] = 1.0
    return -(log_softmax(logits) * Tensor(onehot)).sum(axis=-1).mean()
