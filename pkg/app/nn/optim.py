"""Adam optimizer over a ParamStore."""

from typing import Dict

import numpy as np

from app.nn.params import ParamStore


class Adam:
    def __init__(self, store: ParamStore, learning_rate: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.store = store
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: Dict[str, np.ndarray] = {}
        self._v: Dict[str, np.ndarray] = {}

    def step(self):
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for name, param in self.store.items():
            if param.grad is None:
                continue
            m = self._m.get(name, np.zeros_like(param.data))
            v = self._v.get(name, np.zeros_like(param.data))
            m = self.beta1 * m + (1.0 - self.beta1) * param.grad
            v = self.beta2 * v + (1.0 - self.beta2) * param.grad ** 2
            self._m[name], self._v[name] = m, v
            param.data = param.data - self.learning_rate * (m / correction1) / (
                np.sqrt(v / correction2) + self.eps
            )

    def zero_grad(self):
        self.store.zero_grad()
