"""
Bi-LSTM with additive (Bahdanau) attention over moments.

A bidirectional pre-attention LSTM encodes the moment sequence. Each cell of
the post-attention LSTM receives a context vector: the softmax-weighted sum
of the pre-attention activations, with alignment scores from a small tanh
network over the previous post-attention state and each activation. The last
post-attention state feeds the output unit, and the last cell's attention
weights are the exported moment attention.
"""

from typing import Tuple

import numpy as np

from app.models.schemas import AudioModelConfig, OutcomeKind
from app.nn.layers import bidirectional_lstm, dense, lstm_step
from app.nn.params import ParamStore
from app.nn.tensor import Tensor, as_tensor, matmul, sigmoid, softmax, tanh


class AttentionSequenceModel:
    def __init__(self, input_dim: int, config: AudioModelConfig, outcome_kind: OutcomeKind,
                 seed: int = 0, name: str = "audio/sequence", decoder_steps: int = 0):
        self.config = config
        self.outcome_kind = outcome_kind
        self.name = name
        self.input_dim = input_dim
        self.decoder_steps = decoder_steps
        self.store = ParamStore(seed)
        s = self.store
        pre, post, units = config.pre_lstm_units, config.post_lstm_units, config.attention_units
        for direction in ("fw", "bw"):
            s.add(f"pre/{direction}/w_input", (input_dim, 4 * pre), "glorot")
            s.add(f"pre/{direction}/w_hidden", (pre, 4 * pre), "glorot")
            s.add(f"pre/{direction}/bias", (4 * pre,), "zeros")
        s.add("attn/w_activation", (2 * pre, units), "glorot")
        s.add("attn/w_state", (post, units), "glorot")
        s.add("attn/bias", (units,), "zeros")
        s.add("attn/v", (units, 1), "glorot")
        s.add("post/w_input", (2 * pre, 4 * post), "glorot")
        s.add("post/w_hidden", (post, 4 * post), "glorot")
        s.add("post/bias", (4 * post,), "zeros")
        s.add("out/w", (post, 1), "glorot")
        s.add("out/b", (1,), "zeros")

    def _params(self, prefix: str):
        return (self.store[f"{prefix}/w_input"], self.store[f"{prefix}/w_hidden"], self.store[f"{prefix}/bias"])

    def forward(self, x, training: bool = False, step: int = 0) -> Tuple[Tensor, np.ndarray]:
        """
        Args:
            x: (N, M, D) per-moment inputs

        Returns:
            raw output (N,) and the last cell's attention (N, M)
        """
        x = as_tensor(np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64))
        if x.ndim == 2:
            x = x.reshape(1, *x.shape)
        n, moments, _ = x.shape
        activations = bidirectional_lstm(x, self._params("pre/fw"), self._params("pre/bw"))
        projected = matmul(activations, self.store["attn/w_activation"]) + self.store["attn/bias"]

        post = self.config.post_lstm_units
        s = Tensor(np.zeros((n, post)))
        c = Tensor(np.zeros((n, post)))
        steps = self.decoder_steps or moments
        weights = np.full((n, moments), 1.0 / moments)

        if self.config.variant == "no_attention":
            context = activations.mean(axis=1)
            for _ in range(steps):
                s, c = lstm_step(context, s, c, *self._params("post"))
        else:
            for _ in range(steps):
                state_term = matmul(s, self.store["attn/w_state"]).reshape(n, 1, -1)
                energies = matmul(tanh(projected + state_term), self.store["attn/v"]).reshape(n, moments)
                alpha = softmax(energies)
                context = matmul(alpha.reshape(n, 1, moments), activations).reshape(n, -1)
                s, c = lstm_step(context, s, c, *self._params("post"))
                weights = alpha.data

        raw = dense(s, self.store["out/w"], self.store["out/b"]).reshape(-1)
        return raw, weights

    def predict(self, x) -> Tuple[np.ndarray, np.ndarray]:
        raw, weights = self.forward(x)
        values = sigmoid(raw).data if self.outcome_kind is OutcomeKind.BINARY else raw.data
        return values, weights


def attention_sequence_model(inputs: np.ndarray, model: AttentionSequenceModel) -> Tuple[np.ndarray, np.ndarray]:
    """(prediction per video, MomentAttention per video)"""
    return model.predict(inputs)
