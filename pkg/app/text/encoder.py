"""
Transformer encoder over word pieces with a CLS pooling head.

Each encoder layer: multi-head scaled dot-product self-attention (PAD keys
masked to -inf), output projection, residual + layer norm, gelu FFN,
residual + layer norm. Dropout follows each sub-layer in training mode.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, Field

from app.errors import ShapeError
from app.models.schemas import EncoderConfig, OutcomeKind
from app.nn.functional import activation
from app.nn.layers import dense, dropout, layer_norm
from app.nn.params import ParamStore
from app.nn.tensor import Tensor, matmul, softmax
from app.text.tokenizer import SPECIAL_KINDS, TokenSequence

logger = structlog.get_logger()


class AttentionVector(BaseModel):
    """Head-averaged CLS attention of the last encoder, non-special tokens only"""

    weights: List[float]
    token_ids: List[int]
    positions: List[int] = Field(default_factory=list, description="Token index in the sequence")
    row_sum: float = Field(..., description="Sum over the full CLS row before exclusion")


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    positions = np.arange(length)[:, None]
    rates = 1.0 / np.power(10000.0, (2 * (np.arange(dim) // 2)) / dim)
    angles = positions * rates[None, :]
    table = np.zeros((length, dim))
    table[:, 0::2] = np.sin(angles[:, 0::2])
    table[:, 1::2] = np.cos(angles[:, 1::2])
    return table


class TextEncoderModel:
    """One text field's model for one outcome"""

    def __init__(self, vocab_size: int, config: EncoderConfig, outcome_kind: OutcomeKind,
                 seed: int = 0, name: str = "text"):
        self.config = config
        self.outcome_kind = outcome_kind
        self.name = name
        self.vocab_size = vocab_size
        self.store = ParamStore(seed)
        self.positions = sinusoidal_positions(config.max_len, config.model_dim)
        self._build()

    def _build(self):
        d = self.config.model_dim
        s = self.store
        s.add("embed/tokens", (self.vocab_size, d), "glorot")
        for layer in range(self.config.num_encoders):
            p = f"enc{layer}"
            for proj in ("q", "k", "v"):
                s.add(f"{p}/attn/w{proj}", (d, self.config.num_heads * self.config.key_dim), "glorot")
                s.add(f"{p}/attn/b{proj}", (self.config.num_heads * self.config.key_dim,), "zeros")
            s.add(f"{p}/attn/wo", (self.config.num_heads * self.config.key_dim, d), "glorot")
            s.add(f"{p}/attn/bo", (d,), "zeros")
            s.add(f"{p}/ln1/gamma", (d,), "ones")
            s.add(f"{p}/ln1/beta", (d,), "zeros")
            s.add(f"{p}/ffn/w1", (d, self.config.ffn_dim), "glorot")
            s.add(f"{p}/ffn/b1", (self.config.ffn_dim,), "zeros")
            s.add(f"{p}/ffn/w2", (self.config.ffn_dim, d), "glorot")
            s.add(f"{p}/ffn/b2", (d,), "zeros")
            s.add(f"{p}/ln2/gamma", (d,), "ones")
            s.add(f"{p}/ln2/beta", (d,), "zeros")
        s.add("head/pool_w", (d, d), "glorot")
        s.add("head/pool_b", (d,), "zeros")
        s.add("head/out_w", (d, 1), "glorot")
        s.add("head/out_b", (1,), "zeros")

    # ------------------------------------------------------------------
    # Forward
    # ------------------------------------------------------------------

    def _self_attention(self, x: Tensor, pad_mask: np.ndarray, layer: int) -> Tuple[Tensor, Tensor]:
        n, t, _ = x.shape
        h, dk = self.config.num_heads, self.config.key_dim
        p = f"enc{layer}/attn"

        def heads(proj: str) -> Tensor:
            out = dense(x, self.store[f"{p}/w{proj}"], self.store[f"{p}/b{proj}"])
            return out.reshape(n, t, h, dk).transpose(0, 2, 1, 3)

        q, k, v = heads("q"), heads("k"), heads("v")
        scores = matmul(q, k.swapaxes(-1, -2)) * (1.0 / np.sqrt(dk))
        scores = scores.masked_fill(pad_mask[:, None, None, :], -np.inf)
        probs = softmax(scores)
        context = matmul(probs, v).transpose(0, 2, 1, 3).reshape(n, t, h * dk)
        return dense(context, self.store[f"{p}/wo"], self.store[f"{p}/bo"]), probs

    def encode(self, ids: np.ndarray, pad_mask: np.ndarray, training: bool = False,
               step: int = 0) -> Tuple[Tensor, List[np.ndarray]]:
        """
        Args:
            ids: (N, T) token ids
            pad_mask: (N, T) True at PAD positions

        Returns:
            CLS output (N, d_model) and per-layer attention (N, H, T, T)
        """
        ids = np.asarray(ids)
        if ids.ndim == 1:
            ids = ids[None, :]
            pad_mask = np.asarray(pad_mask)[None, :]
        n, t = ids.shape
        if t > self.config.max_len:
            raise ShapeError(f"sequence length {t} exceeds max_len {self.config.max_len}")

        p_drop = self.config.dropout_p
        seed = self.store.seed
        x = self.store["embed/tokens"][ids] + Tensor(self.positions[:t])
        x = dropout(x, p_drop, training, seed, f"{self.name}/embed", step)

        attentions = []
        for layer in range(self.config.num_encoders):
            p = f"enc{layer}"
            attn_out, probs = self._self_attention(x, pad_mask, layer)
            attentions.append(probs.data)
            attn_out = dropout(attn_out, p_drop, training, seed, f"{self.name}/{p}/attn", step)
            x = layer_norm(x + attn_out, self.store[f"{p}/ln1/gamma"], self.store[f"{p}/ln1/beta"])
            hidden = activation(dense(x, self.store[f"{p}/ffn/w1"], self.store[f"{p}/ffn/b1"]), "gelu")
            ffn_out = dense(hidden, self.store[f"{p}/ffn/w2"], self.store[f"{p}/ffn/b2"])
            ffn_out = dropout(ffn_out, p_drop, training, seed, f"{self.name}/{p}/ffn", step)
            x = layer_norm(x + ffn_out, self.store[f"{p}/ln2/gamma"], self.store[f"{p}/ln2/beta"])

        return x[:, 0, :], attentions

    def head(self, cls_output: Tensor) -> Tensor:
        """tanh pooler then a linear unit; returns (N,) pre-activation output"""
        pooled = activation(dense(cls_output, self.store["head/pool_w"], self.store["head/pool_b"]), "tanh")
        return dense(pooled, self.store["head/out_w"], self.store["head/out_b"]).reshape(-1)

    def forward(self, ids: np.ndarray, pad_mask: np.ndarray, training: bool = False,
                step: int = 0) -> Tensor:
        cls_output, _ = self.encode(ids, pad_mask, training, step)
        return self.head(cls_output)


def predict_head(model: TextEncoderModel, cls_output: Tensor,
                 outcome_kind: Optional[OutcomeKind] = None) -> Tensor:
    """Linear output for continuous outcomes, sigmoid probability for binary"""
    kind = outcome_kind or model.outcome_kind
    raw = model.head(cls_output)
    return activation(raw, "sigmoid" if kind is OutcomeKind.BINARY else "linear")


def extract_cls_attention(attentions: Sequence[np.ndarray], sequence: TokenSequence,
                          batch_index: int = 0) -> AttentionVector:
    """
    Mean over heads of the last encoder's CLS row, restricted to tokens that
    are not CLS, SEP or PAD. Weights keep their original scale.
    """
    last = np.asarray(attentions[-1])[batch_index]
    row = last[:, 0, :].mean(axis=0)
    keep = [i for i, kind in enumerate(sequence.kinds) if kind not in SPECIAL_KINDS and i < row.shape[0]]
    return AttentionVector(
        weights=[float(row[i]) for i in keep],
        token_ids=[sequence.ids[i] for i in keep],
        positions=keep,
        row_sum=float(row.sum()),
    )
