"""
Thumbnail head and the four multi-frame combination architectures.

Continuous outcomes use one linear unit; the binary outcome uses a 2-way
softmax whose class-1 probability is the prediction.
"""

from typing import Tuple

import numpy as np

from app.errors import DataError
from app.image.backbone import BackboneOutput, ImageBackbone
from app.models.schemas import CombinerArch, ImageModelConfig, OutcomeKind
from app.nn.functional import activation, linalg, structured_layer
from app.nn.layers import bidirectional_lstm, dense
from app.nn.params import ParamStore
from app.nn.tensor import Tensor


def _output_units(kind: OutcomeKind) -> int:
    return 2 if kind is OutcomeKind.BINARY else 1


def finalize(raw: Tensor, kind: OutcomeKind) -> np.ndarray:
    """Prediction values from raw head outputs"""
    if kind is OutcomeKind.BINARY:
        return activation(raw, "softmax_lastdim").data[:, 1]
    return raw.data.reshape(-1)


class ThumbnailModel:
    def __init__(self, config: ImageModelConfig, outcome_kind: OutcomeKind, seed: int = 0,
                 name: str = "image/thumbnail"):
        self.config = config
        self.outcome_kind = outcome_kind
        self.name = name
        self.store = ParamStore(seed)
        self.backbone = ImageBackbone(self.store, config)
        units = _output_units(outcome_kind)
        self.store.add("head/w", (self.backbone.out_channels, units), "glorot")
        self.store.add("head/b", (units,), "zeros")

    def forward_full(self, images) -> Tuple[Tensor, BackboneOutput]:
        out = self.backbone.forward(images)
        raw = dense(out.pooled, self.store["head/w"], self.store["head/b"])
        if self.outcome_kind is not OutcomeKind.BINARY:
            raw = raw.reshape(-1)
        return raw, out

    def forward(self, images, training: bool = False, step: int = 0) -> Tensor:
        return self.forward_full(images)[0]

    def predict(self, images) -> np.ndarray:
        return finalize(self.forward(images), self.outcome_kind)


def thumbnail_predict(frame: np.ndarray, model: ThumbnailModel) -> np.ndarray:
    return model.predict(frame)


class FrameCombinerModel:
    """Shared-weight backbone over m frames followed by one combination architecture"""

    def __init__(self, config: ImageModelConfig, outcome_kind: OutcomeKind, num_frames: int = 5,
                 seed: int = 0, name: str = "image/frames"):
        if num_frames < 2:
            raise DataError("Frame combiners need at least 2 frames; use thumbnail_predict for one image")
        self.config = config
        self.arch = config.arch
        self.outcome_kind = outcome_kind
        self.num_frames = num_frames
        self.name = name
        self.store = ParamStore(seed)
        self.backbone = ImageBackbone(self.store, config)
        c = self.backbone.out_channels
        units = _output_units(outcome_kind)
        s = self.store
        if self.arch is CombinerArch.BILSTM:
            s.add("middle/w", (c, config.middle_units), "glorot")
            s.add("middle/b", (config.middle_units,), "zeros")
            for direction in ("fw", "bw"):
                s.add(f"lstm/{direction}/w_input", (config.middle_units, 4 * config.lstm_units), "glorot")
                s.add(f"lstm/{direction}/w_hidden", (config.lstm_units, 4 * config.lstm_units), "glorot")
                s.add(f"lstm/{direction}/bias", (4 * config.lstm_units,), "zeros")
            s.add("out/w", (2 * config.lstm_units, units), "glorot")
        elif self.arch is CombinerArch.C_GAP:
            s.add("out/w", (num_frames * c, units), "glorot")
        else:
            s.add("out/w", (c, units), "glorot")
        s.add("out/b", (units,), "zeros")

    def _lstm(self, direction: str):
        return (self.store[f"lstm/{direction}/w_input"], self.store[f"lstm/{direction}/w_hidden"],
                self.store[f"lstm/{direction}/bias"])

    def forward_full(self, frames) -> Tuple[Tensor, BackboneOutput]:
        """frames: (N, m, H, W, 3)"""
        frames = np.asarray(frames, dtype=np.float64)
        n, m = frames.shape[:2]
        if m < 2:
            raise DataError("Frame combiners need at least 2 frames; use thumbnail_predict for one image")
        if m != self.num_frames:
            raise DataError(f"Model expects {self.num_frames} frames, got {m}")
        out = self.backbone.forward(frames.reshape(n * m, *frames.shape[2:]))
        feats = out.features
        h, w, c = feats.shape[1:]
        s = self.store

        if self.arch is CombinerArch.MAX_GAP:
            maps = feats.reshape(n, m, h, w, c)
            pooled = structured_layer(structured_layer([maps[:, j] for j in range(m)], "max_pool_set"),
                                      "global_avg_pool")
        elif self.arch is CombinerArch.GAP_MAX:
            per_frame = out.pooled.reshape(n, m, c)
            pooled = structured_layer([per_frame[:, j] for j in range(m)], "max_pool_set")
        elif self.arch is CombinerArch.C_GAP:
            per_frame = out.pooled.reshape(n, m, c)
            pooled = per_frame[:, 0]
            for j in range(1, m):
                pooled = linalg(pooled, per_frame[:, j], "concat_lastdim")
        else:
            per_frame = out.pooled.reshape(n, m, c)
            middle = dense(per_frame, s["middle/w"], s["middle/b"])
            middle = activation(middle, "sigmoid" if self.outcome_kind is OutcomeKind.BINARY else "relu")
            states = bidirectional_lstm(middle, self._lstm("fw"), self._lstm("bw"))
            units = self.config.lstm_units
            pooled = linalg(states[:, -1, :units], states[:, 0, units:], "concat_lastdim")

        raw = dense(pooled, s["out/w"], s["out/b"])
        if self.outcome_kind is not OutcomeKind.BINARY:
            raw = raw.reshape(-1)
        return raw, out

    def forward(self, frames, training: bool = False, step: int = 0) -> Tensor:
        return self.forward_full(frames)[0]

    def predict(self, frames) -> np.ndarray:
        return finalize(self.forward(frames), self.outcome_kind)


def combine_frames(frames: np.ndarray, model: FrameCombinerModel) -> np.ndarray:
    return model.predict(frames)
