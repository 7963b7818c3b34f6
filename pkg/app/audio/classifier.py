"""
Per-moment sound classifier: stem convolution, a stack of depthwise-separable
blocks, global average pooling and a dense sigmoid layer with one unit per
sound class.
"""

from typing import List

import numpy as np
import structlog

from app.audio.categories import category_indicators
from app.models.schemas import AudioModelConfig, SoundCategory
from app.nn.functional import activation, structured_layer
from app.nn.layers import dense
from app.nn.params import ParamStore
from app.nn.tensor import Tensor

logger = structlog.get_logger()

BLOCK_STRIDES = (2, 2, 1)
BLOCK_ACTIVATION = "relu"


class SoundClassProbs:
    """(moments, K) sigmoid probabilities with category indicators"""

    def __init__(self, probs: np.ndarray):
        self.probs = np.asarray(probs, dtype=np.float64)

    @property
    def num_classes(self) -> int:
        return self.probs.shape[-1]

    def indicators(self):
        return category_indicators(self.probs)

    def indicator_matrix(self) -> np.ndarray:
        """(moments, 8) in SoundCategory order"""
        ind = self.indicators()
        return np.stack([ind[c] for c in SoundCategory], axis=-1)


class MomentClassifier:
    def __init__(self, config: AudioModelConfig, seed: int = 0, name: str = "audio/classifier"):
        self.config = config
        self.name = name
        self.store = ParamStore(seed)
        s = self.store
        s.add("stem/w", (3, 3, 1, config.stem_channels), "he")
        s.add("stem/b", (config.stem_channels,), "zeros")
        channels = config.stem_channels
        for i, out_channels in enumerate(config.block_channels):
            s.add(f"block{i}/depthwise", (3, 3, channels), "he")
            s.add(f"block{i}/pointwise", (channels, out_channels), "he")
            s.add(f"block{i}/bias", (out_channels,), "zeros")
            channels = out_channels
        s.add("out/w", (channels, config.num_classes), "glorot")
        s.add("out/b", (config.num_classes,), "zeros")

    def logits(self, patches: np.ndarray) -> Tensor:
        """patches: (N, 96, 64) log-mel moments -> (N, K) logits"""
        x = Tensor(np.asarray(patches, dtype=np.float64)[..., None])
        x = structured_layer(x, "conv2d", weight=self.store["stem/w"], bias=self.store["stem/b"], stride=2)
        x = activation(x, BLOCK_ACTIVATION)
        for i in range(len(self.config.block_channels)):
            stride = BLOCK_STRIDES[i] if i < len(BLOCK_STRIDES) else 1
            x = structured_layer(
                x,
                "depthwise_separable_conv",
                depthwise=self.store[f"block{i}/depthwise"],
                pointwise=self.store[f"block{i}/pointwise"],
                bias=self.store[f"block{i}/bias"],
                stride=stride,
            )
            x = activation(x, BLOCK_ACTIVATION)
        return dense(structured_layer(x, "global_avg_pool"), self.store["out/w"], self.store["out/b"])

    def classify_moments(self, patches: np.ndarray) -> SoundClassProbs:
        return SoundClassProbs(activation(self.logits(patches), "sigmoid").data)


def classify_moments(patches: np.ndarray, model: MomentClassifier) -> SoundClassProbs:
    return model.classify_moments(patches)


def class_labels_from_names(moment_classes: List[List[str]], class_names: List[str]) -> np.ndarray:
    """Multi-hot (moments, K) targets from per-moment class name lists"""
    index = {name: i for i, name in enumerate(class_names)}
    labels = np.zeros((len(moment_classes), len(class_names)))
    for row, names in enumerate(moment_classes):
        for name in names:
            if name in index:
                labels[row, index[name]] = 1.0
    return labels
