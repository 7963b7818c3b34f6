"""
Convolutional backbone: stem convolution, inverted-bottleneck blocks with
squeeze-excitation, and a 1x1 top convolution whose activation map is the
target of gradient maps.
"""

from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.errors import ShapeError
from app.models.schemas import ImageModelConfig
from app.nn.layers import conv2d, dense, depthwise_conv2d, global_avg_pool, pointwise_conv
from app.nn.params import ParamStore
from app.nn.tensor import Tensor, sigmoid


def swish(x: Tensor) -> Tensor:
    return x * sigmoid(x)


class BackboneOutput(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    features: Tensor
    pooled: Tensor
    gates: List[np.ndarray] = []


class ImageBackbone:
    """Registers its parameters under `prefix` in a shared ParamStore"""

    def __init__(self, store: ParamStore, config: ImageModelConfig, prefix: str = "backbone"):
        self.store = store
        self.config = config
        self.prefix = prefix
        p = prefix
        k = config.kernel_size
        store.add(f"{p}/stem/w", (3, 3, 3, config.stem_channels), "he")
        store.add(f"{p}/stem/b", (config.stem_channels,), "zeros")
        channels = config.stem_channels
        for i, out_channels in enumerate(config.block_channels):
            expanded = channels * config.expand_ratio
            squeezed = max(1, int(channels * config.se_ratio))
            store.add(f"{p}/block{i}/expand/w", (channels, expanded), "he")
            store.add(f"{p}/block{i}/expand/b", (expanded,), "zeros")
            store.add(f"{p}/block{i}/depthwise", (k, k, expanded), "he")
            store.add(f"{p}/block{i}/se/reduce_w", (expanded, squeezed), "glorot")
            store.add(f"{p}/block{i}/se/reduce_b", (squeezed,), "zeros")
            store.add(f"{p}/block{i}/se/expand_w", (squeezed, expanded), "glorot")
            store.add(f"{p}/block{i}/se/expand_b", (expanded,), "zeros")
            store.add(f"{p}/block{i}/project/w", (expanded, out_channels), "he")
            store.add(f"{p}/block{i}/project/b", (out_channels,), "zeros")
            channels = out_channels
        store.add(f"{p}/top/w", (channels, channels), "he")
        store.add(f"{p}/top/b", (channels,), "zeros")
        self.out_channels = channels

    def _block(self, x: Tensor, i: int) -> Tuple[Tensor, np.ndarray]:
        p = f"{self.prefix}/block{i}"
        s = self.store
        stride = self.config.block_strides[i] if i < len(self.config.block_strides) else 1
        h = swish(pointwise_conv(x, s[f"{p}/expand/w"], s[f"{p}/expand/b"]))
        h = swish(depthwise_conv2d(h, s[f"{p}/depthwise"], stride=stride))
        squeezed = swish(dense(global_avg_pool(h), s[f"{p}/se/reduce_w"], s[f"{p}/se/reduce_b"]))
        gate = sigmoid(dense(squeezed, s[f"{p}/se/expand_w"], s[f"{p}/se/expand_b"]))
        n, c = gate.shape
        h = h * gate.reshape(n, 1, 1, c)
        out = pointwise_conv(h, s[f"{p}/project/w"], s[f"{p}/project/b"])
        if stride == 1 and x.shape[-1] == out.shape[-1]:
            out = out + x
        return out, gate.data

    def forward(self, images) -> BackboneOutput:
        """images: (N, H, W, 3) in [0, 1]"""
        x = images if isinstance(images, Tensor) else Tensor(np.asarray(images, dtype=np.float64))
        if x.ndim == 3:
            x = x.reshape(1, *x.shape)
        expected = (self.config.height, self.config.width, 3)
        if tuple(x.shape[1:]) != expected:
            raise ShapeError(f"backbone expects frames of shape {expected}, got {tuple(x.shape[1:])}")
        s = self.store
        x = swish(conv2d(x, s[f"{self.prefix}/stem/w"], s[f"{self.prefix}/stem/b"], stride=2))
        gates = []
        for i in range(len(self.config.block_channels)):
            x, gate = self._block(x, i)
            gates.append(gate)
        features = swish(pointwise_conv(x, s[f"{self.prefix}/top/w"], s[f"{self.prefix}/top/b"]))
        return BackboneOutput(features=features, pooled=global_avg_pool(features), gates=gates)


def backbone_forward(frame: np.ndarray, backbone: ImageBackbone) -> Tuple[Tensor, Tensor]:
    out = backbone.forward(frame)
    return out.features, out.pooled
