"""
Signed gradient activation maps.

Channel weights are the spatial mean of d(target)/d(activation) over the
last activation map; the map is the channel-weighted sum of activations,
kept signed, then bilinearly upsampled to frame resolution.
"""

from typing import Union

import numpy as np
from scipy import ndimage

from app.image.heads import FrameCombinerModel, ThumbnailModel
from app.models.schemas import OutcomeKind
from app.nn.tensor import Tensor


def signed_map(features: Tensor, target: Tensor) -> np.ndarray:
    """
    Backpropagate `target` (summed over the batch) to `features` (N, h, w, C)
    and return the (N, h, w) map at feature resolution.
    """
    target.backward(np.ones_like(target.data))
    grads = features.grad if features.grad is not None else np.zeros_like(features.data)
    weights = grads.mean(axis=(1, 2))
    return np.einsum("nhwc,nc->nhw", features.data, weights)


def upsample_bilinear(maps: np.ndarray, height: int, width: int) -> np.ndarray:
    """(N, h, w) -> (N, height, width) with half-pixel aligned sampling"""
    n, h, w = maps.shape
    rows = np.clip((np.arange(height) + 0.5) * h / height - 0.5, 0, h - 1)
    cols = np.clip((np.arange(width) + 0.5) * w / width - 0.5, 0, w - 1)
    grid_r, grid_c = np.meshgrid(rows, cols, indexing="ij")
    return np.stack([
        ndimage.map_coordinates(m, [grid_r, grid_c], order=1, mode="nearest") for m in maps
    ])


def _target(raw: Tensor, kind: OutcomeKind) -> Tensor:
    """Continuous output, or the predicted-class logit for the binary outcome"""
    if kind is OutcomeKind.BINARY:
        predicted = raw.data.argmax(axis=-1)
        return raw[np.arange(raw.shape[0]), predicted]
    return raw


def grad_activation_map(model: Union[ThumbnailModel, FrameCombinerModel], images: np.ndarray,
                        upsample: bool = True) -> np.ndarray:
    """
    Thumbnail model: images (N, H, W, 3) -> maps (N, H, W).
    Frame model: frames (N, m, H, W, 3) -> maps (N, m, H, W).
    """
    model.store.zero_grad()
    raw, out = model.forward_full(images)
    features = out.features
    maps = signed_map(features, _target(raw, model.outcome_kind))
    model.store.zero_grad()
    if upsample:
        maps = upsample_bilinear(maps, model.config.height, model.config.width)
    if isinstance(model, FrameCombinerModel):
        n = np.asarray(images).shape[0]
        maps = maps.reshape(n, model.num_frames, *maps.shape[1:])
    return maps
