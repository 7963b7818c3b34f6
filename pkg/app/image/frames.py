"""Frame IO (binary PPM via Pillow) and frame containers."""

from typing import List, Optional

import numpy as np
from PIL import Image
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.errors import DataError, ShapeError


class ImageFrame(BaseModel):
    """(H, W, 3) pixel intensities in [0, 1]"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    pixels: np.ndarray
    tag: str = "thumbnail"
    t: Optional[float] = None

    @property
    def resolution(self):
        return self.pixels.shape[:2]


class FrameSet(BaseModel):
    """Frames of one slice in strictly increasing time order"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    frames: List[ImageFrame] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_order(self):
        times = [f.t for f in self.frames if f.t is not None]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("Frame timestamps must be strictly increasing")
        return self

    def __len__(self) -> int:
        return len(self.frames)

    def stacked(self) -> np.ndarray:
        return np.stack([f.pixels for f in self.frames])


def read_frame(path: str, height: int, width: int, tag: str = "thumbnail",
               t: Optional[float] = None) -> ImageFrame:
    try:
        with Image.open(path) as image:
            pixels = np.asarray(image.convert("RGB"), dtype=np.float64) / 255.0
    except (OSError, ValueError) as exc:
        raise DataError(f"Cannot read frame {path}: {exc}") from exc
    if pixels.shape[:2] != (height, width):
        raise ShapeError(f"Frame {path} is {pixels.shape[:2]}, expected {(height, width)}")
    return ImageFrame(pixels=pixels, tag=tag, t=t)


def write_frame(path: str, pixels: np.ndarray):
    data = np.clip(np.round(np.asarray(pixels) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data).save(path, format="PPM")


def fill_frames(frames: List[np.ndarray], count: int) -> np.ndarray:
    """Repeat the last available frame until `count` frames exist"""
    if not frames:
        raise DataError("No frames available")
    filled = list(frames[:count])
    while len(filled) < count:
        filled.append(filled[-1])
    return np.stack(filled)
