"""
Rendering of synthetic media: tone-signature audio tracks and coloured-box
frame scenes.
"""

from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from app.audio.categories import CLASS_NAMES, SOUND_CLASSES
from app.audio.frontend import PATCH_FRAMES, PATCH_HOP
from app.models.schemas import ItemCategory, SoundCategory

SEGMENT_SECONDS = 0.5
MOMENTS_PER_CLIP = 60
FRAME_HOP_SECONDS = 0.01
PATCH_SECONDS = PATCH_FRAMES * FRAME_HOP_SECONDS + 0.015
HUM_CLASS = "hum"

ITEM_COLOURS: Dict[ItemCategory, Tuple[float, float, float]] = {
    ItemCategory.PERSONS: (0.92, 0.62, 0.48),
    ItemCategory.CLOTHES_ACCESSORIES: (0.20, 0.30, 0.90),
    ItemCategory.HOME_KITCHEN: (0.60, 0.40, 0.20),
    ItemCategory.ANIMAL: (0.30, 0.80, 0.30),
    ItemCategory.OTHER_OBJECTS: (0.85, 0.85, 0.20),
    ItemCategory.PACKAGED_GOODS: (0.90, 0.20, 0.80),
    ItemCategory.BRAND_LOGOS: (1.00, 1.00, 1.00),
}


class AudioSegment(BaseModel):
    start: float
    end: float
    sound_class: str


class ScenePlan(BaseModel):
    """Items of one image: category -> (x0, y0, x1, y1)"""

    boxes: Dict[ItemCategory, Tuple[int, int, int, int]] = Field(default_factory=dict)
    background: Tuple[float, float, float] = (0.2, 0.2, 0.2)


# ============================================================================
# Audio
# ============================================================================


def plan_segments(duration: float, category_weights: np.ndarray, rng: np.random.Generator) -> List[AudioSegment]:
    """One sound class per half-second segment, drawn by category then class"""
    categories = list(SoundCategory)
    members = {c: [n for n in CLASS_NAMES if SOUND_CLASSES[n][0] is c] for c in categories}
    count = int(np.ceil(duration / SEGMENT_SECONDS))
    picks = rng.choice(len(categories), size=count, p=category_weights)
    segments = []
    for k, pick in enumerate(picks):
        names = members[categories[pick]]
        name = names[int(rng.integers(len(names)))]
        segments.append(AudioSegment(start=k * SEGMENT_SECONDS,
                                     end=min(duration, (k + 1) * SEGMENT_SECONDS), sound_class=name))
    return segments


def render_audio(segments: Sequence[AudioSegment], duration: float, rate: int, rng: np.random.Generator,
                 hum: bool = False) -> np.ndarray:
    n = int(round(duration * rate))
    samples = rng.normal(0.0, 0.01, size=n)
    t = np.arange(n) / rate
    for seg in segments:
        lo, hi = int(round(seg.start * rate)), min(n, int(round(seg.end * rate)))
        tones = SOUND_CLASSES[seg.sound_class][1]
        if not tones or hi <= lo:
            continue
        amp = 0.5 / len(tones)
        for freq in tones:
            phase = rng.uniform(0, 2 * np.pi)
            samples[lo:hi] += amp * np.sin(2 * np.pi * freq * t[lo:hi] + phase)
    if hum:
        for freq in SOUND_CLASSES[HUM_CLASS][1]:
            samples += 0.12 * np.sin(2 * np.pi * freq * t)
    return np.clip(samples, -1.0, 1.0)


def moment_spans(window_start: float) -> List[Tuple[float, float]]:
    step = PATCH_HOP * FRAME_HOP_SECONDS
    return [(window_start + m * step, window_start + m * step + PATCH_SECONDS) for m in range(MOMENTS_PER_CLIP)]


def moment_classes(segments: Sequence[AudioSegment], window_start: float, hum: bool = False) -> List[List[str]]:
    """Class names sounding in each moment of the clip starting at window_start"""
    labels = []
    for lo, hi in moment_spans(window_start):
        names = sorted({s.sound_class for s in segments
                        if s.start < hi and lo < s.end and SOUND_CLASSES[s.sound_class][1]})
        if hum and HUM_CLASS not in names:
            names = sorted(names + [HUM_CLASS])
        labels.append(names)
    return labels


def moment_category_share(labels: Sequence[Sequence[str]], category) -> float:
    if not labels:
        return 0.0
    return float(np.mean([any(SOUND_CLASSES[n][0] is category for n in names) for names in labels]))


# ============================================================================
# Frames
# ============================================================================


def plan_scene(present: Dict[ItemCategory, float], height: int, width: int, rng: np.random.Generator) -> ScenePlan:
    """
    `present` maps each visible category to its nominal area share; each box
    is jittered in size and position per image.
    """
    boxes = {}
    for category, share in present.items():
        area = share * rng.uniform(0.8, 1.2) * height * width
        aspect = rng.uniform(0.6, 1.6)
        w = int(np.clip(round(np.sqrt(area * aspect)), 2, width))
        h = int(np.clip(round(area / max(w, 1)), 2, height))
        x0 = int(rng.integers(0, width - w + 1))
        y0 = int(rng.integers(0, height - h + 1))
        boxes[category] = (x0, y0, x0 + w, y0 + h)
    grey = float(rng.uniform(0.12, 0.3))
    return ScenePlan(boxes=boxes, background=(grey, grey, min(1.0, grey + 0.05)))


def render_scene(plan: ScenePlan, height: int, width: int, rng: np.random.Generator,
                 tint: float = 0.0) -> np.ndarray:
    """`tint` brightens the background only"""
    pixels = np.empty((height, width, 3))
    pixels[:] = np.minimum(1.0, np.asarray(plan.background) + tint)
    pixels += rng.normal(0.0, 0.02, size=pixels.shape)
    for category in ItemCategory:
        if category in plan.boxes:
            x0, y0, x1, y1 = plan.boxes[category]
            pixels[y0:y1, x0:x1] = ITEM_COLOURS[category]
    return np.clip(pixels, 0.0, 1.0)

