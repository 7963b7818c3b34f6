"""
Sound classes, their categories and category indicators.

Each class has a spectral signature (a set of tone frequencies) that the
synthetic generator renders and the moment classifier learns to detect.
"""

from typing import Dict, List

import numpy as np

from app.models.schemas import SoundCategory

# class name -> (category, tone frequencies in Hz)
SOUND_CLASSES: Dict[str, tuple] = {
    "speech": (SoundCategory.HUMAN, (300.0, 600.0, 1200.0)),
    "laughter": (SoundCategory.HUMAN, (450.0, 900.0, 1800.0)),
    "guitar": (SoundCategory.MUSIC, (220.0, 330.0, 440.0)),
    "drums": (SoundCategory.MUSIC, (150.0, 2600.0)),
    "silence": (SoundCategory.SILENCE, ()),
    "room_tone": (SoundCategory.SILENCE, (3900.0,)),
    "engine": (SoundCategory.THINGS, (180.0, 1000.0, 3000.0)),
    "clicks": (SoundCategory.THINGS, (2200.0, 3400.0)),
    "dog": (SoundCategory.ANIMAL, (700.0, 1400.0)),
    "bird": (SoundCategory.ANIMAL, (2800.0, 3600.0)),
    "whoosh": (SoundCategory.SOURCE_AMBIGUOUS, (800.0, 1600.0, 3200.0)),
    "beep": (SoundCategory.SOURCE_AMBIGUOUS, (2000.0,)),
    "crowd": (SoundCategory.BACKGROUND, (250.0, 500.0, 1500.0, 2500.0)),
    "hum": (SoundCategory.BACKGROUND, (120.0, 240.0)),
    "wind": (SoundCategory.NATURAL, (350.0, 1100.0, 2400.0)),
    "water": (SoundCategory.NATURAL, (1300.0, 2700.0, 3800.0)),
}

CLASS_NAMES: List[str] = list(SOUND_CLASSES)
CATEGORY_ORDER: List[SoundCategory] = list(SoundCategory)


def class_category(name: str) -> SoundCategory:
    return SOUND_CLASSES[name][0]


def classes_in(category: SoundCategory, num_classes: int = len(CLASS_NAMES)) -> List[int]:
    return [i for i, name in enumerate(CLASS_NAMES[:num_classes]) if class_category(name) is category]


def category_indicators(probs: np.ndarray, threshold: float = 0.5) -> Dict[SoundCategory, np.ndarray]:
    """
    probs: (moments, K) class probabilities.

    A moment carries category z when the highest probability among z's
    classes exceeds the threshold.
    """
    num_classes = probs.shape[-1]
    indicators = {}
    for category in CATEGORY_ORDER:
        members = classes_in(category, num_classes)
        if not members:
            indicators[category] = np.zeros(probs.shape[:-1], dtype=int)
            continue
        indicators[category] = (probs[..., members].max(axis=-1) > threshold).astype(int)
    return indicators
