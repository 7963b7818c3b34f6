"""Per-category gradient statistics over annotated item boxes."""

from collections import defaultdict
from typing import Dict, List, Mapping, Sequence

import numpy as np
from pydantic import BaseModel

from app.errors import DataError
from app.models.schemas import FRAME_TAGS, FrameTag, ItemBoxRecord, ItemCategory

AVG_FRAMES = "avg5"


class ItemStat(BaseModel):
    mean_gradient: float
    size_pct: float


def box_size_pct(box: ItemBoxRecord, height: int, width: int) -> float:
    return 100.0 * (box.x1 - box.x0) * (box.y1 - box.y0) / (height * width)


def _check_bounds(box: ItemBoxRecord, height: int, width: int):
    if box.x0 < 0 or box.y0 < 0 or box.x1 <= box.x0 or box.y1 <= box.y0:
        raise DataError(f"Empty or negative box ({box.x0},{box.y0})-({box.x1},{box.y1})")
    if box.x1 > width or box.y1 > height:
        raise DataError(
            f"Box ({box.x0},{box.y0})-({box.x1},{box.y1}) outside {height}x{width} image"
        )


def frame_item_stats(grad_map: np.ndarray, boxes: Sequence[ItemBoxRecord]) -> Dict[ItemCategory, ItemStat]:
    """
    Mean map value over the pixel union of each category's boxes, and the
    summed box area as a percentage of the image. Absent categories are omitted.
    """
    height, width = grad_map.shape
    by_category: Dict[ItemCategory, List[ItemBoxRecord]] = defaultdict(list)
    for box in boxes:
        _check_bounds(box, height, width)
        by_category[box.category].append(box)

    stats = {}
    for category, members in by_category.items():
        mask = np.zeros((height, width), dtype=bool)
        for box in members:
            mask[box.y0:box.y1, box.x0:box.x1] = True
        stats[category] = ItemStat(
            mean_gradient=float(grad_map[mask].mean()),
            size_pct=float(sum(box_size_pct(b, height, width) for b in members)),
        )
    return stats


def item_statistics(maps: Mapping[str, np.ndarray],
                    boxes: Sequence[ItemBoxRecord]) -> Dict[str, Dict[ItemCategory, ItemStat]]:
    """
    Args:
        maps: frame tag -> (H, W) signed gradient map
        boxes: boxes of one video, any frame tag

    Returns:
        frame tag -> category -> stat, plus "avg5": the mean over the
        available timestamped frames in which the category appears
    """
    result: Dict[str, Dict[ItemCategory, ItemStat]] = {}
    for tag, grad_map in maps.items():
        result[tag] = frame_item_stats(grad_map, [b for b in boxes if b.frame_tag == tag])

    frame_tags = [t.value for t in FRAME_TAGS if t.value in result]
    if frame_tags:
        averaged: Dict[ItemCategory, ItemStat] = {}
        for category in ItemCategory:
            present = [result[t][category] for t in frame_tags if category in result[t]]
            if present:
                averaged[category] = ItemStat(
                    mean_gradient=float(np.mean([s.mean_gradient for s in present])),
                    size_pct=float(np.mean([s.size_pct for s in present])),
                )
        result[AVG_FRAMES] = averaged
    return result
