"""
30-second analysis windows (beginning, middle, end) and the frames that
represent each window.

A window's five frame offsets are 0, 7.5, 15, 22.5 and 30 s; each offset
takes the frame at or immediately after it.
"""

import math
from typing import List, Optional, Sequence, Tuple

import structlog
from pydantic import BaseModel, Field

from app.models.schemas import FRAME_TAGS, FrameRef, FrameTag, SliceWhich

logger = structlog.get_logger()

WINDOW_SECONDS = 30.0
LAST_FRAME_TOLERANCE = 0.5


class SliceSelection(BaseModel):
    """The window chosen for one video and its frames"""

    which: SliceWhich
    start: float
    end: float
    short_video: bool = Field(default=False, description="Video under 30 s; beginning slice used")
    frames: List[Tuple[str, FrameRef]] = Field(default_factory=list, description="(frame tag, frame)")


def select_window(duration: float, which: SliceWhich, window: float = WINDOW_SECONDS) -> Tuple[float, float]:
    if duration <= window or which is SliceWhich.BEGINNING:
        return 0.0, min(window, duration)
    if which is SliceWhich.MIDDLE:
        start = (duration - window) / 2.0
    else:
        start = duration - window
    return start, start + window


def frame_time_at_or_after(t: float, fps: float) -> float:
    """Timestamp of the first frame on a `fps` grid at or after t"""
    return math.ceil(t * fps - 1e-9) / fps


def grid_frame_times(start: float, duration: float, fps: float) -> List[Tuple[FrameTag, float]]:
    """Frame timestamps for the five offsets on a regular frame grid"""
    last_frame = (math.ceil(duration * fps - 1e-9) - 1) / fps
    times = []
    for tag in FRAME_TAGS:
        target = start + tag.offset_seconds
        t = frame_time_at_or_after(target, fps)
        if t > last_frame + 1e-9:
            if target - last_frame > LAST_FRAME_TOLERANCE:
                continue
            t = last_frame
        times.append((tag, round(t, 6)))
    return times


def pick_frames(frames: Sequence[FrameRef], start: float) -> List[Tuple[FrameTag, FrameRef]]:
    """Match available frames to the five offsets of a window starting at `start`"""
    ordered = sorted(frames, key=lambda f: f.t)
    chosen: List[Tuple[FrameTag, FrameRef]] = []
    for tag in FRAME_TAGS:
        target = start + tag.offset_seconds
        match: Optional[FrameRef] = next((f for f in ordered if f.t >= target - 1e-9), None)
        if match is None and ordered and target - ordered[-1].t <= LAST_FRAME_TOLERANCE:
            match = ordered[-1]
        if match is None:
            continue
        if chosen and match.t <= chosen[-1][1].t:
            continue
        chosen.append((tag, match))
    return chosen


def select_slice(duration: float, which: SliceWhich, frames: Sequence[FrameRef] = ()) -> SliceSelection:
    """Window for `which`; videos shorter than 30 s fall back to the beginning"""
    short = duration < WINDOW_SECONDS
    effective = SliceWhich.BEGINNING if short else which
    if short and which is not SliceWhich.BEGINNING:
        logger.warning("short_video_slice_fallback", duration=duration, requested=which.value)
    start, end = select_window(duration, effective)
    picked = pick_frames(frames, start) if frames else []
    return SliceSelection(
        which=effective,
        start=start,
        end=end,
        short_video=short,
        frames=[(tag.value, ref) for tag, ref in picked],
    )
