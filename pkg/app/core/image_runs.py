"""
Image stage work: thumbnail and multi-frame models, the frame-interval
study, gradient maps and per-item statistics.
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import structlog

from app.config.settings import settings
from app.core.context import RunContext
from app.core.model_io import ModelCard, load_model, model_key, save_model
from app.errors import DataError
from app.image.frames import fill_frames, read_frame
from app.image.gradmap import grad_activation_map
from app.image.heads import FrameCombinerModel, ThumbnailModel
from app.image.items import AVG_FRAMES, item_statistics
from app.ingest.slices import select_slice
from app.models.schemas import (
    FRAME_TAGS,
    FrameTag,
    ItemBoxRecord,
    Outcome,
    OutcomeKind,
    PredictionSource,
    SliceWhich,
    VideoRecord,
)
from app.nn.training import batched_inference, fit_supervised

logger = structlog.get_logger()

# Frame subsets of the interval study, by frame count
FRAME_SUBSETS: Dict[int, List[FrameTag]] = {
    2: [FrameTag.T0, FrameTag.T30],
    3: [FrameTag.T0, FrameTag.T15, FrameTag.T30],
    5: list(FRAME_TAGS),
}
MAIN_FRAME_COUNT = 5
INFERENCE_BATCH = 8
GRADMAP_SAMPLES = 4


def frame_counts() -> List[int]:
    return [MAIN_FRAME_COUNT] + ([2, 3] if settings.run_ablations else [])


def frames_source(count: int) -> str:
    if count == MAIN_FRAME_COUNT:
        return PredictionSource.FRAMES.value
    return f"{PredictionSource.FRAMES.value}_{count}"


# ============================================================================
# Pixels
# ============================================================================


class ImageLoader:
    """Reads thumbnails (cached) and slice frames (from disk per batch)"""

    def __init__(self, ctx: RunContext, which: SliceWhich):
        self.height = ctx.config.image.height
        self.width = ctx.config.image.width
        self.which = which
        self._thumbnails: Dict[str, np.ndarray] = {}

    def thumbnail(self, record: VideoRecord) -> np.ndarray:
        if record.video_id not in self._thumbnails:
            if not record.media.thumbnail_path:
                raise DataError(f"Video {record.video_id} has no thumbnail")
            frame = read_frame(record.media.thumbnail_path, self.height, self.width)
            self._thumbnails[record.video_id] = frame.pixels.astype(np.float32)
        return self._thumbnails[record.video_id]

    def frames(self, record: VideoRecord) -> Tuple[List[str], np.ndarray]:
        """Tags of the frames found and the (5, H, W, 3) stack, padded with the last frame"""
        selection = select_slice(record.duration_seconds, self.which, record.media.frames)
        if not selection.frames:
            raise DataError(f"Video {record.video_id} has no frames in the {self.which.value} slice")
        tags = [tag for tag, _ in selection.frames]
        pixels = [read_frame(ref.path, self.height, self.width, tag, ref.t).pixels
                  for tag, ref in selection.frames]
        return tags, fill_frames(pixels, MAIN_FRAME_COUNT)

    def thumbnails(self, records: List[VideoRecord]) -> np.ndarray:
        return np.stack([self.thumbnail(r) for r in records])

    def frame_batch(self, records: List[VideoRecord], count: int = MAIN_FRAME_COUNT) -> np.ndarray:
        positions = [FRAME_TAGS.index(t) for t in FRAME_SUBSETS[count]]
        return np.stack([self.frames(r)[1][positions] for r in records])


def _targets(ctx: RunContext, outcome: Outcome, split: str) -> np.ndarray:
    values = ctx.outcome_values(outcome, ctx.split.ids(split))
    return values.astype(int) if outcome.kind is OutcomeKind.BINARY else values


def _loss(outcome: Outcome) -> str:
    return "softmax_ce" if outcome.kind is OutcomeKind.BINARY else "mse"


# ============================================================================
# Models
# ============================================================================


def _thumbnail_model(ctx: RunContext, outcome: Outcome, which: SliceWhich) -> ThumbnailModel:
    return ThumbnailModel(ctx.config.image, outcome.kind, seed=ctx.config.seed,
                          name=f"image/{which.value}/thumbnail/{outcome.value}")


def _frames_model(ctx: RunContext, outcome: Outcome, count: int, which: SliceWhich) -> FrameCombinerModel:
    return FrameCombinerModel(ctx.config.image, outcome.kind, num_frames=count, seed=ctx.config.seed,
                              name=f"image/{which.value}/frames{count}/{outcome.value}")


def _fit(ctx: RunContext, model, outcome: Outcome, batch) -> List[str]:
    records = {s: ctx.split_records(s) for s in ("train", "validation")}

    def forward(split, idx, training, step):
        return model.forward(batch([records[split][i] for i in idx]), training, step)

    report, scaler = fit_supervised(model.name, model.store, forward, _targets(ctx, outcome, "train"),
                                    _targets(ctx, outcome, "validation"), _loss(outcome), ctx.config.train)
    key = model_key(*model.name.split("/"))
    return save_model(ctx.path("models"), key, model.store, ModelCard(name=model.name, scaler=scaler, report=report))


def train_image(ctx: RunContext) -> List[str]:
    loader = ImageLoader(ctx, ctx.config.slice)
    written = []
    for outcome in ctx.config.outcomes:
        written += _fit(ctx, _thumbnail_model(ctx, outcome, loader.which), outcome, loader.thumbnails)
        for count in frame_counts():
            written += _fit(ctx, _frames_model(ctx, outcome, count, loader.which), outcome,
                            lambda rs, count=count: loader.frame_batch(rs, count))
    return written


def _load(ctx: RunContext, model) -> ModelCard:
    return load_model(ctx.path("models"), model_key(*model.name.split("/")), model.store)


# ============================================================================
# Inference
# ============================================================================


def _predict_all(ctx: RunContext, model, card: ModelCard, batch, source: str, outcome: Outcome) -> List[dict]:
    records = ctx.records
    tags = ctx.split.tag_of()
    batches = [records[s:s + INFERENCE_BATCH] for s in range(0, len(records), INFERENCE_BATCH)]
    outputs = batched_inference(lambda rs: model.predict(batch(rs)), batches, settings.pipeline_threads)
    rows = []
    for rs, values in zip(batches, outputs):
        if outcome.kind is not OutcomeKind.BINARY:
            values = card.scaler.inverse(values)
        rows += [{"video_id": r.video_id, "outcome": outcome.value, "source": source,
                  "prediction": float(v), "split": tags[r.video_id]} for r, v in zip(rs, values)]
    return rows


def slice_boxes(record: VideoRecord, which: SliceWhich) -> List[ItemBoxRecord]:
    """Thumbnail boxes plus the frame boxes annotated for one slice"""
    return [b for b in record.media.boxes
            if b.frame_tag == FrameTag.THUMBNAIL.value or b.slice is which]


def _stat_rows(video_id: str, outcome: str, stats) -> List[dict]:
    rows = []
    for data_type in (FrameTag.THUMBNAIL.value, AVG_FRAMES):
        for category, stat in stats.get(data_type, {}).items():
            rows.append({"video_id": video_id, "outcome": outcome, "data_type": data_type,
                         "category": category.value, "mean_gradient": stat.mean_gradient,
                         "size_pct": stat.size_pct})
    return rows


def _gradient_stats(ctx: RunContext, loader: ImageLoader, outcome: Outcome,
                    thumb: ThumbnailModel, frames: FrameCombinerModel, samples: Dict[str, np.ndarray]) -> List[dict]:
    """Item statistics of holdout videos; gradient maps need recorded graphs"""
    rows = []
    holdout = ctx.split_records("holdout")
    for s in range(0, len(holdout), INFERENCE_BATCH):
        batch = holdout[s:s + INFERENCE_BATCH]
        thumbnails = loader.thumbnails(batch)
        loaded = [loader.frames(r) for r in batch]
        stacks = np.stack([pixels for _, pixels in loaded])
        thumb_maps = grad_activation_map(thumb, thumbnails)
        frame_maps = grad_activation_map(frames, stacks)
        for b, record in enumerate(batch):
            found = loaded[b][0]
            maps = {FrameTag.THUMBNAIL.value: thumb_maps[b]}
            maps.update({tag: frame_maps[b, j] for j, tag in enumerate(found)})
            stats = item_statistics(maps, slice_boxes(record, loader.which))
            rows += _stat_rows(record.video_id, outcome.value, stats)
        if s == 0 and not samples:
            k = min(GRADMAP_SAMPLES, len(batch))
            samples.update({
                "video_ids": np.array([r.video_id for r in batch[:k]]),
                "outcome": np.array(outcome.value),
                "thumbnails": thumbnails[:k], "thumbnail_maps": thumb_maps[:k],
                "frames": stacks[:k], "frame_maps": frame_maps[:k],
            })
    return rows


def box_sizes(ctx: RunContext, which: SliceWhich) -> pd.DataFrame:
    """
    Item sizes for every video straight from the boxes, in the item-stats
    layout without gradients.
    """
    height, width = ctx.config.image.height, ctx.config.image.width
    rows = []
    for record in ctx.records:
        boxes = slice_boxes(record, which)
        tags = {b.frame_tag for b in boxes}
        maps = {tag: np.zeros((height, width)) for tag in tags}
        rows += _stat_rows(record.video_id, "", item_statistics(maps, boxes))
    columns = ["video_id", "data_type", "category", "size_pct"]
    return pd.DataFrame(rows, columns=["video_id", "outcome", "data_type", "category",
                                       "mean_gradient", "size_pct"])[columns]


def predict_image(ctx: RunContext, which: Optional[SliceWhich] = None
                  ) -> Tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame, Dict[str, np.ndarray]]:
    """
    Returns:
        (main predictions for every video, frame-interval predictions,
         item statistics of holdout videos, sample gradient maps)
    """
    which = which or ctx.config.slice
    loader = ImageLoader(ctx, which)
    predictions, variants, stats = [], [], []
    samples: Dict[str, np.ndarray] = {}
    for outcome in ctx.config.outcomes:
        thumb = _thumbnail_model(ctx, outcome, which)
        card = _load(ctx, thumb)
        predictions += _predict_all(ctx, thumb, card, loader.thumbnails, PredictionSource.THUMBNAIL.value, outcome)

        main = None
        for count in frame_counts():
            model = _frames_model(ctx, outcome, count, which)
            card = _load(ctx, model)
            rows = _predict_all(ctx, model, card, lambda rs, count=count: loader.frame_batch(rs, count),
                                frames_source(count), outcome)
            if count == MAIN_FRAME_COUNT:
                predictions += rows
                main = model
            else:
                variants += rows

        stats += _gradient_stats(ctx, loader, outcome, thumb, main, samples)
        logger.info("image_predicted", outcome=outcome.value, slice=which.value)
    tags = ctx.split.tag_of()
    items = pd.DataFrame(stats, columns=["video_id", "outcome", "data_type", "category",
                                         "mean_gradient", "size_pct"])
    items["split"] = items["video_id"].map(tags)
    return pd.DataFrame(predictions), pd.DataFrame(variants), items, samples
