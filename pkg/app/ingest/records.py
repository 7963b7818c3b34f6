"""
Dataset manifest IO.

A manifest is JSON lines, one VideoRecord per line. Media paths may be
relative; they are resolved against the manifest's directory on load.
"""

import json
import os
from typing import Iterable, List

import structlog
from pydantic import ValidationError

from app.errors import DataError
from app.models.schemas import VideoRecord

logger = structlog.get_logger()


def _resolve(path, base_dir: str):
    if path is None or os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(base_dir, path))


def resolve_media(record: VideoRecord, base_dir: str) -> VideoRecord:
    """Return a copy of `record` with every media path made absolute"""
    media = record.media.model_copy(deep=True)
    media.audio_path = _resolve(media.audio_path, base_dir)
    media.thumbnail_path = _resolve(media.thumbnail_path, base_dir)
    for frame in media.frames:
        frame.path = _resolve(frame.path, base_dir)
    return record.model_copy(update={"media": media})


def load_manifest(path: str) -> List[VideoRecord]:
    """
    Read a JSON-lines manifest.

    Raises:
        DataError: missing file, malformed JSON, invalid record or duplicate video_id
    """
    if not os.path.exists(path):
        raise DataError(f"Dataset manifest not found: {path}")

    base_dir = os.path.dirname(os.path.abspath(path))
    records: List[VideoRecord] = []
    seen = set()
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = VideoRecord.model_validate(json.loads(line))
            except (json.JSONDecodeError, ValidationError) as e:
                raise DataError(f"{path}:{line_no}: invalid record ({e})") from e
            if record.video_id in seen:
                raise DataError(f"{path}:{line_no}: duplicate video_id {record.video_id}")
            seen.add(record.video_id)
            records.append(resolve_media(record, base_dir))

    logger.info("manifest_loaded", path=path, records=len(records))
    return records


def save_manifest(records: Iterable[VideoRecord], path: str) -> int:
    """Write records as JSON lines with sorted keys; returns the count"""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record.model_dump(mode="json"), sort_keys=True))
            handle.write("\n")
            count += 1
    return count


def records_by_id(records: Iterable[VideoRecord]) -> dict:
    return {r.video_id: r for r in records}
