"""
Run configuration loading.

Defaults come from `settings`, a JSON file may override any of them and
CLI flags override the file.
"""

import json
import os
from typing import Any, Dict, Optional

import structlog
from pydantic import ValidationError

from app.config.settings import settings
from app.errors import SpecError
from app.models.schemas import AudioModelConfig, EncoderConfig, ImageModelConfig, RunConfig, TrainConfig

logger = structlog.get_logger()

NESTED = ("encoder", "audio", "image", "train")


def default_config_data() -> Dict[str, Any]:
    return {
        "seed": settings.default_seed,
        "out": settings.output_dir,
        "encoder": EncoderConfig.from_settings(settings).model_dump(),
        "audio": AudioModelConfig.from_settings(settings).model_dump(),
        "image": ImageModelConfig.from_settings(settings).model_dump(),
        "train": TrainConfig.from_settings(settings).model_dump(),
    }


def _read_file(path: str) -> Dict[str, Any]:
    if not os.path.exists(path):
        raise SpecError(f"Config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except json.JSONDecodeError as e:
        raise SpecError(f"Config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise SpecError(f"Config file {path} must hold a JSON object")
    return data


def build_run_config(path: Optional[str] = None, **overrides: Any) -> RunConfig:
    """
    Args:
        path: optional JSON config file
        overrides: flag values; None means "not given"

    Raises:
        SpecError: unreadable file, invalid values or a missing dataset
    """
    data = default_config_data()
    if path:
        for key, value in _read_file(path).items():
            if key in NESTED and isinstance(value, dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value

    data.update({k: v for k, v in overrides.items() if v is not None})
    # training seed follows the run seed
    data["train"] = {**data["train"], "seed": data["seed"]}

    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise SpecError(f"Invalid run configuration: {e}") from e

    if config.dataset and not os.path.exists(config.dataset):
        raise SpecError(f"Dataset manifest not found: {config.dataset}")

    logger.debug("run_config_built", source=path or "defaults", slice=config.slice.value,
                 outcomes=[o.value for o in config.outcomes], seed=config.seed, out=config.out)
    return config
