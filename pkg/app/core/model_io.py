"""Checkpoint plus metadata card for every trained network"""

import json
import os
from typing import Any, Dict, Optional

from pydantic import BaseModel, Field

from app.errors import MissingArtifactError
from app.nn.params import ParamStore
from app.nn.training import TargetScaler, TrainingReport


class ModelCard(BaseModel):
    name: str
    scaler: TargetScaler = Field(default_factory=TargetScaler)
    report: Optional[TrainingReport] = None
    extra: Dict[str, Any] = Field(default_factory=dict)


def model_key(*parts: str) -> str:
    return "__".join(p.replace("/", "_") for p in parts)


def save_model(models_dir: str, key: str, store: ParamStore, card: ModelCard) -> list:
    os.makedirs(models_dir, exist_ok=True)
    params = os.path.join(models_dir, f"{key}.params")
    meta = os.path.join(models_dir, f"{key}.json")
    store.save(params)
    with open(meta, "w", encoding="utf-8") as handle:
        json.dump(card.model_dump(mode="json"), handle, indent=2, sort_keys=True)
    return [params, meta]


def load_model(models_dir: str, key: str, store: ParamStore, stage: str = "predict") -> ModelCard:
    """
    Raises:
        MissingArtifactError: the checkpoint was never trained
    """
    params = os.path.join(models_dir, f"{key}.params")
    meta = os.path.join(models_dir, f"{key}.json")
    if not (os.path.exists(params) and os.path.exists(meta)):
        raise MissingArtifactError(stage, os.path.join("models", f"{key}.params"), "train")
    store.load(params)
    with open(meta, "r", encoding="utf-8") as handle:
        return ModelCard.model_validate(json.load(handle))
