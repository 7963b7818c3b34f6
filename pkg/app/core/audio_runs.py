"""
Audio stage work: the moment classifier, cached per-slice moment
features, and the attention sequence models with their variants.
"""

import os
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import structlog

from app.audio.categories import CLASS_NAMES
from app.audio.classifier import MomentClassifier, SoundClassProbs, class_labels_from_names
from app.audio.frontend import MomentPatchSeries, band_energies, clip_to_patches, read_wav
from app.audio.sequence import AttentionSequenceModel
from app.config.settings import settings
from app.core.context import RunContext
from app.core.model_io import ModelCard, load_model, model_key, save_model
from app.errors import DataError
from app.interpretation.common import ci_column
from app.models.schemas import Outcome, OutcomeKind, PredictionSource, SliceWhich, SoundCategory, VideoRecord
from app.nn.training import batched_inference, fit_supervised
from app.synth.generator import truth_moment_classes

logger = structlog.get_logger()

FEATURES_FILE = "audio.npz"
MAIN_VARIANT = "full"
ABLATION_VARIANTS = ("no_attention", "no_classifier")
INFERENCE_BATCH = 16


def classifier_key(which: SliceWhich) -> str:
    return model_key("audio", which.value, "classifier")


def audio_variants() -> List[str]:
    return [MAIN_VARIANT] + (list(ABLATION_VARIANTS) if settings.run_ablations else [])


def variant_source(variant: str) -> str:
    """Prediction source name of a sequence-model variant"""
    if variant == MAIN_VARIANT:
        return PredictionSource.AUDIO.value
    return f"{PredictionSource.AUDIO.value}_{variant}"


# ============================================================================
# Moment classifier
# ============================================================================


def _patches(record: VideoRecord, which: SliceWhich) -> MomentPatchSeries:
    if not record.media.audio_path:
        raise DataError(f"Video {record.video_id} has no audio track")
    samples, rate = read_wav(record.media.audio_path)
    return clip_to_patches(samples, rate, which)


def _labelled(ctx: RunContext, records: List[VideoRecord]) -> Tuple[np.ndarray, np.ndarray]:
    patches, labels = [], []
    for record in records:
        names = truth_moment_classes(ctx.truth, record.video_id, ctx.config.slice)
        if not names:
            continue
        series = _patches(record, ctx.config.slice)
        count = min(len(series), len(names))
        patches.append(series.patches[:count])
        labels.append(class_labels_from_names(names[:count], CLASS_NAMES[:ctx.config.audio.num_classes]))
    if not patches:
        return np.zeros((0, 1, 1)), np.zeros((0, ctx.config.audio.num_classes))
    return np.concatenate(patches), np.concatenate(labels)


def train_classifier(ctx: RunContext) -> Tuple[Optional[MomentClassifier], List[str]]:
    """
    Fit the sound classifier on labelled moments of a subset of training
    videos. Without labels the untrained classifier is saved and flagged,
    and the sequence models fall back to band energies.
    """
    classifier = MomentClassifier(ctx.config.audio, seed=ctx.config.seed)
    trained = False
    report = None
    if ctx.truth is None:
        logger.warning("moment_labels_unavailable", reason="no ground truth beside the manifest")
    else:
        count = settings.audio_classifier_videos
        x_train, y_train = _labelled(ctx, ctx.split_records("train")[:count])
        x_val, y_val = _labelled(ctx, ctx.split_records("validation")[:max(2, count // 4)])
        if len(x_train) and len(x_val):
            report, _ = fit_supervised(
                classifier.name, classifier.store,
                lambda split, idx, training, step: classifier.logits((x_train if split == "train" else x_val)[idx]),
                y_train, y_val, "bce", ctx.config.train,
            )
            trained = True
        else:
            logger.warning("moment_labels_unavailable", reason="no labelled moments in the split")

    card = ModelCard(name=classifier.name, report=report,
                     extra={"trained": trained, "slice": ctx.config.slice.value})
    written = save_model(ctx.path("models"), classifier_key(ctx.config.slice), classifier.store, card)
    return (classifier if trained else None), written


def load_classifier(ctx: RunContext, which: Optional[SliceWhich] = None) -> Optional[MomentClassifier]:
    """The trained classifier of a slice, or None when it was saved untrained"""
    classifier = MomentClassifier(ctx.config.audio, seed=ctx.config.seed)
    card = load_model(ctx.path("models"), classifier_key(which or ctx.config.slice), classifier.store)
    return classifier if card.extra.get("trained") else None


# ============================================================================
# Moment features
# ============================================================================


def moment_features(ctx: RunContext, classifier: Optional[MomentClassifier],
                    which: Optional[SliceWhich] = None, refresh: bool = False) -> Dict[str, np.ndarray]:
    """
    Class probabilities (n, M, K) and band energies (n, M, 64) for every
    video of one slice, cached under features/<slice>/. `refresh` ignores
    the cache, as after retraining the classifier.
    """
    which = which or ctx.config.slice
    path = ctx.slice_path("features", FEATURES_FILE, which.value)
    if os.path.exists(path) and not refresh:
        with np.load(path) as cached:
            features = {k: cached[k] for k in cached.files}
        if list(features["video_ids"]) == [r.video_id for r in ctx.records] and \
                bool(features["has_classifier"]) == (classifier is not None):
            return features
        logger.info("audio_features_stale", path=path)

    num_classes = ctx.config.audio.num_classes

    def run(record: VideoRecord):
        series = _patches(record, which)
        energies = band_energies(series)
        if classifier is None:
            return np.zeros((len(series), num_classes)), energies
        return classifier.classify_moments(series.patches).probs, energies

    rows = batched_inference(run, ctx.records, settings.pipeline_threads)
    moments = min(len(p) for p, _ in rows)
    features = {
        "video_ids": np.array([r.video_id for r in ctx.records]),
        "probs": np.stack([p[:moments] for p, _ in rows]),
        "energies": np.stack([e[:moments] for _, e in rows]),
        "has_classifier": np.array(classifier is not None),
    }
    np.savez_compressed(path, **features)
    logger.info("audio_features_cached", slice=which.value, videos=len(rows), moments=moments)
    return features


def sequence_inputs(ctx: RunContext, features: Dict[str, np.ndarray], variant: str) -> np.ndarray:
    """Class probabilities, or band energies standardized on the training split"""
    if variant != "no_classifier" and bool(features["has_classifier"]):
        return features["probs"]
    energies = features["energies"]
    train = np.isin(features["video_ids"], ctx.split.train)
    mean = energies[train].mean(axis=(0, 1))
    std = energies[train].std(axis=(0, 1))
    return (energies - mean) / np.where(std > 0, std, 1.0)


def moment_indicators(features: Dict[str, np.ndarray]) -> pd.DataFrame:
    """Per-moment category indicators of every video (video_id, moment, CI_...)"""
    rows = []
    for vid, probs in zip(features["video_ids"], features["probs"]):
        matrix = SoundClassProbs(probs).indicator_matrix()
        for moment, flags in enumerate(matrix):
            row = {"video_id": str(vid), "moment": moment}
            row.update({ci_column(c.value): int(f) for c, f in zip(SoundCategory, flags)})
            rows.append(row)
    return pd.DataFrame(rows)


# ============================================================================
# Sequence models
# ============================================================================


def _sequence_model(ctx: RunContext, input_dim: int, variant: str, outcome: Outcome,
                    which: SliceWhich) -> AttentionSequenceModel:
    config = ctx.config.audio.model_copy(update={"variant": variant})
    return AttentionSequenceModel(input_dim, config, outcome.kind, seed=ctx.config.seed,
                                  name=f"audio/{which.value}/{variant}/{outcome.value}")


def train_audio(ctx: RunContext) -> List[str]:
    which = ctx.config.slice
    classifier, written = train_classifier(ctx)
    features = moment_features(ctx, classifier, which, refresh=True)
    rows = {vid: i for i, vid in enumerate(features["video_ids"])}

    for variant in audio_variants():
        inputs = sequence_inputs(ctx, features, variant)
        split_inputs = {s: inputs[[rows[v] for v in ctx.split.ids(s)]] for s in ("train", "validation")}
        for outcome in ctx.config.outcomes:
            model = _sequence_model(ctx, inputs.shape[-1], variant, outcome, which)

            def forward(split, idx, training, step, model=model):
                return model.forward(split_inputs[split][idx], training, step)[0]

            report, scaler = fit_supervised(
                model.name, model.store, forward,
                ctx.outcome_values(outcome, ctx.split.train),
                ctx.outcome_values(outcome, ctx.split.validation),
                "bce" if outcome.is_binary else "mse", ctx.config.train,
            )
            written += save_model(ctx.path("models"), model_key(*model.name.split("/")), model.store,
                                  ModelCard(name=model.name, scaler=scaler, report=report))
    return written


def predict_audio(ctx: RunContext, which: Optional[SliceWhich] = None) -> Tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame]:
    """
    Returns:
        (main predictions for every video, ablation-variant predictions,
         moment attention export for holdout videos)
    """
    which = which or ctx.config.slice
    features = moment_features(ctx, load_classifier(ctx, which), which)
    tags = ctx.split.tag_of()
    ids = [str(v) for v in features["video_ids"]]
    batches = [np.arange(s, min(s + INFERENCE_BATCH, len(ids))) for s in range(0, len(ids), INFERENCE_BATCH)]
    indicators = np.stack([SoundClassProbs(p).indicator_matrix() for p in features["probs"]])

    predictions, variants, attention = [], [], []
    for variant in audio_variants():
        inputs = sequence_inputs(ctx, features, variant)
        for outcome in ctx.config.outcomes:
            model = _sequence_model(ctx, inputs.shape[-1], variant, outcome, which)
            card = load_model(ctx.path("models"), model_key(*model.name.split("/")), model.store)
            outputs = batched_inference(lambda idx, model=model: model.predict(inputs[idx]), batches,
                                        settings.pipeline_threads)
            for idx, (values, weights) in zip(batches, outputs):
                if outcome.kind is not OutcomeKind.BINARY:
                    values = card.scaler.inverse(values)
                for b, i in enumerate(idx):
                    split = tags[ids[i]]
                    row = {"video_id": ids[i], "outcome": outcome.value, "source": variant_source(variant),
                           "prediction": float(values[b]), "split": split}
                    (predictions if variant == MAIN_VARIANT else variants).append(row)
                    if variant != MAIN_VARIANT or split != "holdout":
                        continue
                    for moment, weight in enumerate(weights[b]):
                        entry = {"video_id": ids[i], "outcome": outcome.value, "moment": moment,
                                 "weight": float(weight), "split": split}
                        entry.update({ci_column(c.value): int(indicators[i, moment, k])
                                      for k, c in enumerate(SoundCategory)})
                        attention.append(entry)
            logger.info("audio_predicted", variant=variant, outcome=outcome.value, slice=which.value)
    return pd.DataFrame(predictions), pd.DataFrame(variants), pd.DataFrame(attention)
