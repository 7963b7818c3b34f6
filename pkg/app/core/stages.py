"""
Stage handlers: one per CLI command, registered with the pipeline engine
together with the artifacts each must leave behind.
"""

import json
import os
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
import structlog

from app.adapters.exporters import (
    fit_result_rows,
    hypothesis_rows,
    learning_rows,
    read_csv,
    scorecard_rows,
    write_csv,
    write_json,
    write_text,
)
from app.adapters.plots import plot_brand_scatter, plot_frame_gradmaps, plot_moment_attention, plot_token_heatmap
from app.adapters.reports import render_hypothesis_report, render_performance, render_scorecard, render_variance
from app.config.settings import settings
from app.core.audio_runs import load_classifier, moment_features, moment_indicators, predict_audio, train_audio
from app.core.context import LEXICON, MANIFEST, SPLIT, TRUTH, RunContext
from app.core.fusion_runs import run_fusion, slice_combination
from app.core.image_runs import box_sizes, predict_image, train_image
from app.core.pipeline_engine import register_stage_handler
from app.core.text_runs import VOCAB_FILE, build_vocab, load_vocab, predict_text, train_text
from app.fusion.features import SOURCE_GROUPS
from app.interpretation.common import IMAGE_DATA_TYPES, duration_column, size_column, text_eq8_column, video_covariates
from app.interpretation.engine import Exports, interpret, slice_analysis
from app.interpretation.heterogeneity import brand_heterogeneity
from app.interpretation.learning import learning_patterns
from app.models.schemas import (
    REPORTED_SOUND_CATEGORIES,
    ItemCategory,
    Outcome,
    PlantSpec,
    PredictionSource,
    RunConfig,
    SliceWhich,
    Stage,
    TextField,
)
from app.scoring.pdp import fit_pdp_bounds
from app.scoring.scorecard import score_video
from app.synth.generator import generate
from app.synth.recovery import recovery_table

logger = structlog.get_logger()

TRAINING_SUMMARY = "training_summary.json"
REPORT_VIDEOS = 3


def _slice_file(ctx: RunContext, area: str, name: str, which: Optional[SliceWhich] = None) -> str:
    return ctx.slice_path(area, name, (which or ctx.config.slice).value)


# ============================================================================
# synth
# ============================================================================


def run_synth(config: RunConfig) -> List[str]:
    """Corpus for the configured PlantSpec, or a default spec covering every slice"""
    spec = config.plant or PlantSpec(slices=list(SliceWhich))
    spec = spec.model_copy(update={"seed": config.seed})
    corpus = generate(spec, config.out, threads=settings.pipeline_threads)
    return [corpus.manifest_path, corpus.lexicon_path, corpus.truth_path]


# ============================================================================
# train
# ============================================================================


def run_train(config: RunConfig) -> List[str]:
    ctx = RunContext(config)
    vocab = build_vocab(ctx)
    written = [ctx.path(SPLIT), ctx.models_path(VOCAB_FILE)]
    written += train_text(ctx, vocab)
    written += train_audio(ctx)
    written += train_image(ctx)

    models = {}
    for path in written:
        if path.endswith(".json") and os.path.dirname(path) == os.path.dirname(ctx.models_path(VOCAB_FILE)):
            with open(path, "r", encoding="utf-8") as handle:
                card = json.load(handle)
            report = card.get("report") or {}
            models[card["name"]] = {"best_val": report.get("best_val"), "steps_run": report.get("steps_run"),
                                    "best_step": report.get("best_step")}
    summary = {"seed": config.seed, "slice": config.slice.value,
               "outcomes": [o.value for o in config.outcomes], "models": models}
    written.append(write_json(summary, ctx.models_path(TRAINING_SUMMARY)))
    logger.info("training_complete", models=len(models))
    return written


# ============================================================================
# predict
# ============================================================================


def run_predict(config: RunConfig) -> List[str]:
    ctx = RunContext(config)
    text_predictions, text_attention = predict_text(ctx, load_vocab(ctx))
    audio_predictions, audio_variants, moment_attention = predict_audio(ctx)
    image_predictions, frame_variants, item_stats, samples = predict_image(ctx)

    predictions = pd.concat([text_predictions, audio_predictions, image_predictions], ignore_index=True)
    variants = pd.concat([audio_variants, frame_variants], ignore_index=True)
    written = [
        write_csv(predictions, _slice_file(ctx, "exports", "predictions.csv")),
        write_csv(text_attention, _slice_file(ctx, "exports", "text_attention.csv")),
        write_csv(moment_attention, _slice_file(ctx, "exports", "moment_attention.csv")),
        write_csv(item_stats, _slice_file(ctx, "exports", "item_stats.csv")),
    ]
    if len(variants):
        written.append(write_csv(variants, _slice_file(ctx, "exports", "variant_predictions.csv")))
    if samples:
        path = _slice_file(ctx, "exports", "gradmaps.npz")
        np.savez_compressed(path, **samples)
        written.append(path)
    logger.info("predictions_exported", slice=config.slice.value, rows=len(predictions))
    return written


# ============================================================================
# fuse
# ============================================================================


def _read_optional(path: str) -> Optional[pd.DataFrame]:
    return read_csv(path) if os.path.exists(path) else None


def run_fuse(config: RunConfig) -> List[str]:
    ctx = RunContext(config)
    predictions = read_csv(_slice_file(ctx, "exports", "predictions.csv"))
    variants = _read_optional(_slice_file(ctx, "exports", "variant_predictions.csv"))
    tables = run_fusion(ctx, predictions, variants)

    written = [write_csv(table, _slice_file(ctx, "fusion", f"{name}.csv")) for name, table in tables.items()]
    written.append(write_text(render_performance(tables["model_performance"], config.slice.value),
                              _slice_file(ctx, "fusion", "model_performance.md")))
    if len(tables["brand_variance"]):
        written.append(write_text(render_variance(tables["brand_variance"], config.slice.value),
                                  _slice_file(ctx, "fusion", "brand_variance.md")))

    by_slice = {w: os.path.join(config.out, "exports", w.value, "predictions.csv") for w in SliceWhich}
    if all(os.path.exists(p) for p in by_slice.values()):
        combined = slice_combination(ctx, {w: read_csv(p) for w, p in by_slice.items()})
        written.append(write_csv(combined, _slice_file(ctx, "fusion", "slice_combination.csv")))
    else:
        logger.info("slice_combination_skipped", reason="exports missing for some slices")
    return written


# ============================================================================
# interpret
# ============================================================================


def load_exports(ctx: RunContext, which: SliceWhich) -> Exports:
    """Predict-stage exports plus the combined predictions of the fuse stage"""
    predictions = read_csv(_slice_file(ctx, "exports", "predictions.csv", which))
    combined = read_csv(_slice_file(ctx, "fusion", "combined_predictions.csv", which))
    return Exports(
        predictions=pd.concat([predictions, combined], ignore_index=True),
        text_attention=read_csv(_slice_file(ctx, "exports", "text_attention.csv", which)),
        moment_attention=read_csv(_slice_file(ctx, "exports", "moment_attention.csv", which)),
        item_stats=read_csv(_slice_file(ctx, "exports", "item_stats.csv", which)),
    )


def slice_covariates(ctx: RunContext, which: SliceWhich) -> pd.DataFrame:
    """Covariates of every video, with durations and sizes computed for the slice"""
    moments = moment_indicators(moment_features(ctx, load_classifier(ctx, which), which))
    return video_covariates(ctx.records, ctx.lexicon, moments=moments, items=box_sizes(ctx, which))


def learning_elements() -> List[str]:
    elements = [text_eq8_column(f) for f in TextField]
    elements += [duration_column(c.value) for c in REPORTED_SOUND_CATEGORIES]
    elements += [size_column(IMAGE_DATA_TYPES[1], c.value) for c in ItemCategory]
    return elements


def run_interpret(config: RunConfig) -> List[str]:
    ctx = RunContext(config)
    which = config.slice
    exports = load_exports(ctx, which)
    covariates = slice_covariates(ctx, which)
    if which is SliceWhich.BEGINNING:
        report = interpret(exports, covariates, config.outcomes, which.value)
    else:
        report = slice_analysis(which, exports, covariates, config.outcomes)

    def out(name: str) -> str:
        return _slice_file(ctx, "interpret", name)

    written = [
        write_json(report.hypotheses, out("hypotheses.json")),
        write_csv(hypothesis_rows(report.hypotheses), out("hypotheses.csv")),
        write_csv(fit_result_rows(report.results), out("regressions.csv")),
        write_csv(fit_result_rows(report.step2_variants), out("step2_variants.csv")),
        write_text(render_hypothesis_report(report.hypotheses, config.outcomes, report.cross_modal),
                   out("hypothesis_report.md")),
    ]
    if report.cross_modal is not None:
        written.append(write_csv(fit_result_rows([report.cross_modal]), out("cross_modal.csv")))

    elements = [e for e in learning_elements() if e in covariates.columns]
    contrasts, fraction = learning_patterns(covariates, elements)
    written.append(write_csv(learning_rows(contrasts), out("learning_patterns.csv")))
    written.append(write_json({"fraction_significant_both_halves": fraction, "elements": elements},
                              out("learning_summary.json")))

    heterogeneity = []
    for field in TextField:
        for outcome in config.outcomes:
            table = brand_heterogeneity(exports.text_attention, exports.predictions, covariates, field, outcome)
            if len(table):
                heterogeneity.append(table.assign(field=field.value, outcome=outcome.value))
    if heterogeneity:
        written.append(write_csv(pd.concat(heterogeneity, ignore_index=True), out("brand_heterogeneity.csv")))

    if ctx.truth is not None:
        recovery = recovery_table(ctx.truth, report.hypotheses)
        written.append(write_csv(recovery, out("recovery.csv")))
        logger.info("planted_effects_checked", effects=recovery["effect"].nunique(),
                    recovered=int(recovery["recovered"].sum()))
    return written


# ============================================================================
# score
# ============================================================================


def importance_weights(importance: pd.DataFrame, outcomes: List[Outcome]) -> Dict[Outcome, Dict[PredictionSource, float]]:
    """Combined-model importance of the six unstructured elements per outcome"""
    label_source = {label: source for source, label in SOURCE_GROUPS.items()}
    weights: Dict[Outcome, Dict[PredictionSource, float]] = {}
    for outcome in outcomes:
        block = importance[(importance["outcome"] == outcome.value) & importance["group"].isin(label_source)]
        weights[outcome] = {label_source[g]: float(p) for g, p in zip(block["group"], block["importance_pct"])}
    return weights


def run_score(config: RunConfig) -> List[str]:
    ctx = RunContext(config)
    predictions = read_csv(_slice_file(ctx, "exports", "predictions.csv"))
    importance = read_csv(_slice_file(ctx, "fusion", "importance.csv"))
    outcomes = [o for o in config.outcomes if o.value in set(importance["outcome"])]
    bounds = fit_pdp_bounds(predictions, ctx.split.train, outcomes)
    weights = importance_weights(importance, outcomes)

    holdout = predictions[predictions["video_id"].isin(set(ctx.split.holdout))]
    cards = []
    for video_id, block in holdout.groupby("video_id", sort=True):
        per_outcome = {}
        for outcome in outcomes:
            rows = block[block["outcome"] == outcome.value]
            per_outcome[outcome] = {PredictionSource(s): float(p) for s, p in zip(rows["source"], rows["prediction"])}
        cards.append(score_video(str(video_id), per_outcome, bounds, weights))

    written = [
        write_csv(scorecard_rows(cards), _slice_file(ctx, "score", "scorecards.csv")),
        write_json({"bounds": bounds.bounds}, _slice_file(ctx, "score", "pdp_bounds.json")),
        write_json([c.model_dump(mode="json") for c in cards], _slice_file(ctx, "score", "scorecards.json")),
    ]
    if cards:
        written.append(write_text(render_scorecard(cards[0]), _slice_file(ctx, "score", "scorecard_example.txt")))
    logger.info("scorecards_written", videos=len(cards))
    return written


# ============================================================================
# report
# ============================================================================


def run_report(config: RunConfig) -> List[str]:
    ctx = RunContext(config)
    which = config.slice
    outcome = config.outcomes[0].value
    figures: List[dict] = []

    def emit(kind: str, table: pd.DataFrame, stem: str, draw) -> None:
        """Write the plotted numbers and draw the figure beside them"""
        csv_path = write_csv(table, _slice_file(ctx, "report", f"{stem}.csv"))
        png_path = draw(_slice_file(ctx, "report", f"{stem}.png"))
        figures.append({"figure": kind, "image": os.path.relpath(png_path, config.out),
                        "data": os.path.relpath(csv_path, config.out)})

    attention = read_csv(_slice_file(ctx, "exports", "text_attention.csv"))
    attention = attention[attention["outcome"] == outcome]
    videos = sorted(attention["video_id"].unique())[:REPORT_VIDEOS]
    for field in TextField:
        for vid in videos:
            rows = attention[(attention["video_id"] == vid) & (attention["field"] == field.value)]
            if len(rows):
                emit("token_heatmap", rows, f"tokens_{field.value}_{vid}",
                     lambda p: plot_token_heatmap(rows, p, f"{vid} {field.value} ({outcome})"))

    moments = read_csv(_slice_file(ctx, "exports", "moment_attention.csv"))
    moments = moments[moments["outcome"] == outcome]
    for vid in sorted(moments["video_id"].unique())[:REPORT_VIDEOS]:
        rows = moments[moments["video_id"] == vid]
        emit("moment_attention", rows, f"moments_{vid}",
             lambda p: plot_moment_attention(rows, p, f"{vid} ({outcome})"))

    gradmaps = _slice_file(ctx, "exports", "gradmaps.npz")
    if os.path.exists(gradmaps):
        with np.load(gradmaps) as stored:
            sample = {k: stored[k] for k in stored.files}
        for i, vid in enumerate(sample["video_ids"]):
            maps = [sample["thumbnail_maps"][i]] + list(sample["frame_maps"][i])
            table = pd.DataFrame({
                "video_id": str(vid),
                "image": ["thumbnail"] + [f"frame{j}" for j in range(len(maps) - 1)],
                "mean_gradient": [float(m.mean()) for m in maps],
                "max_abs_gradient": [float(np.abs(m).max()) for m in maps],
            })
            emit("frame_gradmap", table, f"gradmap_{vid}", lambda p: plot_frame_gradmaps(
                sample["thumbnails"][i], sample["thumbnail_maps"][i], sample["frames"][i],
                sample["frame_maps"][i], p, f"{vid} ({sample['outcome']})"))

    brands = _read_optional(_slice_file(ctx, "interpret", "brand_heterogeneity.csv"))
    if brands is not None:
        for (field, brand_outcome), table in brands.groupby(["field", "outcome"], sort=True):
            emit("brand_scatter", table, f"brands_{field}_{brand_outcome}",
                 lambda p: plot_brand_scatter(table, p, f"{field} ({brand_outcome})"))

    written = [entry for f in figures for entry in (os.path.join(config.out, f["image"]),
                                                     os.path.join(config.out, f["data"]))]
    written.append(write_csv(pd.DataFrame(figures, columns=["figure", "image", "data"]),
                             _slice_file(ctx, "report", "figures.csv")))
    logger.info("report_rendered", slice=which.value, figures=len(figures))
    return written


# ============================================================================
# Registration
# ============================================================================

register_stage_handler(Stage.SYNTH, run_synth, [MANIFEST, LEXICON, TRUTH])
register_stage_handler(Stage.TRAIN, run_train, [f"models/{VOCAB_FILE}", f"models/{TRAINING_SUMMARY}"])
register_stage_handler(Stage.PREDICT, run_predict, [
    "exports/{slice}/predictions.csv",
    "exports/{slice}/text_attention.csv",
    "exports/{slice}/moment_attention.csv",
    "exports/{slice}/item_stats.csv",
])
register_stage_handler(Stage.FUSE, run_fuse, [
    "fusion/{slice}/combined_predictions.csv",
    "fusion/{slice}/importance.csv",
    "fusion/{slice}/model_performance.csv",
])
register_stage_handler(Stage.INTERPRET, run_interpret, [
    "interpret/{slice}/hypotheses.json",
    "interpret/{slice}/hypotheses.csv",
    "interpret/{slice}/hypothesis_report.md",
])
register_stage_handler(Stage.SCORE, run_score, ["score/{slice}/scorecards.csv"])
register_stage_handler(Stage.REPORT, run_report, ["report/{slice}/figures.csv"])
