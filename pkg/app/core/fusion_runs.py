"""
Combined-model work of the fuse stage: ridge over structured features and
the six unstructured predictions, importance tables, holdout metrics and
the comparison studies built on the same matrices.
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import structlog

from app.core.context import RunContext
from app.errors import ConvergenceError, DataError, SingularDesignError, UndefinedImportanceError, UndefinedShareError
from app.fusion.features import FeatureMatrix, build_feature_matrix, encode_features
from app.fusion.importance import importance
from app.fusion.linear import FittedLinearModel, select_lambda
from app.fusion.metrics import holdout_metrics, metric_for
from app.ingest.features import structured_frame, text_covariates
from app.interpretation.common import COMBINED_SOURCE, text_eq8_column
from app.interpretation.text import FIELD_SOURCES
from app.models.schemas import LinearKind, Outcome, PredictionSource, SliceWhich, TextField
from app.scoring.variance import improvement, variance_decomposition

logger = structlog.get_logger()

COMPARISON_KINDS = (LinearKind.OLS, LinearKind.RIDGE, LinearKind.LASSO, LinearKind.ELASTIC_NET)
SLICE_VARYING_SOURCES = (PredictionSource.AUDIO, PredictionSource.FRAMES)


def wide_predictions(predictions: pd.DataFrame, outcome: Outcome) -> pd.DataFrame:
    """video_id x source values for one outcome"""
    block = predictions[predictions["outcome"] == outcome.value]
    return block.pivot(index="video_id", columns="source", values="prediction")


class FusionInputs:
    """Feature matrices of one outcome, scaled on the training rows"""

    def __init__(self, ctx: RunContext, predictions: pd.DataFrame, outcome: Outcome):
        self.ctx = ctx
        self.outcome = outcome
        structured = structured_frame(ctx.records)
        wide = wide_predictions(predictions, outcome)
        self.full = build_feature_matrix(encode_features(structured, wide), ctx.split.train)
        # OLS drops the category dummies, collinear with the influencer dummies
        self.no_category = build_feature_matrix(
            encode_features(structured, wide, include_category_fe=False), ctx.split.train
        )

    def target(self, split: str) -> np.ndarray:
        return self.ctx.outcome_values(self.outcome, self.ctx.split.ids(split))

    def fit(self, matrix: FeatureMatrix, kind: LinearKind) -> FittedLinearModel:
        split = self.ctx.split
        model, _ = select_lambda(matrix.rows(split.train), self.target("train"),
                                 matrix.rows(split.validation), self.target("validation"),
                                 kind, binary=self.outcome.is_binary)
        return model


def fuse_outcome(ctx: RunContext, predictions: pd.DataFrame, outcome: Outcome
                 ) -> Tuple[FittedLinearModel, pd.DataFrame, List[dict], List[dict]]:
    """
    Returns:
        (ridge model, combined predictions for every video, importance rows,
         combiner comparison rows)
    """
    inputs = FusionInputs(ctx, predictions, outcome)
    ridge = inputs.fit(inputs.full, LinearKind.RIDGE)
    tags = ctx.split.tag_of()
    combined = pd.DataFrame({
        "video_id": inputs.full.index,
        "outcome": outcome.value,
        "source": COMBINED_SOURCE,
        "prediction": ridge.predict(inputs.full),
        "split": [tags[v] for v in inputs.full.index],
    })

    rows = []
    try:
        for group, pct in importance(ridge, inputs.full.groups).items():
            rows.append({"outcome": outcome.value, "group": group, "importance_pct": pct})
    except UndefinedImportanceError as e:
        logger.warning("importance_undefined", outcome=outcome.value, error=str(e))

    holdout = inputs.target("holdout")
    comparison = []
    for kind in COMPARISON_KINDS:
        matrix = inputs.no_category if kind is LinearKind.OLS else inputs.full
        entry = {"outcome": outcome.value, "combiner": kind.value}
        try:
            model = ridge if kind is LinearKind.RIDGE else inputs.fit(matrix, kind)
            pred = model.predict(matrix.rows(ctx.split.holdout))
            entry.update(metric_for(outcome, pred, holdout), lam=model.lam, error="")
        except (SingularDesignError, ConvergenceError, DataError) as e:
            logger.warning("combiner_failed", outcome=outcome.value, combiner=kind.value, error=str(e))
            entry.update(metric="", value=np.nan, baseline=np.nan, lam=np.nan, error=str(e))
        comparison.append(entry)

    logger.info("combined_model_fitted", outcome=outcome.value, lam=ridge.lam,
                columns=len(ridge.columns), dropped=len(inputs.full.dropped))
    return ridge, combined, rows, comparison


def brand_variance(ctx: RunContext, performance: pd.DataFrame) -> pd.DataFrame:
    """
    Brand-mention-only ridge per (text field, outcome) against the field's
    text model and the intercept-only baseline.
    """
    brands = text_covariates(ctx.records, ctx.lexicon)
    split = ctx.split
    position = {vid: i for i, vid in enumerate(brands.index)}
    take = {s: [position[v] for v in split.ids(s)] for s in ("train", "validation", "holdout")}
    rows = []
    for outcome in ctx.config.outcomes:
        y_train = ctx.outcome_values(outcome, split.train)
        y_holdout = ctx.outcome_values(outcome, split.holdout)
        for field in TextField:
            column = text_eq8_column(field)
            x = brands[[column]].to_numpy(dtype=np.float64)
            entry = {"outcome": outcome.value, "field": field.value, "covariate": column}
            text_row = performance[(performance["model"] == FIELD_SOURCES[field].value)
                                   & (performance["outcome"] == outcome.value)]
            if text_row.empty or x[take["train"]].std() == 0:
                logger.warning("brand_variance_skipped", outcome=outcome.value, field=field.value)
                continue
            model, _ = select_lambda(x[take["train"]], y_train, x[take["validation"]],
                                     ctx.outcome_values(outcome, split.validation),
                                     LinearKind.RIDGE, binary=outcome.is_binary)
            brand = metric_for(outcome, model.predict(x[take["holdout"]]), y_holdout)
            full_metric = float(text_row["value"].iloc[0])
            kind = brand["metric"]
            entry.update(metric=kind, brand_metric=brand["value"], full_metric=full_metric,
                         baseline=brand["baseline"])
            try:
                decomposed = variance_decomposition(brand["value"], full_metric, brand["baseline"], kind)
                brand_gain, full_gain, share = (decomposed.improvement_brand, decomposed.improvement_full,
                                                decomposed.share)
            except UndefinedShareError as e:
                logger.warning("brand_share_undefined", outcome=outcome.value, field=field.value, error=str(e))
                brand_gain = improvement(brand["value"], brand["baseline"], kind)
                full_gain = improvement(full_metric, brand["baseline"], kind)
                share = np.nan
            entry.update(improvement_brand=brand_gain, improvement_full=full_gain, share=share)
            rows.append(entry)
    return pd.DataFrame(rows)


def slice_combination(ctx: RunContext, by_slice: Dict[SliceWhich, pd.DataFrame]) -> pd.DataFrame:
    """
    Validation-tuned ridge over the beginning, middle and end predictions
    of each slice-varying source, against the beginning slice alone.
    """
    split = ctx.split
    order = [SliceWhich.BEGINNING, SliceWhich.MIDDLE, SliceWhich.END]
    rows = []
    for source in SLICE_VARYING_SOURCES:
        for outcome in ctx.config.outcomes:
            columns = []
            for which in order:
                table = by_slice[which]
                block = table[(table["source"] == source.value) & (table["outcome"] == outcome.value)]
                columns.append(block.set_index("video_id")["prediction"].rename(which.value))
            wide = pd.concat(columns, axis=1)

            def part(name: str) -> np.ndarray:
                return wide.loc[split.ids(name)].to_numpy(dtype=np.float64)

            model, _ = select_lambda(part("train"), ctx.outcome_values(outcome, split.train),
                                     part("validation"), ctx.outcome_values(outcome, split.validation),
                                     LinearKind.RIDGE, binary=outcome.is_binary)
            y = ctx.outcome_values(outcome, split.holdout)
            combined = metric_for(outcome, model.predict(part("holdout")), y)
            beginning = metric_for(outcome, part("holdout")[:, 0], y)
            better = (combined["value"] > beginning["value"]) if outcome.is_binary \
                else (combined["value"] < beginning["value"])
            rows.append({"source": source.value, "outcome": outcome.value, "metric": combined["metric"],
                         "beginning": beginning["value"], "combined": combined["value"],
                         "improved": bool(better)})
    table = pd.DataFrame(rows)
    logger.info("slice_combination_done", cases=len(table), improved=int(table["improved"].sum()))
    return table


def run_fusion(ctx: RunContext, predictions: pd.DataFrame, variants: Optional[pd.DataFrame] = None) -> Dict[str, pd.DataFrame]:
    """All fuse-stage tables of the configured slice, keyed by file stem"""
    combined, importance_rows, comparison = [], [], []
    for outcome in ctx.config.outcomes:
        ridge, table, rows, compared = fuse_outcome(ctx, predictions, outcome)
        ridge.to_json(ctx.slice_path("fusion", f"ridge_{outcome.value}.json"))
        combined.append(table)
        importance_rows += rows
        comparison += compared

    combined_table = pd.concat(combined, ignore_index=True)
    every = pd.concat([predictions, combined_table], ignore_index=True)
    performance = holdout_metrics(every, ctx.outcomes, ctx.split.holdout, ctx.config.outcomes)
    tables = {
        "combined_predictions": combined_table,
        "importance": pd.DataFrame(importance_rows, columns=["outcome", "group", "importance_pct"]),
        "model_performance": performance,
        "combiner_comparison": pd.DataFrame(comparison),
        "brand_variance": brand_variance(ctx, performance),
    }
    if variants is not None and len(variants):
        tables["ablations"] = holdout_metrics(variants, ctx.outcomes, ctx.split.holdout, ctx.config.outcomes)
    return tables
