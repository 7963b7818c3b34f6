"""
Two-step interpretation run over holdout exports of one slice.
"""

from typing import Dict, List, Optional, Sequence

import pandas as pd
import structlog
from pydantic import BaseModel, Field

from app.interpretation.audio import audio_steps
from app.interpretation.common import StepTerms
from app.interpretation.heterogeneity import cross_modal_interactions
from app.interpretation.hypotheses import build_hypotheses
from app.interpretation.image import image_steps
from app.interpretation.joint import joint_control
from app.interpretation.text import text_step1, text_step1_interactions, text_step2
from app.models.results import FitResult, HypothesisSet
from app.models.schemas import Outcome, SliceWhich

logger = structlog.get_logger()


class Exports(BaseModel):
    """Holdout exports produced by the predict stage"""

    model_config = {"arbitrary_types_allowed": True}

    predictions: pd.DataFrame
    text_attention: pd.DataFrame
    moment_attention: pd.DataFrame
    item_stats: pd.DataFrame


class InterpretationReport(BaseModel):
    hypotheses: HypothesisSet
    results: List[FitResult] = Field(default_factory=list)
    step2_variants: List[FitResult] = Field(default_factory=list)
    cross_modal: Optional[FitResult] = None


def _merge(*parts: StepTerms) -> StepTerms:
    merged: StepTerms = {}
    for part in parts:
        merged.update(part)
    return merged


def interpret(exports: Exports, covariates: pd.DataFrame, outcomes: Sequence[Outcome],
              slice_name: str = SliceWhich.BEGINNING.value) -> InterpretationReport:
    """Steps 1 and 2 per modality, joint control, verdicts and appendix variants"""
    t1 = text_step1(exports.text_attention, covariates, outcomes)
    t2 = text_step2(exports.predictions, covariates, outcomes, "main")
    a1, a2 = audio_steps(exports.moment_attention, exports.predictions, covariates, outcomes)
    i1, i2 = image_steps(exports.item_stats, exports.predictions, covariates, outcomes)

    step1 = _merge(t1.terms, a1.terms, i1.terms)
    step2 = _merge(t2.terms, a2.terms, i2.terms)
    eq8, joint_results = joint_control(exports.predictions, covariates, sorted(step1))
    hypotheses = build_hypotheses(step1, step2, eq8, slice_name=slice_name)

    variants = text_step1_interactions(exports.text_attention, covariates, outcomes)
    for variant in ("proportion", "halves"):
        variants += text_step2(exports.predictions, covariates, outcomes, variant).results

    cross = None
    if Outcome.SENTIMENT in outcomes:
        cross = cross_modal_interactions(exports.predictions, covariates)

    results = t1.results + t2.results + a1.results + a2.results + i1.results + i2.results + joint_results
    logger.info("interpretation_complete", slice=slice_name, regressions=len(results),
                survivors=len(hypotheses.survivors))
    return InterpretationReport(hypotheses=hypotheses, results=results,
                                step2_variants=variants, cross_modal=cross)


def slice_outcomes(which: SliceWhich, outcomes: Sequence[Outcome], include_views: bool = False) -> List[Outcome]:
    """Middle and end slices leave views out unless asked"""
    if which is SliceWhich.BEGINNING or include_views:
        return list(outcomes)
    return [o for o in outcomes if o is not Outcome.LOG_VIEWS]


def slice_analysis(which: SliceWhich, exports: Exports, covariates: pd.DataFrame,
                   outcomes: Sequence[Outcome], include_views: bool = False) -> InterpretationReport:
    """The whole interpretation on the exports of a middle or end slice, tagged with the slice"""
    return interpret(exports, covariates, slice_outcomes(which, outcomes, include_views), which.value)
