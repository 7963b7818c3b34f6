"""
Two-step filter verdicts and the hypothesis table.

Text and audio pass Step 1 with a positive significant attention effect;
images need significant Step-1 and Step-2 effects in the same direction.
Every pass must also survive the joint control with an unchanged sign.
"""

from typing import Dict, List, Optional

import structlog

from app.config.settings import settings
from app.errors import KeyMismatchError
from app.interpretation.common import StepTerms, parse_key
from app.models.results import FitTerm, HypothesisSet, RelationshipRecord, Verdict
from app.models.schemas import OUTCOME_ORDER, Modality
from app.stats.effects import adjust_terms

logger = structlog.get_logger()


def _significant(term: Optional[FitTerm]) -> bool:
    return term is not None and term.significant


def _sign(term: FitTerm) -> int:
    return (term.estimate > 0) - (term.estimate < 0)


def verdict_for(modality: Modality, step1: Optional[FitTerm], step2: Optional[FitTerm],
                eq8: Optional[FitTerm]) -> Verdict:
    if modality is Modality.IMAGE:
        if not _significant(step1):
            return Verdict.FILTERED_STEP1
        if not _significant(step2) or _sign(step1) != _sign(step2):
            return Verdict.FILTERED_STEP2
    else:
        if not _significant(step1) or step1.estimate <= 0:
            return Verdict.FILTERED_STEP1
        if not _significant(step2):
            return Verdict.FILTERED_STEP2
    if not _significant(eq8) or _sign(eq8) != _sign(step2):
        return Verdict.FILTERED_EQ8
    return Verdict.PASS_SAME_DIRECTION if modality is Modality.IMAGE else Verdict.PASS_POSITIVE


def _adjusted(terms: StepTerms) -> StepTerms:
    present = [k for k, t in terms.items() if t is not None]
    adjusted = adjust_terms([terms[k] for k in present])
    return {**terms, **dict(zip(present, adjusted))}


def build_hypotheses(step1: StepTerms, step2: StepTerms, eq8: StepTerms, slice_name: str = "beginning",
                     adjust: Optional[bool] = None) -> HypothesisSet:
    """
    `adjust` (default `settings.benjamini_hochberg`) re-tiers each step on
    Benjamini-Hochberg adjusted p-values before the verdicts.

    Raises:
        KeyMismatchError: the three term maps are not keyed identically
    """
    keys1, keys2, keys8 = set(step1), set(step2), set(eq8)
    if keys1 != keys2 or keys1 != keys8:
        mismatch = sorted((keys1 ^ keys2) | (keys1 ^ keys8))
        raise KeyMismatchError(f"Step results keyed inconsistently: {', '.join(mismatch[:5])}")

    adjust = settings.benjamini_hochberg if adjust is None else adjust
    if adjust:
        step1, step2, eq8 = _adjusted(step1), _adjusted(step2), _adjusted(eq8)

    order = {o: i for i, o in enumerate(OUTCOME_ORDER)}
    records: List[RelationshipRecord] = []
    for key in sorted(keys1, key=lambda k: (order[parse_key(k)[3]], k)):
        modality, data_type, element, outcome = parse_key(key)
        records.append(RelationshipRecord(
            modality=modality,
            element=element,
            outcome=outcome,
            data_type=data_type,
            step1=step1[key],
            step2=step2[key],
            eq8=eq8[key],
            verdict=verdict_for(modality, step1[key], step2[key], eq8[key]),
        ))

    counts: Dict[str, int] = {v.value: 0 for v in Verdict}
    for record in records:
        counts[record.verdict.value] += 1
    logger.info("hypotheses_built", candidates=len(records), survivors=sum(r.verdict.passed for r in records),
                **counts)
    return HypothesisSet(records=records, counts=counts, slice=slice_name)


def attention_effect(record: RelationshipRecord) -> Optional[float]:
    """Percent change in attention; raw gradient slope for images"""
    if record.step1 is None:
        return None
    return record.step1.estimate if record.modality is Modality.IMAGE else record.step1.pct_change


def outcome_effect(record: RelationshipRecord) -> Optional[float]:
    """Percent change in the outcome from the joint-control coefficient"""
    return None if record.eq8 is None else record.eq8.pct_change


def format_cell(record: RelationshipRecord) -> str:
    """Hypothesis table cell, e.g. 'A: 25.14% O: 64.63%'"""
    a, o = attention_effect(record), outcome_effect(record)
    a_text = "n/a" if a is None else f"{a:.2f}%"
    o_text = "n/a" if o is None else f"{o:.2f}%"
    return f"A: {a_text} O: {o_text}"


def step2_survivors(hypotheses: HypothesisSet) -> int:
    """Candidates that cleared Steps 1 and 2, before the joint control"""
    return sum(r.verdict in (Verdict.FILTERED_EQ8, Verdict.PASS_POSITIVE, Verdict.PASS_SAME_DIRECTION)
               for r in hypotheses.records)
