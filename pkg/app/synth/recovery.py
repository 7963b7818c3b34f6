"""Planted effects against the verdicts the two-step filter reached."""

from typing import List

import pandas as pd

from app.models.results import HypothesisSet, RelationshipRecord, Verdict
from app.models.schemas import Modality
from app.synth.generator import BRAND_SUFFIX

RECOVERY_COLUMNS = ["effect", "outcome", "target", "expected", "key", "verdict", "recovered"]


def _matches(record: RelationshipRecord, effect: dict) -> bool:
    if record.modality.value != effect["modality"] or record.outcome.value != effect["outcome"]:
        return False
    if record.modality is Modality.TEXT:
        return record.data_type == effect["element"][:-len(BRAND_SUFFIX)]
    return record.element == effect["element"]


def recovered(expected: str, verdict: Verdict) -> bool:
    if expected == "pass":
        return verdict.passed
    return verdict.value == expected


def recovery_table(truth: dict, hypotheses: HypothesisSet) -> pd.DataFrame:
    """
    One row per (planted effect with an expected verdict, matching candidate).
    Effects without a matching candidate get a row with an empty key.
    """
    rows: List[dict] = []
    for effect in truth.get("effects", []):
        expected = effect.get("expected_verdict")
        if not expected:
            continue
        base = {"effect": effect["element_key"], "outcome": effect["outcome"],
                "target": effect["target"], "expected": expected}
        matched = [r for r in hypotheses.records if _matches(r, effect)]
        if not matched:
            rows.append({**base, "key": "", "verdict": "", "recovered": False})
        for record in matched:
            rows.append({**base, "key": record.key, "verdict": record.verdict.value,
                         "recovered": recovered(expected, record.verdict)})
    return pd.DataFrame(rows, columns=RECOVERY_COLUMNS)
