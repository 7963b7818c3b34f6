"""
Text reports rendered with jinja2: hypothesis table, scorecards, holdout
performance and the brand-mention variance table.
"""

import math
import os
from typing import Dict, List, Optional, Sequence

import pandas as pd
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from app.fusion.features import SOURCE_GROUPS
from app.interpretation.hypotheses import format_cell
from app.models.results import FitResult, FitTerm, HypothesisSet, Scorecard
from app.models.schemas import Outcome, PredictionSource

TEMPLATE_DIR = os.path.join(os.path.dirname(__file__), "templates")

_env = Environment(
    loader=FileSystemLoader(TEMPLATE_DIR),
    undefined=StrictUndefined,
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
)


def _term_text(term: Optional[FitTerm]) -> str:
    return "n/a" if term is None else f"{term.formatted()} (p={term.p_value:.3f})"


def render_hypothesis_report(hypotheses: HypothesisSet, outcomes: Sequence[Outcome],
                             cross_modal: Optional[FitResult] = None) -> str:
    """Survivors laid out element by outcome, then every candidate with its verdict"""
    table: Dict[tuple, dict] = {}
    for record in hypotheses.survivors:
        key = (record.modality.value, record.data_type, record.element)
        row = table.setdefault(key, {"modality": key[0], "data_type": key[1], "element": key[2], "cells": {}})
        row["cells"][record.outcome.value] = format_cell(record)

    records = [{"key": r.key, "verdict": r.verdict.value, "step1": _term_text(r.step1),
                "step2": _term_text(r.step2), "eq8": _term_text(r.eq8)} for r in hypotheses.records]
    cross = None
    if cross_modal is not None:
        cross = {
            "outcome": cross_modal.equation_id.split("|")[-1],
            "terms": [{"term": name, "cell": term.formatted(), "p_value": term.p_value}
                      for name, term in cross_modal.terms.items()],
        }
    return _env.get_template("hypotheses.md.j2").render(
        slice=hypotheses.slice,
        total=len(hypotheses.records),
        counts=hypotheses.counts,
        survivors=hypotheses.survivors,
        outcomes=[o.value for o in outcomes],
        table=[table[k] for k in sorted(table)],
        records=records,
        cross_modal=cross,
    )


def render_scorecard(card: Scorecard) -> str:
    outcomes = list(card.element_scores)
    rows = []
    for source in PredictionSource:
        cells = {o: (f"{card.element_scores[o][source.value]:.2f}%" if source.value in card.element_scores[o]
                     else "") for o in outcomes}
        rows.append({"label": SOURCE_GROUPS[source], "cells": cells})
    return _env.get_template("scorecard.txt.j2").render(
        video_id=card.video_id,
        outcomes=outcomes,
        rows=rows,
        overall={o: f"{card.overall[o]:.2f}%" for o in outcomes},
        clipped=card.clipped,
    )


def render_performance(performance: pd.DataFrame, slice_name: str) -> str:
    outcomes = list(dict.fromkeys(performance["outcome"]))
    rows: Dict[str, dict] = {}
    for entry in performance.itertuples(index=False):
        row = rows.setdefault(entry.model, {"model": entry.model, "cells": {}})
        row["cells"][entry.outcome] = f"{entry.value:.4f} ({entry.baseline:.4f})"
    return _env.get_template("performance.md.j2").render(slice=slice_name, outcomes=outcomes,
                                                         rows=list(rows.values()))


def render_variance(table: pd.DataFrame, slice_name: str) -> str:
    rows: List[dict] = []
    for entry in table.to_dict("records"):
        share = entry.get("share")
        entry["share_text"] = "undefined" if share is None or math.isnan(share) else f"{100 * share:.1f}%"
        rows.append(entry)
    return _env.get_template("variance.md.j2").render(slice=slice_name, rows=rows)
