#!/usr/bin/env python3
"""
Test: Exports and Reports
Purpose: Verify export tables, rendered text reports and figures

Tests:
- CSV round trip keeps video ids as strings and empty cells as missing
- Result objects flatten to fixed-column tables
- Hypothesis, scorecard, performance and variance reports render
- Every figure renderer writes a PNG
"""

import json
import math
import os
import sys

import numpy as np
import pandas as pd

from fixtures import (
    run_tests, TempRunDir, read_bytes,
    assert_equal, assert_true, assert_false, assert_in, assert_not_in
)

from app.adapters.exporters import (
    fit_result_rows,
    hypothesis_rows,
    learning_rows,
    read_csv,
    scorecard_rows,
    write_csv,
    write_json,
)
from app.adapters.plots import (
    plot_brand_scatter,
    plot_frame_gradmaps,
    plot_moment_attention,
    plot_token_heatmap,
)
from app.adapters.reports import render_hypothesis_report, render_performance, render_scorecard, render_variance
from app.interpretation.common import ci_column
from app.interpretation.hypotheses import format_cell
from app.models.results import (
    FitResult,
    HypothesisSet,
    LearningContrast,
    RelationshipRecord,
    Scorecard,
    Verdict,
)
from app.models.schemas import Modality, Outcome, SoundCategory
from app.stats.effects import make_term

PNG_MAGIC = b"\x89PNG"


def term(estimate, p_value, name="x"):
    return make_term(name, estimate, 0.1, estimate / 0.1, p_value)


def passed_record():
    return RelationshipRecord(modality=Modality.AUDIO, element="Music", outcome=Outcome.LOG_VIEWS,
                              data_type="audio", step1=term(0.2, 0.01), step2=term(0.3, 0.02),
                              eq8=term(0.5, 0.001), verdict=Verdict.PASS_POSITIVE)


def filtered_record():
    return RelationshipRecord(modality=Modality.IMAGE, element="Animal", outcome=Outcome.LOG_VIEWS,
                              data_type="thumbnail", step1=term(0.01, 0.6), verdict=Verdict.FILTERED_STEP1)


def sample_card():
    return Scorecard(
        video_id="v7",
        element_scores={"log_views": {"title": 40.0, "thumbnail": 100.0}},
        weights={"log_views": {"title": 0.25, "thumbnail": 0.75}},
        overall={"log_views": 85.0},
        clipped=["log_views|thumbnail"],
    )


# ============================================================================
# Test: CSV and JSON
# ============================================================================

def test_csv_round_trip():
    frame = pd.DataFrame({"video_id": ["007", "010"], "value": [0.5, None], "brand_name": ["Nike", ""]})
    with TempRunDir() as out:
        path = write_csv(frame, os.path.join(out, "nested", "table.csv"))
        back = read_csv(path)
    assert_equal(list(back["video_id"]), ["007", "010"])
    assert_equal(back["value"].iloc[0], 0.5)
    assert_true(math.isnan(back["value"].iloc[1]))
    assert_true(pd.isna(back["brand_name"].iloc[1]))


def test_json_accepts_models():
    with TempRunDir() as out:
        path = write_json(sample_card(), os.path.join(out, "card.json"))
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    assert_equal(payload["video_id"], "v7")
    assert_equal(payload["overall"], {"log_views": 85.0})


# ============================================================================
# Test: Flattening
# ============================================================================

def test_fit_result_rows():
    result = FitResult(equation_id="eq8|log_views", model_kind="ols", n_obs=40, df_resid=37,
                       terms={"a": term(0.1, 0.2, "a"), "b": term(-0.4, 0.01, "b")},
                       dropped=["CI_Silence", "CI_Other"])
    table = fit_result_rows([result])
    assert_equal(list(table["term"]), ["a", "b"])
    assert_equal(list(table["tier"]), ["", "*"])
    assert_equal(table["dropped"].iloc[0], "CI_Silence|CI_Other")
    assert_equal(len(fit_result_rows([]).columns), 13)


def test_hypothesis_rows():
    hypotheses = HypothesisSet(records=[passed_record(), filtered_record()], slice="middle",
                               counts={"pass_positive": 1, "filtered_step1": 1})
    table = hypothesis_rows(hypotheses)
    assert_equal(list(table["passed"]), [True, False])
    assert_equal(list(table["slice"]), ["middle", "middle"])
    assert_equal(table["cell"].iloc[0], format_cell(passed_record()))
    assert_equal(table["step1_tier"].iloc[0], "*")
    assert_equal(table["eq8_tier"].iloc[1], "")
    assert_true(pd.isna(table["eq8_estimate"].iloc[1]))
    # Image attention effect is the raw slope
    assert_equal(table["attention_effect"].iloc[1], 0.01)


def test_learning_rows():
    contrasts = [
        LearningContrast(category_id="c1", element="CI_Music", group="micro",
                         half1=term(0.5, 0.001), half2=term(0.4, 0.01)),
        LearningContrast(category_id="c2", element="CI_Music", group="mega",
                         skipped=["half1: < 10 videos", "half2: < 10 videos"]),
    ]
    table = learning_rows(contrasts)
    assert_equal(list(table["significant_in_both"]), [True, False])
    assert_equal(table["skipped"].iloc[1], "half1: < 10 videos; half2: < 10 videos")


def test_scorecard_rows():
    table = scorecard_rows([sample_card()])
    assert_equal(list(table["element"]), ["title", "thumbnail", "overall"])
    assert_equal(list(table["clipped"]), [False, True, False])
    assert_equal(table["score"].iloc[2], 85.0)
    assert_true(pd.isna(table["weight"].iloc[2]))


# ============================================================================
# Test: Text reports
# ============================================================================

def test_hypothesis_report():
    hypotheses = HypothesisSet(records=[passed_record(), filtered_record()],
                               counts={"pass_positive": 1, "filtered_step1": 1})
    text = render_hypothesis_report(hypotheses, [Outcome.LOG_VIEWS])
    assert_in("Candidates: 2. Passed: 1.", text)
    assert_in("- filtered_step1: 1", text)
    assert_in(format_cell(passed_record()), text)
    assert_in(filtered_record().key, text)
    assert_not_in("No relationship passed both steps", text)
    assert_not_in("Brand mention interactions", text)

    cross = FitResult(equation_id="cross|log_views", model_kind="ols", n_obs=40, df_resid=30,
                      terms={"BRAND_ANY:DUR_Music": term(0.6, 0.001, "BRAND_ANY:DUR_Music")})
    text = render_hypothesis_report(hypotheses, [Outcome.LOG_VIEWS], cross)
    assert_in("Brand mention interactions (log_views)", text)
    assert_in("BRAND_ANY:DUR_Music", text)


def test_empty_hypothesis_report():
    text = render_hypothesis_report(HypothesisSet(), [Outcome.LOG_VIEWS, Outcome.SENTIMENT])
    assert_in("Candidates: 0. Passed: 0.", text)
    assert_in("No relationship passed both steps", text)


def test_scorecard_report():
    text = render_scorecard(sample_card())
    assert_in("Scorecard for video v7", text)
    assert_in("Overall Score", text)
    assert_in("85.00%", text)
    assert_in("100.00%", text)
    assert_in("Thumbnail", text)
    assert_in("Clipped to [0, 100]: log_views|thumbnail", text)


def test_performance_report():
    performance = pd.DataFrame([
        {"model": "title", "outcome": "log_views", "metric": "rmse", "value": 1.25, "baseline": 1.5},
        {"model": "combined", "outcome": "log_views", "metric": "rmse", "value": 1.0, "baseline": 1.5},
    ])
    text = render_performance(performance, "beginning")
    assert_in("Holdout performance (beginning slice)", text)
    assert_in("| combined | 1.0000 (1.5000) |", text)


def test_variance_report():
    table = pd.DataFrame([
        {"outcome": "log_views", "covariate": "BIT", "brand_metric": 1.4, "full_metric": 1.0,
         "baseline": 1.5, "improvement_brand": 0.1 / 1.5, "improvement_full": 0.5 / 1.5, "share": 0.2},
        {"outcome": "log_views", "covariate": "BIDX", "brand_metric": 1.5, "full_metric": 1.5,
         "baseline": 1.5, "improvement_brand": 0.0, "improvement_full": 0.0, "share": float("nan")},
    ])
    text = render_variance(table, "beginning")
    assert_in("20.0%", text)
    assert_in("undefined", text)


# ============================================================================
# Test: Figures
# ============================================================================

def test_figures_written():
    rng = np.random.default_rng(3)
    tokens = pd.DataFrame({"position": [2, 0, 1], "piece": ["shoes", "[CLS]", "nike"],
                           "brand": [0, 0, 1], "weight": [0.2, 0.5, 0.3]})
    moments = pd.DataFrame({"moment": np.arange(6), "weight": np.full(6, 1 / 6)})
    for k, category in enumerate(SoundCategory):
        moments[ci_column(category.value)] = (np.arange(6) % (k + 2) == 0).astype(int)
    brands = pd.DataFrame({"brand": ["Nike", "Acme"], "attention_coef": [0.4, -0.2],
                           "outcome_coef": [0.3, 0.1], "videos": [12, 40]})
    with TempRunDir() as out:
        paths = [
            plot_token_heatmap(tokens, os.path.join(out, "tokens.png")),
            plot_moment_attention(moments, os.path.join(out, "moments.png"), title="v1 log_views"),
            plot_frame_gradmaps(rng.random((8, 8, 3)), rng.normal(size=(8, 8)),
                                rng.random((5, 8, 8, 3)), rng.normal(size=(5, 8, 8)),
                                os.path.join(out, "figs", "gradmaps.png")),
            plot_brand_scatter(brands, os.path.join(out, "brands.png")),
        ]
        for path in paths:
            assert_true(os.path.exists(path), path)
            assert_equal(read_bytes(path)[:4], PNG_MAGIC, path)
        assert_false(os.path.exists(os.path.join(out, "missing.png")))


# ============================================================================
# Main Test Runner
# ============================================================================

def main():
    """Run all export and report tests"""
    tests = [
        ("CSV round trip", test_csv_round_trip),
        ("JSON accepts models", test_json_accepts_models),
        ("Fit result rows", test_fit_result_rows),
        ("Hypothesis rows", test_hypothesis_rows),
        ("Learning rows", test_learning_rows),
        ("Scorecard rows", test_scorecard_rows),
        ("Hypothesis report", test_hypothesis_report),
        ("Empty hypothesis report", test_empty_hypothesis_report),
        ("Scorecard report", test_scorecard_report),
        ("Performance report", test_performance_report),
        ("Variance report", test_variance_report),
        ("Figures written", test_figures_written),
    ]
    return run_tests("Export and Report Tests", tests)


if __name__ == "__main__":
    sys.exit(main())
