#!/usr/bin/env python3
"""
Test: Scoring
Purpose: Verify prediction bounds, element and overall scores, and variance shares

Tests:
- Bounds come from training rows only; degenerate ranges are flagged
- Element scores are min-max scaled, clipped and order-preserving
- Published element scores and weights reproduce the published overall scores
- Branded-content share of the improvement over baseline
"""

import sys

import numpy as np
import pandas as pd

from fixtures import (
    run_tests,
    assert_equal, assert_true, assert_false, assert_close, assert_raises, assert_in
)

from app.errors import DomainError, UndefinedImportanceError, UndefinedShareError
from app.models.results import PDPBounds
from app.models.schemas import Outcome, PredictionSource
from app.scoring.pdp import fit_pdp_bounds
from app.scoring.scorecard import DEGENERATE_SCORE, element_score, overall_score, score_video
from app.scoring.variance import improvement, variance_decomposition

SOURCES = [
    PredictionSource.TITLE,
    PredictionSource.DESCRIPTION,
    PredictionSource.CAPTIONS,
    PredictionSource.AUDIO,
    PredictionSource.THUMBNAIL,
    PredictionSource.FRAMES,
]

# Published per-element scores and combined-model importance (percent) of one holdout video
PUBLISHED = {
    Outcome.LOG_VIEWS: (
        [83.45, 74.76, 84.17, 88.34, 25.62, 90.97],
        [15.85, 13.82, 9.77, 1.23, 2.53, 0.001],
        77.58,
    ),
    Outcome.SENTIMENT: (
        [100.0, 100.0, 100.0, 100.0, 100.0, 0.0],
        [15.07, 14.39, 12.67, 5.21, 4.98, 5.73],
        90.12,
    ),
    Outcome.LOG_ENGAGEMENT: (
        [36.60, 34.56, 6.79, 28.43, 43.50, 65.17],
        [43.25, 34.53, 7.49, 4.76, 2.04, 0.27],
        33.24,
    ),
}


def unit_bounds(outcomes):
    """Every element ranges over [0, 100] so predictions equal scores"""
    return PDPBounds(bounds={o.value: {s.value: [0.0, 100.0] for s in SOURCES} for o in outcomes})


# ============================================================================
# Test: Bounds
# ============================================================================

def test_bounds_use_training_rows():
    predictions = pd.DataFrame({
        "video_id": ["a", "b", "c", "a", "b", "c"],
        "outcome": ["log_views"] * 6,
        "source": ["title"] * 3 + ["audio"] * 3,
        "prediction": [1.0, 4.0, 99.0, 2.0, 2.0, -5.0],
    })
    bounds = fit_pdp_bounds(predictions, ["a", "b"], [Outcome.LOG_VIEWS])
    assert_equal(bounds.get(Outcome.LOG_VIEWS, PredictionSource.TITLE), [1.0, 4.0])
    assert_true(bounds.degenerate(Outcome.LOG_VIEWS, PredictionSource.AUDIO))
    assert_false(bounds.degenerate(Outcome.LOG_VIEWS, PredictionSource.TITLE))
    assert_equal(set(bounds.bounds["log_views"]), {"title", "audio"})


# ============================================================================
# Test: Element scores
# ============================================================================

def test_element_score_scaling_and_clipping():
    assert_equal(element_score(4.0, 1.0, 4.0), (100.0, False, False))
    assert_equal(element_score(1.0, 1.0, 4.0), (0.0, False, False))
    score, clipped, _ = element_score(2.5, 1.0, 4.0)
    assert_close(score, 50.0)
    assert_false(clipped)
    assert_equal(element_score(7.0, 1.0, 4.0), (100.0, True, False))
    assert_equal(element_score(-3.0, 1.0, 4.0), (0.0, True, False))
    assert_equal(element_score(3.0, 2.0, 2.0), (DEGENERATE_SCORE, False, True))


def test_element_scores_preserve_order():
    values = np.sort(np.random.default_rng(0).uniform(-2.0, 12.0, 50))
    scores = [element_score(v, 0.0, 10.0)[0] for v in values]
    assert_true(all(b >= a for a, b in zip(scores, scores[1:])))


def test_overall_score_is_weighted_mean():
    scores = {"title": 80.0, "audio": 20.0}
    assert_close(overall_score(scores, {"title": 3.0, "audio": 1.0}), 65.0)
    assert_close(overall_score(scores, {"title": 3.0, "audio": 1.0, "frames": 50.0}), 65.0)
    assert_raises(UndefinedImportanceError, overall_score, scores, {"title": 0.0})


def test_published_overall_scores():
    """Published element rows and importance weights give the published overall scores"""
    outcomes = list(PUBLISHED)
    predictions = {o: dict(zip(SOURCES, PUBLISHED[o][0])) for o in outcomes}
    weights = {o: dict(zip(SOURCES, PUBLISHED[o][1])) for o in outcomes}
    card = score_video("holdout_video", predictions, unit_bounds(outcomes), weights)
    for outcome in outcomes:
        expected = PUBLISHED[outcome][2]
        assert_close(card.overall[outcome.value], expected, tol=0.05, message=outcome.value)
    assert_close(card.element_scores["log_views"]["thumbnail"], 25.62)
    assert_equal(card.clipped, [])


def test_scorecard_flags_clipping_and_degenerate():
    bounds = PDPBounds(bounds={"log_views": {"title": [0.0, 10.0], "audio": [5.0, 5.0]}})
    card = score_video(
        "v1",
        {Outcome.LOG_VIEWS: {PredictionSource.TITLE: 12.0, PredictionSource.AUDIO: 1.0}},
        bounds,
        {Outcome.LOG_VIEWS: {PredictionSource.TITLE: 1.0, PredictionSource.AUDIO: 1.0}},
    )
    assert_in("log_views|title", card.clipped)
    assert_equal(card.degenerate, ["log_views|audio"])
    assert_close(card.overall["log_views"], 75.0)


def test_overall_between_element_extremes():
    rng = np.random.default_rng(4)
    outcome = Outcome.LOG_POPULARITY
    for _ in range(10):
        predictions = {outcome: dict(zip(SOURCES, rng.uniform(0, 100, 6)))}
        weights = {outcome: dict(zip(SOURCES, rng.uniform(0.01, 20, 6)))}
        card = score_video("v", predictions, unit_bounds([outcome]), weights)
        values = list(card.element_scores[outcome.value].values())
        assert_true(min(values) - 1e-9 <= card.overall[outcome.value] <= max(values) + 1e-9)


# ============================================================================
# Test: Variance decomposition
# ============================================================================

def test_rmse_share():
    share = variance_decomposition(2.245, 1.6, 2.3, "rmse")
    assert_close(share.improvement_brand, 0.055 / 2.3, tol=1e-12)
    assert_close(share.improvement_full, 0.7 / 2.3, tol=1e-12)
    assert_close(share.share, 0.055 / 0.7, tol=1e-12)
    assert_close(100.0 * share.share, 7.8, tol=0.1)


def test_accuracy_share():
    share = variance_decomposition(0.58, 0.702, 0.5, "accuracy")
    assert_close(share.improvement_brand, 0.16, tol=1e-12)
    assert_close(share.improvement_full, 0.404, tol=1e-12)
    assert_close(100.0 * share.share, 39.7, tol=0.15)


def test_share_edge_cases():
    assert_close(variance_decomposition(2.3, 1.6, 2.3, "rmse").share, 0.0)
    assert_raises(UndefinedShareError, variance_decomposition, 2.0, 2.3, 2.3, "rmse")
    assert_raises(UndefinedShareError, variance_decomposition, 0.55, 0.45, 0.5, "accuracy")
    assert_raises(DomainError, improvement, 1.0, 0.0, "rmse")


def test_share_scale_invariant():
    base = variance_decomposition(2.245, 1.6, 2.3, "rmse").share
    scaled = variance_decomposition(10 * 2.245, 10 * 1.6, 10 * 2.3, "rmse").share
    assert_close(scaled, base, tol=1e-12)


# ============================================================================
# Main Test Runner
# ============================================================================

def main():
    """Run all scoring tests"""
    tests = [
        ("Bounds use training rows", test_bounds_use_training_rows),
        ("Element score scaling and clipping", test_element_score_scaling_and_clipping),
        ("Element scores preserve order", test_element_scores_preserve_order),
        ("Overall score is a weighted mean", test_overall_score_is_weighted_mean),
        ("Published overall scores", test_published_overall_scores),
        ("Scorecard flags clipping and degenerate bounds", test_scorecard_flags_clipping_and_degenerate),
        ("Overall between element extremes", test_overall_between_element_extremes),
        ("RMSE share", test_rmse_share),
        ("Accuracy share", test_accuracy_share),
        ("Share edge cases", test_share_edge_cases),
        ("Share is scale invariant", test_share_scale_invariant),
    ]
    return run_tests("Scoring Tests", tests)


if __name__ == "__main__":
    sys.exit(main())
