#!/usr/bin/env python3
"""
Test: Fusion
Purpose: Verify the linear combiner family, penalty selection, metrics and importance

Tests:
- Ridge and lasso solutions satisfy their optimality conditions
- Coordinate descent never increases its objective
- Singular unpenalized systems name the dependent columns
- Importance percentages, grouping and the all-zero case
- Feature scaling on training rows
"""

import os
import sys

import numpy as np
import pandas as pd

from fixtures import (
    run_tests, TempRunDir,
    assert_equal, assert_true, assert_close, assert_raises, assert_in
)

from app.errors import DataError, SingularDesignError, UndefinedImportanceError
from app.fusion.features import FeatureMatrix, build_feature_matrix, prediction_column
from app.fusion.importance import column_importance, importance
from app.fusion.linear import FittedLinearModel, coordinate_descent, fit_linear, select_lambda, validation_loss
from app.fusion.metrics import accuracy, baseline_rmse, holdout_metrics, majority_accuracy, rmse
from app.models.schemas import LinearKind, Outcome, PredictionSource


def regression_data(n=60, k=4, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, k))
    y = 0.5 + X @ np.array([1.5, -2.0, 0.0, 0.3])[:k] + 0.2 * rng.standard_normal(n)
    return X, y


# ============================================================================
# Test: Solvers
# ============================================================================

def test_unpenalized_ridge_is_least_squares():
    X, y = regression_data()
    model = fit_linear(X, y, LinearKind.OLS)
    design = np.column_stack([np.ones(len(y)), X])
    expected = np.linalg.lstsq(design, y, rcond=None)[0]
    assert_close(model.intercept, expected[0], tol=1e-10)
    assert_close(model.coef, expected[1:], tol=1e-10)
    assert_equal(model.lam, 0.0)


def test_ridge_optimality():
    """X'(y - b - Xw) = lam w and the residuals sum to zero"""
    X, y = regression_data()
    lam = 3.0
    model = fit_linear(X, y, LinearKind.RIDGE, lam=lam)
    resid = y - model.decision(X)
    assert_close(X.T @ resid, lam * model.coef, tol=1e-9)
    assert_close(resid.sum(), 0.0, tol=1e-9)


def test_lasso_optimality():
    """Active coefficients sit on the subgradient boundary; inactive ones inside it"""
    X, y = regression_data()
    lam = 0.2
    model = fit_linear(X, y, LinearKind.LASSO, lam=lam, tol=1e-12)
    resid = y - model.decision(X)
    correlation = X.T @ resid / len(y)
    for j, w in enumerate(model.coef):
        if w != 0.0:
            assert_close(correlation[j], lam * np.sign(w), tol=1e-7)
        else:
            assert_true(abs(correlation[j]) <= lam + 1e-9)
    assert_true(np.any(model.coef == 0.0), "the null column should be zeroed at this penalty")
    assert_equal(model.l1_ratio, 1.0)


def test_coordinate_descent_objective_non_increasing():
    X, y = regression_data(seed=3)
    _, _, history, sweeps = coordinate_descent(X, y, lam=0.05, alpha=0.5, tol=1e-10)
    assert_true(sweeps >= 1)
    assert_true(all(b <= a + 1e-12 for a, b in zip(history, history[1:])))


def test_large_lasso_penalty_zeroes_everything():
    X, y = regression_data()
    model = fit_linear(X, y, LinearKind.LASSO, lam=100.0)
    assert_close(model.coef, np.zeros(4))
    assert_close(model.intercept, y.mean(), tol=1e-9)
    assert_raises(UndefinedImportanceError, column_importance, model)


def test_singular_unpenalized_system():
    X, y = regression_data()
    duplicated = np.column_stack([X, X[:, 0]])
    error = assert_raises(SingularDesignError, fit_linear, duplicated, y, LinearKind.OLS,
                          columns=["a", "b", "c", "d", "a_copy"])
    assert_true(set(error.aliased) & {"a", "a_copy"})
    penalized = fit_linear(duplicated, y, LinearKind.RIDGE, lam=1.0)
    assert_close(penalized.coef[0], penalized.coef[4], tol=1e-10)


def test_input_validation():
    assert_raises(DataError, fit_linear, np.ones((1, 2)), np.ones(1), LinearKind.RIDGE, lam=1.0)
    assert_raises(DataError, fit_linear, np.ones((3, 2)), np.ones(2), LinearKind.RIDGE, lam=1.0)
    X, y = regression_data()
    assert_raises(DataError, fit_linear, X, y, LinearKind.RIDGE, lam=-1.0)


def test_binary_ridge_optimality():
    """Penalized logistic score: X'(y - p) = lam w at the solution"""
    rng = np.random.default_rng(5)
    X = rng.standard_normal((80, 3))
    y = (X[:, 0] + 0.5 * rng.standard_normal(80) > 0).astype(float)
    lam = 2.0
    model = fit_linear(X, y, LinearKind.RIDGE, lam=lam, binary=True)
    p = model.predict(X)
    assert_true(np.all((p > 0) & (p < 1)))
    assert_close(X.T @ (y - p), lam * model.coef, tol=1e-7)
    assert_close(np.sum(y - p), 0.0, tol=1e-7)
    assert_true(validation_loss(model, X, y) > 0)


def test_select_lambda_picks_lowest_validation_loss():
    X, y = regression_data(n=80)
    grid = [0.01, 1.0, 100.0, 10000.0]
    model, scores = select_lambda(X[:60], y[:60], X[60:], y[60:], LinearKind.RIDGE, grid=grid)
    assert_equal(sorted(scores), grid)
    assert_equal(model.lam, min(scores, key=scores.get))
    ols, ols_scores = select_lambda(X[:60], y[:60], X[60:], y[60:], LinearKind.OLS)
    assert_equal(list(ols_scores), [0.0])


def test_model_json_round_trip():
    X, y = regression_data()
    model = fit_linear(X, y, LinearKind.RIDGE, lam=0.5, columns=["a", "b", "c", "d"])
    with TempRunDir() as out:
        path = os.path.join(out, "ridge.json")
        model.to_json(path)
        loaded = FittedLinearModel.from_json(path)
    assert_close(loaded.predict(X), model.predict(X), tol=1e-12)
    assert_equal(loaded.columns, ["a", "b", "c", "d"])


# ============================================================================
# Test: Importance
# ============================================================================

def test_importance_percentages_and_groups():
    model = FittedLinearModel(kind=LinearKind.RIDGE, columns=["a", "b", "c"], coefficients=[1.0, -3.0, 0.0])
    assert_equal(column_importance(model), {"a": 25.0, "b": 75.0, "c": 0.0})
    grouped = importance(model, {"a": "G", "c": "G"})
    assert_equal(grouped, {"G": 25.0, "b": 75.0})
    assert_close(sum(grouped.values()), 100.0)


# ============================================================================
# Test: Metrics
# ============================================================================

def test_metrics_and_baselines():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    assert_close(rmse(y + 1.0, y), 1.0)
    assert_close(baseline_rmse(y), np.sqrt(1.25))
    labels = np.array([1.0, 0.0, 1.0, 1.0])
    assert_close(accuracy([0.9, 0.2, 0.5, 0.7], labels), 0.75)
    assert_close(majority_accuracy(labels), 0.75)


def test_holdout_metrics_table():
    predictions = pd.DataFrame({
        "video_id": ["a", "b", "c", "a", "b", "c"],
        "outcome": ["log_views"] * 6,
        "source": ["title"] * 3 + ["audio"] * 3,
        "prediction": [1.0, 2.0, 9.0, 2.0, 2.0, 9.0],
    })
    outcomes = pd.DataFrame({"log_views": [1.0, 3.0, 0.0]}, index=pd.Index(["a", "b", "c"], name="video_id"))
    table = holdout_metrics(predictions, outcomes, ["a", "b"], [Outcome.LOG_VIEWS])
    assert_equal(list(table["model"]), ["title", "audio"])
    title = table.iloc[0]
    assert_equal(title["metric"], "rmse")
    assert_close(title["value"], np.sqrt(0.5))
    assert_close(title["baseline"], 1.0)


# ============================================================================
# Test: Feature matrix
# ============================================================================

def test_feature_scaling_uses_training_rows():
    raw = pd.DataFrame({"x": [3.0, 4.0, 10.0], "flat": [0.0, 0.0, 5.0]}, index=["a", "b", "c"])
    matrix = build_feature_matrix(raw, ["a", "b"])
    assert_equal(matrix.columns, ["x"])
    assert_equal(matrix.dropped, ["flat"])
    assert_close(matrix.values[:, 0], [0.6, 0.8, 2.0])
    assert_close(matrix.norms["x"], 5.0)
    assert_close(matrix.rows(["c", "a"]).values[:, 0], [2.0, 0.6])
    assert_raises(DataError, matrix.rows, ["zzz"])


def test_prediction_column_groups():
    raw = pd.DataFrame({prediction_column(PredictionSource.AUDIO): [1.0, 2.0], "tag_count": [1.0, 3.0]},
                       index=["a", "b"])
    matrix = build_feature_matrix(raw, ["a", "b"])
    assert_equal(matrix.groups["pred_audio"], "Audio (first 30s)")
    assert_equal(matrix.groups["tag_count"], "Tags Count")
    assert_in("tag_count", matrix.select(["tag_count"]).columns)
    assert_true(isinstance(matrix, FeatureMatrix))


# ============================================================================
# Main Test Runner
# ============================================================================

def main():
    """Run all fusion tests"""
    tests = [
        ("Unpenalized ridge is least squares", test_unpenalized_ridge_is_least_squares),
        ("Ridge optimality", test_ridge_optimality),
        ("Lasso optimality", test_lasso_optimality),
        ("Coordinate descent objective non-increasing", test_coordinate_descent_objective_non_increasing),
        ("Large lasso penalty zeroes everything", test_large_lasso_penalty_zeroes_everything),
        ("Singular unpenalized system", test_singular_unpenalized_system),
        ("Input validation", test_input_validation),
        ("Binary ridge optimality", test_binary_ridge_optimality),
        ("select_lambda picks the lowest validation loss", test_select_lambda_picks_lowest_validation_loss),
        ("Model JSON round trip", test_model_json_round_trip),
        ("Importance percentages and groups", test_importance_percentages_and_groups),
        ("Metrics and baselines", test_metrics_and_baselines),
        ("Holdout metrics table", test_holdout_metrics_table),
        ("Feature scaling uses training rows", test_feature_scaling_uses_training_rows),
        ("Prediction column groups", test_prediction_column_groups),
    ]
    return run_tests("Fusion Tests", tests)


if __name__ == "__main__":
    sys.exit(main())
