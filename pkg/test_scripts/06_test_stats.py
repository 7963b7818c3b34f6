#!/usr/bin/env python3
"""
Test: Regression Engine
Purpose: Verify design encoding, OLS, logistic fits and effect reporting

Tests:
- Factor dummies, centering, interactions and constant-column removal
- OLS matches the normal equations and names aliased columns
- Residual orthogonality, fixed-effect shift invariance, null rejection rate
- A constant dependent is never reported as significant
- Logistic score equations vanish at the solution; separation triggers Firth
- Percent changes, significance tiers and Benjamini-Hochberg adjustment
"""

import math
import sys

import numpy as np
import pandas as pd

from fixtures import (
    run_tests,
    assert_equal, assert_true, assert_false, assert_close, assert_raises, assert_in, assert_not_in
)

from app.errors import DataError, SingularDesignError
from app.models.results import SignificanceTier
from app.stats.design import CONST, DesignSpec, build_design, factor_dummies, interaction_name
from app.stats.effects import adjust_terms, benjamini_hochberg, make_term, percent_change, significance_tier
from app.stats.logit import fit_logit, logit_newton
from app.stats.ols import aliased_columns, fit_ols, ols_solve, t_test


def linear_frame(n=40, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    z = rng.standard_normal(n)
    group = np.array(["a", "b", "c", "d"])[np.arange(n) % 4]
    y = 1.0 + 2.0 * x - 0.5 * z + 0.3 * (group == "b") + 0.1 * rng.standard_normal(n)
    return pd.DataFrame({"y": y, "x": x, "z": z, "group": group})


# ============================================================================
# Test: Design matrices
# ============================================================================

def test_factor_dummies_drop_first_level():
    dummies = factor_dummies(pd.Series(["c", "a", "b", "a"]), "g")
    assert_equal(list(dummies.columns), ["g[b]", "g[c]"])
    assert_equal(list(dummies["g[c]"]), [1.0, 0.0, 0.0, 0.0])


def test_centered_interaction():
    """Interaction columns are products of the centered inputs"""
    data = pd.DataFrame({"y": [1.0, 2.0, 3.0, 4.0], "a": [0.0, 1.0, 0.0, 1.0], "b": [1.0, 2.0, 3.0, 6.0]})
    spec = DesignSpec(outcome="y", covariates=["a", "b"], interactions=[("a", "b")], center=["b"])
    design = build_design(spec, data)
    assert_equal(design.columns, [CONST, "a", "b", "a:b"])
    centered_b = np.array([1.0, 2.0, 3.0, 6.0]) - 3.0
    assert_close(design.X[:, 2], centered_b)
    assert_close(design.X[:, 3], np.array([0.0, 1.0, 0.0, 1.0]) * centered_b)
    assert_equal(interaction_name("a", "b"), "a:b")


def test_constant_column_dropped():
    data = linear_frame()
    data["flat"] = 3.0
    design = build_design(DesignSpec(outcome="y", covariates=["x", "flat"]), data)
    assert_equal(design.dropped, ["flat"])
    assert_not_in("flat", design.columns)


def test_missing_columns_and_rows():
    data = linear_frame()
    error = assert_raises(DataError, build_design, DesignSpec(outcome="y", covariates=["nope"]), data)
    assert_in("nope", str(error))
    empty = data.assign(y=np.nan)
    assert_raises(DataError, build_design, DesignSpec(outcome="y", covariates=["x"]), empty)


def test_rows_with_missing_values_skipped():
    data = linear_frame(n=12)
    data.loc[3, "x"] = np.nan
    design = build_design(DesignSpec(outcome="y", covariates=["x"]), data)
    assert_equal(len(design.y), 11)


# ============================================================================
# Test: OLS
# ============================================================================

def test_ols_matches_normal_equations():
    data = linear_frame()
    spec = DesignSpec(outcome="y", covariates=["x", "z"], factors=["group"])
    fit = fit_ols(spec, data, equation_id="check", cluster=False)
    design = build_design(spec, data)
    xtx_inv = np.linalg.inv(design.X.T @ design.X)
    beta = xtx_inv @ design.X.T @ design.y
    resid = design.y - design.X @ beta
    n, k = design.X.shape
    se = np.sqrt(np.diag(xtx_inv) * (resid @ resid) / (n - k))
    i = design.columns.index("x")
    assert_close(fit.terms["x"].estimate, beta[i], tol=1e-10)
    assert_close(fit.terms["x"].se, se[i], tol=1e-10)
    assert_equal(fit.df_resid, n - k)
    assert_equal(set(fit.terms), {"x", "z"})
    assert_equal(fit.terms["x"].tier, SignificanceTier.STRONG)
    assert_close(fit.terms["x"].pct_change, 100.0 * math.expm1(beta[i]), tol=1e-8)


def test_singular_design_names_aliased_columns():
    data = linear_frame()
    data["x2"] = 2.0 * data["x"]
    spec = DesignSpec(outcome="y", covariates=["x", "x2"])
    error = assert_raises(SingularDesignError, fit_ols, spec, data, cluster=False)
    assert_equal(len(error.aliased), 1)
    assert_in(error.aliased[0], ("x", "x2"))
    dropped = fit_ols(spec, data, on_singular="drop", cluster=False)
    assert_equal(len(dropped.terms), 1)
    assert_true(dropped.notes and dropped.notes[0].startswith("aliased"))


def test_ols_needs_more_rows_than_columns():
    X = np.ones((2, 2))
    assert_raises(DataError, ols_solve, X, np.zeros(2), ["a", "b"])
    assert_equal(aliased_columns(np.zeros((3, 0)), []), [])


def test_cluster_robust_degrees_of_freedom():
    """Clustered errors test on G - 1 degrees of freedom"""
    data = linear_frame()
    spec = DesignSpec(outcome="y", covariates=["x"], cluster="group")
    fit = fit_ols(spec, data, cluster=True)
    assert_equal(fit.df_resid, 3)
    assert_true(fit.terms["x"].se > 0)


def test_weighted_least_squares():
    """Unit weights reproduce the unweighted fit"""
    data = linear_frame().assign(w=1.0)
    plain = fit_ols(DesignSpec(outcome="y", covariates=["x"]), data, cluster=False)
    weighted = fit_ols(DesignSpec(outcome="y", covariates=["x"], weights="w"), data, cluster=False)
    assert_close(weighted.terms["x"].estimate, plain.terms["x"].estimate, tol=1e-12)


def test_residuals_orthogonal_to_design():
    data = linear_frame()
    design = build_design(DesignSpec(outcome="y", covariates=["x", "z"], factors=["group"]), data)
    solution = ols_solve(design.X, design.y, design.columns)
    assert_close(design.X.T @ solution.resid, np.zeros(len(design.columns)), tol=1e-9)
    assert_close(solution.resid.sum(), 0.0, tol=1e-9)


def test_fixed_effects_absorb_group_shifts():
    """Adding a constant per group leaves the slope and its error unchanged"""
    data = linear_frame()
    shift = {"a": 5.0, "b": -3.0, "c": 10.0, "d": 0.5}
    shifted = data.assign(y=data["y"] + data["group"].map(shift))
    spec = DesignSpec(outcome="y", covariates=["x", "z"], factors=["group"])
    base = fit_ols(spec, data, cluster=False)
    moved = fit_ols(spec, shifted, cluster=False)
    for name in ("x", "z"):
        assert_close(moved.terms[name].estimate, base.terms[name].estimate, tol=1e-9)
        assert_close(moved.terms[name].se, base.terms[name].se, tol=1e-9)


def test_constant_outcome_is_not_significant():
    """A flat dependent has nothing to explain, whatever the covariates"""
    rng = np.random.default_rng(11)
    data = pd.DataFrame({
        "mean_gradient": np.full(40, 0.25),
        "size_pct": rng.uniform(0.0, 30.0, 40),
        "influencer": np.array(["i1", "i2", "i3", "i4"])[np.arange(40) % 4],
    })
    spec = DesignSpec(outcome="mean_gradient", covariates=["size_pct"], factors=["influencer"])
    assert_true(build_design(spec, data).constant_outcome)
    fit = fit_ols(spec, data, equation_id="step1|image|Persons", cluster=False)
    term = fit.terms["size_pct"]
    assert_equal(term.estimate, 0.0)
    assert_equal(term.p_value, 1.0)
    assert_equal(term.tier, SignificanceTier.NONE)
    assert_false(term.significant)
    assert_true(any("constant dependent" in note for note in fit.notes))
    assert_false(build_design(spec, data.assign(mean_gradient=data["size_pct"])).constant_outcome)


def test_degenerate_standard_errors():
    assert_equal(t_test(0.0, 0.0, 10), (0.0, 0.0, 1.0))
    assert_equal(t_test(float("nan"), float("nan"), 10)[2], 1.0)
    estimate, stat, p = t_test(0.5, 0.0, 10)
    assert_equal((estimate, stat, p), (0.5, math.inf, 0.0))
    x = np.linspace(0.0, 1.0, 20)
    exact = fit_ols(DesignSpec(outcome="y", covariates=["x"]), pd.DataFrame({"y": 1.0 + 2.0 * x, "x": x}),
                    cluster=False)
    assert_close(exact.terms["x"].estimate, 2.0, tol=1e-9)
    assert_equal(exact.terms["x"].tier, SignificanceTier.STRONG)


def test_null_rejection_rate():
    """Under no effect the 5% test rejects about 5% of the time"""
    rng = np.random.default_rng(2024)
    trials, n, rejected = 2000, 50, 0
    for _ in range(trials):
        X = np.column_stack([np.ones(n), rng.standard_normal(n)])
        solution = ols_solve(X, rng.standard_normal(n), [CONST, "x"])
        _, _, p = t_test(solution.beta[1], math.sqrt(solution.cov[1, 1]), solution.df_resid)
        rejected += p < 0.05
    rate = rejected / trials
    assert_true(0.035 <= rate <= 0.065, f"rejection rate {rate}")


# ============================================================================
# Test: Logistic regression
# ============================================================================

def binary_frame(n=200, seed=1):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    p = 1.0 / (1.0 + np.exp(-(0.3 + 1.2 * x)))
    return pd.DataFrame({"y": (rng.random(n) < p).astype(float), "x": x})


def test_logit_score_vanishes():
    data = binary_frame()
    X = np.column_stack([np.ones(len(data)), data["x"]])
    solution = logit_newton(X, data["y"].to_numpy())
    assert_true(solution.converged)
    p = 1.0 / (1.0 + np.exp(-(X @ solution.beta)))
    assert_close(X.T @ (data["y"].to_numpy() - p), np.zeros(2), tol=1e-6)
    assert_true(0.6 < solution.beta[1] < 2.0, f"slope {solution.beta[1]}")


def test_logit_reports_odds_changes():
    data = binary_frame()
    fit = fit_logit(DesignSpec(outcome="y", covariates=["x"]), data, equation_id="logit_check")
    term = fit.terms["x"]
    assert_equal(fit.model_kind, "logit")
    assert_false(fit.separation)
    assert_close(term.pct_change, 100.0 * math.expm1(term.estimate), tol=1e-8)
    assert_equal(term.tier, SignificanceTier.STRONG)


def test_separation_triggers_firth():
    """Perfectly separated data get finite penalized estimates"""
    x = np.linspace(-2.0, 2.0, 12)
    data = pd.DataFrame({"y": (x > 0).astype(float), "x": x})
    fit = fit_logit(DesignSpec(outcome="y", covariates=["x"]), data)
    assert_true(fit.separation)
    assert_true(fit.penalized)
    assert_true(np.isfinite(fit.terms["x"].estimate) and fit.terms["x"].estimate > 0)
    assert_true(any("Firth" in note for note in fit.notes))


def test_logit_requires_binary_outcome():
    data = binary_frame().assign(y=lambda d: d["y"] * 2.0)
    assert_raises(DataError, fit_logit, DesignSpec(outcome="y", covariates=["x"]), data)


def test_log_odds_recovery():
    """Wald intervals of two standard errors cover a unit log-odds slope"""
    rng = np.random.default_rng(7)
    trials, covered, estimates = 200, 0, []
    for _ in range(trials):
        x = rng.standard_normal(500)
        y = (rng.random(500) < 1.0 / (1.0 + np.exp(-x))).astype(float)
        term = fit_logit(DesignSpec(outcome="y", covariates=["x"]), pd.DataFrame({"y": y, "x": x})).terms["x"]
        covered += abs(term.estimate - 1.0) <= 2.0 * term.se
        estimates.append(term.estimate)
    assert_true(covered / trials >= 0.9, f"coverage {covered / trials}")
    assert_close(np.mean(estimates), 1.0, tol=0.05)


# ============================================================================
# Test: Effect reporting
# ============================================================================

def test_percent_change():
    assert_close(percent_change(0.0), 0.0)
    assert_close(percent_change(math.log(2.0)), 100.0, tol=1e-9)
    assert_close(percent_change(-math.inf), -100.0)
    assert_equal(percent_change(800.0), math.inf)


def test_significance_tiers():
    assert_equal(significance_tier(0.01), SignificanceTier.STRONG)
    assert_equal(significance_tier(0.05), SignificanceTier.WEAK)
    assert_equal(significance_tier(0.07), SignificanceTier.WEAK)
    assert_equal(significance_tier(0.1), SignificanceTier.NONE)
    term = make_term("x", 0.244, 0.05, 4.88, 0.001)
    assert_equal(term.formatted(), f"{100.0 * math.expm1(0.244):.2f}*")
    assert_true(term.significant)


def test_benjamini_hochberg():
    adjusted = benjamini_hochberg([0.01, 0.04, 0.03])
    assert_close(adjusted, [0.03, 0.04, 0.04], tol=1e-12)
    assert_equal(benjamini_hochberg([]).size, 0)
    terms = adjust_terms([make_term("a", 0.1, 0.1, 1.0, 0.02), make_term("b", 0.1, 0.1, 1.0, 0.04)])
    assert_close([t.p_value for t in terms], [0.04, 0.04])
    assert_equal(terms[0].tier, SignificanceTier.STRONG)


# ============================================================================
# Main Test Runner
# ============================================================================

def main():
    """Run all regression engine tests"""
    tests = [
        ("Factor dummies drop the first level", test_factor_dummies_drop_first_level),
        ("Centered interaction", test_centered_interaction),
        ("Constant column dropped", test_constant_column_dropped),
        ("Missing columns and rows", test_missing_columns_and_rows),
        ("Rows with missing values skipped", test_rows_with_missing_values_skipped),
        ("OLS matches the normal equations", test_ols_matches_normal_equations),
        ("Singular design names aliased columns", test_singular_design_names_aliased_columns),
        ("OLS needs more rows than columns", test_ols_needs_more_rows_than_columns),
        ("Cluster-robust degrees of freedom", test_cluster_robust_degrees_of_freedom),
        ("Weighted least squares", test_weighted_least_squares),
        ("Residuals orthogonal to the design", test_residuals_orthogonal_to_design),
        ("Fixed effects absorb group shifts", test_fixed_effects_absorb_group_shifts),
        ("Constant outcome is not significant", test_constant_outcome_is_not_significant),
        ("Degenerate standard errors", test_degenerate_standard_errors),
        ("Null rejection rate", test_null_rejection_rate),
        ("Logistic score vanishes", test_logit_score_vanishes),
        ("Logistic reports odds changes", test_logit_reports_odds_changes),
        ("Separation triggers Firth", test_separation_triggers_firth),
        ("Logistic requires a binary outcome", test_logit_requires_binary_outcome),
        ("Log-odds recovery", test_log_odds_recovery),
        ("Percent change", test_percent_change),
        ("Significance tiers", test_significance_tiers),
        ("Benjamini-Hochberg", test_benjamini_hochberg),
    ]
    return run_tests("Regression Engine Tests", tests)


if __name__ == "__main__":
    sys.exit(main())
