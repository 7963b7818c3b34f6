"""Effect reporting: percent change, significance tiers and p-value adjustment"""

import math
from typing import Literal, Optional, Sequence

import numpy as np

from app.config.settings import settings
from app.models.results import FitTerm, SignificanceTier


def percent_change(coef: float, model_kind: Literal["log_linear", "logistic"] = "log_linear") -> float:
    """
    100 * (exp(coef) - 1): percent change in the untransformed outcome for
    log-linear models, percent change in the odds for logistic models.
    """
    if coef == -math.inf:
        return -100.0
    if coef > 700.0:
        return math.inf
    return 100.0 * math.expm1(coef)


def significance_tier(p_value: float, strong: Optional[float] = None,
                      weak: Optional[float] = None) -> SignificanceTier:
    strong = settings.significance_level if strong is None else strong
    weak = settings.weak_significance_level if weak is None else weak
    if p_value < strong:
        return SignificanceTier.STRONG
    if p_value < weak:
        return SignificanceTier.WEAK
    return SignificanceTier.NONE


def benjamini_hochberg(p_values: Sequence[float]) -> np.ndarray:
    """Step-up adjusted p-values controlling the false discovery rate"""
    p = np.asarray(p_values, dtype=np.float64)
    n = p.size
    if n == 0:
        return p
    order = np.argsort(p)
    ranked = p[order] * n / np.arange(1, n + 1)
    adjusted = np.minimum.accumulate(ranked[::-1])[::-1]
    out = np.empty(n)
    out[order] = np.clip(adjusted, 0.0, 1.0)
    return out


def make_term(name: str, estimate: float, se: float, statistic: float, p_value: float,
              model_kind: Literal["log_linear", "logistic"] = "log_linear") -> FitTerm:
    return FitTerm(
        term=name,
        estimate=float(estimate),
        se=float(se),
        statistic=float(statistic),
        p_value=float(p_value),
        tier=significance_tier(p_value),
        pct_change=percent_change(float(estimate), model_kind),
    )


def adjust_terms(terms: Sequence[FitTerm]) -> list:
    """Re-tier terms on Benjamini-Hochberg adjusted p-values"""
    adjusted = benjamini_hochberg([t.p_value for t in terms])
    return [
        t.model_copy(update={"p_value": float(p), "tier": significance_tier(float(p))})
        for t, p in zip(terms, adjusted)
    ]
