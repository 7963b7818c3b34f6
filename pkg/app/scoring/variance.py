"""Share of the full model's improvement over baseline carried by branded content"""

from typing import Literal

from app.errors import DomainError, UndefinedShareError
from app.models.results import VarianceShare


def improvement(metric: float, baseline: float, metric_kind: Literal["rmse", "accuracy"]) -> float:
    if baseline <= 0:
        raise DomainError(f"Baseline {metric_kind} must be positive, got {baseline}")
    if metric_kind == "rmse":
        return (baseline - metric) / baseline
    return (metric - baseline) / baseline


def variance_decomposition(brand_only_metric: float, full_model_metric: float, baseline_metric: float,
                           metric_kind: Literal["rmse", "accuracy"]) -> VarianceShare:
    """
    Raises:
        UndefinedShareError: the full model does not improve on the baseline
    """
    brand = improvement(brand_only_metric, baseline_metric, metric_kind)
    full = improvement(full_model_metric, baseline_metric, metric_kind)
    if full <= 0:
        raise UndefinedShareError(f"Full-model improvement {full:.4f} is not positive")
    return VarianceShare(metric_kind=metric_kind, improvement_brand=brand,
                         improvement_full=full, share=brand / full)
