"""Relative importance of combined-model coefficients"""

from typing import Dict, Mapping, Optional

import numpy as np

from app.errors import UndefinedImportanceError
from app.fusion.linear import FittedLinearModel


def column_importance(model: FittedLinearModel) -> Dict[str, float]:
    """|coef| / sum |coef| in percent; the intercept is excluded"""
    magnitude = np.abs(model.coef)
    total = magnitude.sum()
    if total == 0:
        raise UndefinedImportanceError(f"All {len(magnitude)} coefficients are zero; importance undefined")
    return {c: float(100.0 * m / total) for c, m in zip(model.columns, magnitude)}


def importance(model: FittedLinearModel, groups: Optional[Mapping[str, str]] = None) -> Dict[str, float]:
    """
    Group percentages: the sum of member column percentages. Columns absent
    from `groups` form their own group.
    """
    per_column = column_importance(model)
    if not groups:
        return per_column
    out: Dict[str, float] = {}
    for column, pct in per_column.items():
        group = groups.get(column, column)
        out[group] = out.get(group, 0.0) + pct
    return out
