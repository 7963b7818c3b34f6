"""
Design matrices for the interpretation regressions.

Factors are dummy-encoded as `factor[level]` with the first sorted level
dropped as reference. Interactions are named `a:b` and built after any
requested mean-centering.
"""

from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, Field

from app.errors import DataError

logger = structlog.get_logger()

CONST = "const"
CONSTANT_TOL = 1e-12


class DesignSpec(BaseModel):
    """Outcome, covariates, fixed-effect factors and interactions of one regression"""

    outcome: str
    covariates: List[str] = Field(default_factory=list)
    factors: List[str] = Field(default_factory=list)
    interactions: List[Tuple[str, str]] = Field(default_factory=list)
    center: List[str] = Field(default_factory=list, description="Columns mean-centered before interacting")
    weights: Optional[str] = None
    cluster: Optional[str] = Field(default=None, description="Column for clustered standard errors")
    intercept: bool = True
    reported: Optional[List[str]] = Field(
        default=None,
        description="Terms kept in the FitResult; defaults to covariates and interactions"
    )

    def report_terms(self) -> List[str]:
        if self.reported is not None:
            return list(self.reported)
        return list(self.covariates) + [interaction_name(a, b) for a, b in self.interactions]


class Design(BaseModel):
    """Encoded design: y, X and bookkeeping"""

    model_config = {"arbitrary_types_allowed": True}

    y: np.ndarray
    X: np.ndarray
    columns: List[str]
    weights: Optional[np.ndarray] = None
    clusters: Optional[np.ndarray] = None
    dropped: List[str] = Field(default_factory=list)
    constant_outcome: bool = False


def interaction_name(a: str, b: str) -> str:
    return f"{a}:{b}"


def factor_dummies(values: pd.Series, name: str) -> pd.DataFrame:
    """Treatment coding with the first sorted level as reference"""
    levels = sorted(values.astype(str).unique())
    out = {}
    for level in levels[1:]:
        out[f"{name}[{level}]"] = (values.astype(str) == level).astype(np.float64).to_numpy()
    return pd.DataFrame(out, index=values.index)


def build_design(spec: DesignSpec, data: pd.DataFrame, drop_constant: bool = True) -> Design:
    """
    Encode `data` according to `spec`.

    Covariates that are constant across rows are removed (and logged) when
    `drop_constant` is set; they would otherwise alias the intercept.
    """
    needed = [spec.outcome] + spec.covariates + spec.factors
    needed += [c for pair in spec.interactions for c in pair]
    missing = sorted({c for c in needed if c not in data.columns})
    if missing:
        raise DataError(f"Design columns missing from data: {', '.join(missing)}")

    frame = data.dropna(subset=list(dict.fromkeys(needed)))
    if len(frame) == 0:
        raise DataError(f"No complete rows for outcome '{spec.outcome}'")

    numeric = {}
    for col in dict.fromkeys(spec.covariates + [c for pair in spec.interactions for c in pair]):
        values = frame[col].astype(np.float64).to_numpy()
        if col in spec.center:
            values = values - values.mean()
        numeric[col] = values

    blocks = {}
    if spec.intercept:
        blocks[CONST] = np.ones(len(frame))
    for col in spec.covariates:
        blocks[col] = numeric[col]
    for a, b in spec.interactions:
        blocks[interaction_name(a, b)] = numeric[a] * numeric[b]
    for factor in spec.factors:
        for name, column in factor_dummies(frame[factor], factor).items():
            blocks[name] = column.to_numpy()

    dropped = []
    if drop_constant:
        for name in list(blocks):
            if name == CONST:
                continue
            column = blocks[name]
            constant = np.ptp(column) == 0
            if constant and (spec.intercept or not np.any(column)):
                dropped.append(name)
                del blocks[name]
        if dropped:
            logger.warning("constant_columns_dropped", outcome=spec.outcome, columns=dropped)

    y = frame[spec.outcome].astype(np.float64).to_numpy()
    constant_outcome = bool(np.ptp(y) <= CONSTANT_TOL * max(float(np.abs(y).max()), 1.0))
    if constant_outcome:
        logger.warning("constant_dependent", outcome=spec.outcome, value=float(y[0]))

    columns = list(blocks)
    X = np.column_stack([blocks[c] for c in columns]) if columns else np.zeros((len(frame), 0))
    return Design(
        y=y,
        X=X,
        columns=columns,
        weights=frame[spec.weights].astype(np.float64).to_numpy() if spec.weights else None,
        clusters=frame[spec.cluster].astype(str).to_numpy() if spec.cluster else None,
        dropped=dropped,
        constant_outcome=constant_outcome,
    )
