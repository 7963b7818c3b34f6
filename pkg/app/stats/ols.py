"""
Least squares via pivoted QR with classical or cluster-robust standard errors.
"""

from typing import List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel
from scipy import linalg
from scipy.stats import t as t_dist

from app.config.settings import settings
from app.errors import DataError, SingularDesignError
from app.models.results import FitResult
from app.stats.design import Design, DesignSpec, build_design
from app.stats.effects import make_term

logger = structlog.get_logger()

RANK_TOL = 1e-10
ZERO_SE_TOL = 1e-12


class OLSSolution(BaseModel):
    """Coefficients, covariance and residuals of one least-squares fit"""

    model_config = {"arbitrary_types_allowed": True}

    columns: List[str]
    beta: np.ndarray
    cov: np.ndarray
    resid: np.ndarray
    df_resid: int
    sigma2: float


def aliased_columns(X: np.ndarray, columns: List[str]) -> List[str]:
    """Columns that are linear combinations of earlier-pivoted columns"""
    if X.shape[1] == 0:
        return []
    _, R, perm = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > RANK_TOL * max(diag[0], 1.0)))
    return [columns[i] for i in sorted(perm[rank:])]


def _cluster_cov(X: np.ndarray, resid: np.ndarray, bread: np.ndarray, clusters: np.ndarray) -> np.ndarray:
    n, k = X.shape
    groups = pd.unique(clusters)
    meat = np.zeros((k, k))
    for g in groups:
        rows = clusters == g
        score = X[rows].T @ resid[rows]
        meat += np.outer(score, score)
    G = len(groups)
    scale = (G / max(G - 1, 1)) * ((n - 1) / max(n - k, 1))
    return scale * bread @ meat @ bread


def ols_solve(X: np.ndarray, y: np.ndarray, columns: List[str],
              weights: Optional[np.ndarray] = None,
              clusters: Optional[np.ndarray] = None) -> OLSSolution:
    """
    Raises:
        DataError: n <= k
        SingularDesignError: rank-deficient X, naming the aliased columns
    """
    n, k = X.shape
    if n <= k:
        raise DataError(f"OLS needs more rows than columns (n={n}, k={k})")

    if weights is not None:
        root = np.sqrt(np.asarray(weights, dtype=np.float64))
        Xw, yw = X * root[:, None], y * root
    else:
        Xw, yw = X, y

    Q, R, perm = linalg.qr(Xw, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > RANK_TOL * max(diag[0], 1.0)))
    if rank < k:
        raise SingularDesignError(
            "Rank-deficient design",
            aliased=[columns[i] for i in sorted(perm[rank:])],
        )

    beta_p = linalg.solve_triangular(R, Q.T @ yw)
    beta = np.empty(k)
    beta[perm] = beta_p

    resid = yw - Xw @ beta
    df_resid = n - k
    sigma2 = float(resid @ resid / df_resid)

    R_inv = linalg.solve_triangular(R, np.eye(k))
    bread = np.empty((k, k))
    bread[np.ix_(perm, perm)] = R_inv @ R_inv.T

    if clusters is not None:
        cov = _cluster_cov(Xw, resid, bread, np.asarray(clusters))
        df_resid = max(len(pd.unique(clusters)) - 1, 1)
    else:
        cov = sigma2 * bread

    return OLSSolution(columns=list(columns), beta=beta, cov=cov, resid=resid,
                       df_resid=df_resid, sigma2=sigma2)


def t_test(beta: float, se: float, df_resid: int) -> Tuple[float, float, float]:
    """
    Estimate, t statistic and two-sided p-value of one coefficient.

    A vanishing standard error with a nonzero slope is an exact fit (p = 0);
    with a vanishing slope too, the term carries no effect (p = 1).
    """
    scale = max(abs(float(beta)), 1.0)
    if se > ZERO_SE_TOL * scale:
        stat = float(beta / se)
        return float(beta), stat, float(2.0 * t_dist.sf(abs(stat), df_resid))
    if abs(beta) > ZERO_SE_TOL * scale:
        return float(beta), float(np.inf * np.sign(beta)), 0.0
    return 0.0, 0.0, 1.0


def fit_design(design: Design, spec: DesignSpec, equation_id: str,
               on_singular: Literal["raise", "drop"] = "raise") -> FitResult:
    X, columns = design.X, list(design.columns)
    dropped = list(design.dropped)
    notes = []
    if on_singular == "drop":
        aliased = aliased_columns(X, columns)
        if aliased:
            logger.warning("aliased_columns_dropped", equation_id=equation_id, columns=aliased)
            keep = [i for i, c in enumerate(columns) if c not in aliased]
            X, columns = X[:, keep], [columns[i] for i in keep]
            dropped += aliased
            notes.append(f"aliased: {', '.join(aliased)}")

    solution = ols_solve(X, design.y, columns, design.weights, design.clusters)
    se = np.sqrt(np.clip(np.diag(solution.cov), 0.0, None))
    if design.constant_outcome:
        notes.append("constant dependent; no variation to explain")

    terms = {}
    for name in spec.report_terms():
        if name not in solution.columns:
            continue
        i = solution.columns.index(name)
        if design.constant_outcome:
            terms[name] = make_term(name, 0.0, 0.0, 0.0, 1.0, "log_linear")
            continue
        estimate, stat, p = t_test(solution.beta[i], se[i], solution.df_resid)
        terms[name] = make_term(name, estimate, se[i], stat, p, "log_linear")

    logger.debug("ols_fitted", equation_id=equation_id, n_obs=len(design.y), k=len(columns))
    return FitResult(
        equation_id=equation_id,
        model_kind="ols",
        n_obs=len(design.y),
        df_resid=solution.df_resid,
        terms=terms,
        dropped=dropped,
        notes=notes,
    )


def fit_ols(spec: DesignSpec, data: pd.DataFrame, equation_id: str = "ols",
            on_singular: Literal["raise", "drop"] = "raise",
            cluster: Optional[bool] = None) -> FitResult:
    """
    Fixed-effects OLS with t-tests on n - k degrees of freedom.

    `cluster` (default `settings.cluster_by_influencer`) switches to CRV1
    errors over `spec.cluster`.
    """
    cluster = settings.cluster_by_influencer if cluster is None else cluster
    if not cluster:
        spec = spec.model_copy(update={"cluster": None})
    design = build_design(spec, data)
    return fit_design(design, spec, equation_id, on_singular)
