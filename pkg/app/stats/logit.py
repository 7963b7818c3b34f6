"""
Logistic regression by Newton-Raphson with a Firth (Jeffreys prior)
penalized fallback for separated data.
"""

from typing import List, Literal, Optional

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, Field
from scipy.special import expit, log_expit
from scipy.stats import norm

from app.config.settings import settings
from app.errors import ConvergenceError, DataError, SingularDesignError
from app.models.results import FitResult
from app.stats.design import DesignSpec, build_design
from app.stats.effects import make_term
from app.stats.ols import aliased_columns

logger = structlog.get_logger()

MAX_HALVINGS = 25


class LogitSolution(BaseModel):
    model_config = {"arbitrary_types_allowed": True}

    beta: np.ndarray
    cov: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    separation: bool = False
    firth: bool = False
    diagnostics: dict = Field(default_factory=dict)


def _information(X: np.ndarray, p: np.ndarray) -> np.ndarray:
    w = p * (1.0 - p)
    return (X * w[:, None]).T @ X


def _objective(X: np.ndarray, y: np.ndarray, beta: np.ndarray, firth: bool) -> float:
    eta = X @ beta
    loglik = float(np.sum(y * log_expit(eta) + (1.0 - y) * log_expit(-eta)))
    if firth:
        sign, logdet = np.linalg.slogdet(_information(X, expit(eta)))
        if sign <= 0:
            return -np.inf
        loglik += 0.5 * logdet
    return loglik


def logit_newton(X: np.ndarray, y: np.ndarray, firth: bool = False,
                 tol: Optional[float] = None, max_iter: Optional[int] = None,
                 separation_threshold: Optional[float] = None) -> LogitSolution:
    """
    Maximize the (optionally Firth-penalized) log likelihood with step halving.

    The plain fit stops early and reports `separation` once any coefficient
    magnitude exceeds the separation threshold or the information matrix
    becomes singular.
    """
    tol = settings.logit_tol if tol is None else tol
    max_iter = settings.logit_max_iter if max_iter is None else max_iter
    threshold = settings.separation_threshold if separation_threshold is None else separation_threshold

    n, k = X.shape
    beta = np.zeros(k)
    current = _objective(X, y, beta, firth)
    converged = False
    separation = False
    iteration = 0

    for iteration in range(1, max_iter + 1):
        p = expit(X @ beta)
        info = _information(X, p)
        score = X.T @ (y - p)
        try:
            if firth:
                info_inv = np.linalg.inv(info)
                root_w = np.sqrt(p * (1.0 - p))
                XW = X * root_w[:, None]
                hat = np.einsum("ij,jk,ik->i", XW, info_inv, XW)
                score = score + X.T @ (hat * (0.5 - p))
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            separation = not firth
            break

        candidate = beta + step
        new = _objective(X, y, candidate, firth)
        halvings = 0
        while not (new >= current - 1e-12) and halvings < MAX_HALVINGS:
            step = step / 2.0
            candidate = beta + step
            new = _objective(X, y, candidate, firth)
            halvings += 1

        beta, current = candidate, new
        if not firth and np.max(np.abs(beta)) > threshold:
            separation = True
            break
        if np.max(np.abs(step)) < tol:
            converged = True
            break

    p = expit(X @ beta)
    try:
        cov = np.linalg.inv(_information(X, p))
    except np.linalg.LinAlgError:
        cov = np.full((k, k), np.nan)

    return LogitSolution(
        beta=beta,
        cov=cov,
        loglik=current,
        iterations=iteration,
        converged=converged and not separation,
        separation=separation,
        firth=firth,
        diagnostics={
            "iterations": iteration,
            "max_abs_coef": float(np.max(np.abs(beta))) if k else 0.0,
            "loglik": float(current),
        },
    )


def fit_logit_arrays(X: np.ndarray, y: np.ndarray, penalized: bool = False) -> LogitSolution:
    """Plain fit with automatic Firth refit on separation or non-convergence"""
    if penalized:
        solution = logit_newton(X, y, firth=True)
    else:
        solution = logit_newton(X, y, firth=False)
        if not solution.converged:
            logger.warning("logit_separation_fallback", diagnostics=solution.diagnostics,
                           separation=solution.separation)
            plain = solution
            solution = logit_newton(X, y, firth=True)
            solution.separation = plain.separation or not plain.converged
    if not solution.converged:
        raise ConvergenceError("Logistic regression did not converge after Firth fallback",
                               diagnostics=solution.diagnostics)
    return solution


def fit_logit(spec: DesignSpec, data: pd.DataFrame, equation_id: str = "logit",
              penalized: bool = False,
              on_singular: Literal["raise", "drop"] = "raise") -> FitResult:
    """
    Logistic regression with Wald z-tests; percent changes are odds changes.

    Raises:
        DataError: outcome not binary
        ConvergenceError: no convergence even with the penalty
    """
    design = build_design(spec, data)
    if not np.isin(design.y, (0.0, 1.0)).all():
        raise DataError(f"Logistic outcome '{spec.outcome}' must be 0/1")

    X, columns, dropped, notes = design.X, list(design.columns), list(design.dropped), []
    aliased = aliased_columns(X, columns)
    if aliased:
        if on_singular == "raise":
            raise SingularDesignError("Rank-deficient design", aliased=aliased)
        keep = [i for i, c in enumerate(columns) if c not in aliased]
        X, columns = X[:, keep], [columns[i] for i in keep]
        dropped += aliased
        notes.append(f"aliased: {', '.join(aliased)}")
        logger.warning("aliased_columns_dropped", equation_id=equation_id, columns=aliased)

    solution = fit_logit_arrays(X, design.y, penalized)
    se = np.sqrt(np.clip(np.diag(solution.cov), 0.0, None))

    terms = {}
    for name in spec.report_terms():
        if name not in columns:
            continue
        i = columns.index(name)
        z = solution.beta[i] / se[i] if se[i] > 0 else 0.0
        p = float(2.0 * norm.sf(abs(z)))
        terms[name] = make_term(name, solution.beta[i], se[i], z, p, "logistic")

    if solution.separation:
        notes.append("separation detected; Firth-penalized estimates")
    return FitResult(
        equation_id=equation_id,
        model_kind="logit",
        n_obs=len(design.y),
        df_resid=len(design.y) - len(columns),
        terms=terms,
        dropped=dropped,
        penalized=solution.firth,
        separation=solution.separation,
        notes=notes,
    )
