"""
Linear combiner family: OLS, ridge, lasso and elastic net, with a
regularized logistic counterpart for the binary outcome.

Objectives (intercept b never penalized):

    ridge / ols        ||y - b - Xw||^2 + lam ||w||^2
    lasso / elastic    1/(2n) ||y - b - Xw||^2 + lam (a ||w||_1 + (1 - a)/2 ||w||^2)

For the binary outcome the squared loss is replaced by the negative log
likelihood (scaled by 1/2 for ridge, by 1/n for lasso and elastic net).
"""

import json
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, Field
from scipy import linalg
from scipy.special import expit, log_expit

from app.config.settings import settings
from app.errors import ConvergenceError, DataError, SingularDesignError
from app.fusion.features import FeatureMatrix
from app.models.schemas import LinearKind
from app.stats.logit import fit_logit_arrays
from app.stats.ols import aliased_columns

logger = structlog.get_logger()

ArrayLike = Union[np.ndarray, FeatureMatrix]

IRLS_MAX_ITER = 100


class FittedLinearModel(BaseModel):
    """Coefficients on the scaled features, intercept, penalty and scaling norms"""

    kind: LinearKind
    lam: float = 0.0
    l1_ratio: float = 1.0
    binary: bool = False
    columns: List[str] = Field(default_factory=list)
    coefficients: List[float] = Field(default_factory=list)
    intercept: float = 0.0
    norms: Dict[str, float] = Field(default_factory=dict)
    objective_history: List[float] = Field(default_factory=list)
    sweeps: int = 0

    @property
    def coef(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=np.float64)

    def decision(self, X: ArrayLike) -> np.ndarray:
        values = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
        return self.intercept + values @ self.coef

    def predict(self, X: ArrayLike) -> np.ndarray:
        """Continuous prediction, or the positive-class probability"""
        raw = self.decision(X)
        return expit(raw) if self.binary else raw

    def to_json(self, path: str):
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.model_dump(mode="json", exclude={"objective_history"}), handle,
                      indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, path: str) -> "FittedLinearModel":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.model_validate(json.load(handle))


# ============================================================================
# Solvers
# ============================================================================


def _check_aliasing(X: np.ndarray, columns: List[str]):
    full = np.column_stack([np.ones(len(X)), X])
    aliased = aliased_columns(full, ["intercept"] + list(columns))
    if aliased:
        raise SingularDesignError("Unpenalized system is singular", aliased=aliased)


def ridge_normal_equations(X: np.ndarray, y: np.ndarray, lam: float) -> Tuple[float, np.ndarray]:
    """Solve the bordered normal equations with an unpenalized intercept"""
    n, k = X.shape
    col_sums = X.sum(axis=0)
    A = np.empty((k + 1, k + 1))
    A[0, 0] = n
    A[0, 1:] = col_sums
    A[1:, 0] = col_sums
    A[1:, 1:] = X.T @ X + lam * np.eye(k)
    rhs = np.concatenate([[y.sum()], X.T @ y])
    solution = linalg.solve(A, rhs, assume_a="sym")
    return float(solution[0]), solution[1:]


def _soft_threshold(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def _enet_objective(r: np.ndarray, w: np.ndarray, weights: np.ndarray, lam: float, alpha: float) -> float:
    n = len(r)
    return float(0.5 * np.sum(weights * r * r) / n
                 + lam * (alpha * np.abs(w).sum() + 0.5 * (1.0 - alpha) * w @ w))


def coordinate_descent(X: np.ndarray, y: np.ndarray, lam: float, alpha: float,
                       weights: Optional[np.ndarray] = None,
                       w0: Optional[np.ndarray] = None, b0: Optional[float] = None,
                       tol: Optional[float] = None,
                       max_sweeps: Optional[int] = None) -> Tuple[float, np.ndarray, List[float], int]:
    """
    Cyclic coordinate descent for the (weighted) elastic-net objective.
    Stops when the largest coefficient change of a sweep is below `tol`.

    Returns:
        (intercept, coefficients, objective after each sweep, sweeps run)
    """
    tol = settings.coordinate_descent_tol if tol is None else tol
    max_sweeps = settings.coordinate_descent_max_sweeps if max_sweeps is None else max_sweeps
    n, k = X.shape
    weights = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    w = np.zeros(k) if w0 is None else np.array(w0, dtype=np.float64)
    b = float(np.sum(weights * (y - X @ w)) / weights.sum()) if b0 is None else float(b0)

    r = y - b - X @ w
    z = (weights[:, None] * X * X).sum(axis=0) / n
    history = [_enet_objective(r, w, weights, lam, alpha)]
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_change = 0.0
        for j in range(k):
            if z[j] == 0:
                continue
            old = w[j]
            rho = float(np.sum(weights * X[:, j] * (r + X[:, j] * old))) / n
            new = _soft_threshold(rho, lam * alpha) / (z[j] + lam * (1.0 - alpha))
            if new != old:
                r -= X[:, j] * (new - old)
                w[j] = new
                max_change = max(max_change, abs(new - old))
        shift = float(np.sum(weights * r) / weights.sum())
        if shift != 0.0:
            b += shift
            r -= shift
            max_change = max(max_change, abs(shift))
        history.append(_enet_objective(r, w, weights, lam, alpha))
        if max_change < tol:
            break
    else:
        logger.warning("coordinate_descent_max_sweeps", sweeps=max_sweeps, lam=lam)
    return b, w, history, sweeps


def _ridge_logistic(X: np.ndarray, y: np.ndarray, lam: float) -> Tuple[float, np.ndarray, int]:
    """Newton iterations for -loglik + lam/2 ||w||^2"""
    n, k = X.shape
    Xt = np.column_stack([np.ones(n), X])
    penalty = lam * np.eye(k + 1)
    penalty[0, 0] = 0.0
    beta = np.zeros(k + 1)
    for iteration in range(1, IRLS_MAX_ITER + 1):
        p = expit(Xt @ beta)
        grad = Xt.T @ (y - p) - penalty @ beta
        hess = (Xt * (p * (1.0 - p))[:, None]).T @ Xt + penalty
        step = linalg.solve(hess, grad, assume_a="sym")
        beta += step
        if np.max(np.abs(step)) < settings.logit_tol:
            return float(beta[0]), beta[1:], iteration
    raise ConvergenceError("Regularized logistic fit did not converge",
                           diagnostics={"lam": lam, "max_abs_coef": float(np.max(np.abs(beta)))})


def _enet_logistic(X: np.ndarray, y: np.ndarray, lam: float, alpha: float,
                   tol: float) -> Tuple[float, np.ndarray, List[float], int]:
    """Iteratively reweighted least squares around weighted coordinate descent"""
    n, k = X.shape
    b = float(np.log((y.mean() + 1e-12) / (1.0 - y.mean() + 1e-12)))
    w = np.zeros(k)
    history: List[float] = []
    sweeps = 0
    for _ in range(IRLS_MAX_ITER):
        eta = b + X @ w
        p = expit(eta)
        weights = np.clip(p * (1.0 - p), 1e-5, None)
        working = eta + (y - p) / weights
        b_new, w_new, _, inner = coordinate_descent(X, working, lam, alpha, weights, w0=w, b0=b, tol=tol)
        sweeps += inner
        change = max(abs(b_new - b), float(np.max(np.abs(w_new - w))) if k else 0.0)
        b, w = b_new, w_new
        eta = b + X @ w
        nll = -float(np.sum(y * log_expit(eta) + (1.0 - y) * log_expit(-eta))) / n
        history.append(nll + lam * (alpha * np.abs(w).sum() + 0.5 * (1.0 - alpha) * w @ w))
        if change < tol:
            break
    return b, w, history, sweeps


def fit_linear(X: ArrayLike, y: np.ndarray, kind: LinearKind, lam: float = 0.0,
               binary: bool = False, l1_ratio: float = 0.5,
               columns: Optional[Sequence[str]] = None,
               tol: Optional[float] = None) -> FittedLinearModel:
    """
    Fit one member of the linear family.

    Raises:
        DataError: fewer than two rows or mismatched lengths
        SingularDesignError: singular unpenalized system, naming dependent columns
    """
    norms = {}
    if isinstance(X, FeatureMatrix):
        columns, norms, values = X.columns, X.norms, X.values
    else:
        values = np.asarray(X, dtype=np.float64)
        columns = list(columns) if columns is not None else [f"x{j}" for j in range(values.shape[1])]
    y = np.asarray(y, dtype=np.float64)
    if values.shape[0] < 2 or values.shape[0] != len(y):
        raise DataError(f"fit_linear needs > 1 matching rows (X {values.shape}, y {y.shape})")
    if lam < 0:
        raise DataError("Penalty strength must be nonnegative")

    tol = settings.coordinate_descent_tol if tol is None else tol
    history: List[float] = []
    sweeps = 0
    if kind is LinearKind.OLS:
        lam = 0.0
    unpenalized = lam == 0.0 and kind in (LinearKind.OLS, LinearKind.RIDGE)
    if unpenalized:
        _check_aliasing(values, list(columns))

    alpha = 1.0 if kind is LinearKind.LASSO else l1_ratio
    if kind in (LinearKind.OLS, LinearKind.RIDGE):
        if binary and lam == 0.0:
            solution = fit_logit_arrays(np.column_stack([np.ones(len(y)), values]), y)
            intercept, coef = float(solution.beta[0]), solution.beta[1:]
        elif binary:
            intercept, coef, sweeps = _ridge_logistic(values, y, lam)
        else:
            intercept, coef = ridge_normal_equations(values, y, lam)
        alpha = 0.0
    elif binary:
        intercept, coef, history, sweeps = _enet_logistic(values, y, lam, alpha, tol)
    else:
        intercept, coef, history, sweeps = coordinate_descent(values, y, lam, alpha, tol=tol)

    return FittedLinearModel(
        kind=kind,
        lam=float(lam),
        l1_ratio=float(alpha),
        binary=binary,
        columns=list(columns),
        coefficients=[float(c) for c in coef],
        intercept=float(intercept),
        norms=dict(norms),
        objective_history=history,
        sweeps=sweeps,
    )


def validation_loss(model: FittedLinearModel, X: ArrayLike, y: np.ndarray) -> float:
    """RMSE, or mean log loss for the binary outcome"""
    y = np.asarray(y, dtype=np.float64)
    if model.binary:
        eta = model.decision(X)
        return -float(np.mean(y * log_expit(eta) + (1.0 - y) * log_expit(-eta)))
    return float(np.sqrt(np.mean((model.predict(X) - y) ** 2)))


def select_lambda(X_train: ArrayLike, y_train: np.ndarray, X_val: ArrayLike, y_val: np.ndarray,
                  kind: LinearKind, binary: bool = False, l1_ratio: float = 0.5,
                  grid: Optional[Sequence[float]] = None) -> Tuple[FittedLinearModel, Dict[float, float]]:
    """Fit on train for every grid point and keep the lowest validation loss"""
    if kind is LinearKind.OLS:
        model = fit_linear(X_train, y_train, kind, 0.0, binary)
        return model, {0.0: validation_loss(model, X_val, y_val)}

    grid = list(settings.ridge_lambda_grid if grid is None else grid)
    scores: Dict[float, float] = {}
    best: Optional[FittedLinearModel] = None
    for lam in grid:
        try:
            model = fit_linear(X_train, y_train, kind, lam, binary, l1_ratio)
        except ConvergenceError as e:
            logger.warning("lambda_skipped", kind=kind.value, lam=lam, error=str(e))
            continue
        scores[lam] = validation_loss(model, X_val, y_val)
        if best is None or scores[lam] < scores[best.lam]:
            best = model
    if best is None:
        raise ConvergenceError("No penalty strength on the grid produced a fit", diagnostics={"kind": kind.value})
    logger.info("lambda_selected", kind=kind.value, lam=best.lam, val_loss=round(scores[best.lam], 6))
    return best, scores
