"""
Holdout metrics: RMSE for continuous outcomes, accuracy for sentiment, each
next to its intercept-only baseline.
"""

from typing import Dict, Iterable, Sequence

import numpy as np
import pandas as pd

from app.models.schemas import Outcome


def rmse(pred: np.ndarray, y: np.ndarray) -> float:
    pred, y = np.asarray(pred, dtype=np.float64), np.asarray(y, dtype=np.float64)
    return float(np.sqrt(np.mean((pred - y) ** 2)))


def accuracy(prob: np.ndarray, y: np.ndarray, threshold: float = 0.5) -> float:
    prob, y = np.asarray(prob, dtype=np.float64), np.asarray(y, dtype=np.float64)
    return float(np.mean((prob > threshold).astype(np.float64) == y))


def baseline_rmse(y: np.ndarray) -> float:
    """Outcome standard deviation (root mean squared deviation from the mean)"""
    y = np.asarray(y, dtype=np.float64)
    return float(np.sqrt(np.mean((y - y.mean()) ** 2)))


def majority_accuracy(y: np.ndarray) -> float:
    y = np.asarray(y, dtype=np.float64)
    share = float(y.mean())
    return max(share, 1.0 - share)


def metric_for(outcome: Outcome, pred: np.ndarray, y: np.ndarray) -> Dict[str, float]:
    if outcome.is_binary:
        return {"metric": "accuracy", "value": accuracy(pred, y), "baseline": majority_accuracy(y)}
    return {"metric": "rmse", "value": rmse(pred, y), "baseline": baseline_rmse(y)}


def holdout_metrics(predictions: pd.DataFrame, outcomes: pd.DataFrame, holdout_ids: Sequence[str],
                    outcome_list: Iterable[Outcome]) -> pd.DataFrame:
    """
    Args:
        predictions: long table with columns video_id, outcome, source, prediction
        outcomes: outcome table indexed by video_id

    Returns:
        one row per (model source, outcome): metric, value, baseline
    """
    holdout = set(holdout_ids)
    rows = []
    subset = predictions[predictions["video_id"].isin(holdout)]
    for outcome in outcome_list:
        block = subset[subset["outcome"] == outcome.value]
        for source, group in block.groupby("source", sort=False):
            y = outcomes.loc[group["video_id"], outcome.value].to_numpy()
            rows.append({"model": source, "outcome": outcome.value,
                         **metric_for(outcome, group["prediction"].to_numpy(), y)})
    return pd.DataFrame(rows, columns=["model", "outcome", "metric", "value", "baseline"])
