"""
Mini-batch Adam training with validation-tuned step count, and ordered
parallel batch inference.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, Tuple, TypeVar

import numpy as np
import structlog
from pydantic import BaseModel, Field

from app.errors import DomainError
from app.models.schemas import TrainConfig
from app.nn.losses import binary_cross_entropy_with_logits, mse, softmax_cross_entropy
from app.nn.optim import Adam
from app.nn.params import ParamStore
from app.nn.tensor import Tensor, no_grad

logger = structlog.get_logger()

T = TypeVar("T")
R = TypeVar("R")


class TrainingReport(BaseModel):
    """What a training run ended with"""

    name: str
    steps_run: int
    best_step: int
    best_val: float
    history: List[Tuple[int, float]] = Field(default_factory=list)


class Trainer:
    """
    Runs Adam for up to `max_steps`, scoring the validation split every
    `eval_interval` steps and keeping the best parameters seen. The step
    count is therefore chosen on validation, and step 0 (initialization)
    competes too.
    """

    def __init__(self, store: ParamStore, config: TrainConfig, name: str = "model"):
        self.store = store
        self.config = config
        self.name = name
        self.optimizer = Adam(
            store,
            learning_rate=config.learning_rate,
            beta1=config.beta1,
            beta2=config.beta2,
            eps=config.eps,
        )

    def fit(self, n_train: int, batch_loss: Callable[[np.ndarray, int], Tensor],
            validate: Callable[[], float]) -> TrainingReport:
        """
        Args:
            n_train: number of training examples
            batch_loss: (indices, step) -> scalar loss in training mode
            validate: () -> validation loss (lower is better)
        """
        rng = np.random.default_rng(self.config.seed)
        batch_size = max(1, min(self.config.batch_size, n_train))
        order = rng.permutation(n_train)
        cursor = 0

        best_val = float(validate())
        best_step = 0
        best = self.store.snapshot()
        history = [(0, best_val)]

        for step in range(1, self.config.max_steps + 1):
            if cursor + batch_size > n_train:
                order = rng.permutation(n_train)
                cursor = 0
            indices = order[cursor:cursor + batch_size]
            cursor += batch_size

            self.optimizer.zero_grad()
            loss = batch_loss(indices, step)
            if not np.isfinite(loss.item()):
                raise DomainError(f"{self.name}: non-finite training loss at step {step}")
            loss.backward()
            self.optimizer.step()

            if step % self.config.eval_interval == 0 or step == self.config.max_steps:
                val = float(validate())
                history.append((step, val))
                logger.debug("validation_checkpoint", model=self.name, step=step,
                             train_loss=loss.item(), val_loss=val)
                if val < best_val:
                    best_val, best_step = val, step
                    best = self.store.snapshot()

        self.store.restore(best)
        logger.info("model_trained", model=self.name, steps_run=self.config.max_steps,
                    best_step=best_step, val_loss=best_val)
        return TrainingReport(
            name=self.name,
            steps_run=self.config.max_steps,
            best_step=best_step,
            best_val=best_val,
            history=history,
        )


class TargetScaler(BaseModel):
    """Standardization of a continuous target; identity for binary targets"""

    mean: float = 0.0
    std: float = 1.0

    @classmethod
    def fit(cls, y: np.ndarray, binary: bool) -> "TargetScaler":
        if binary:
            return cls()
        std = float(np.std(y))
        return cls(mean=float(np.mean(y)), std=std if std > 0 else 1.0)

    def transform(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=np.float64) - self.mean) / self.std

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.std + self.mean


Forward = Callable[[str, np.ndarray, bool, int], Tensor]


def _loss(kind: str, raw: Tensor, target: np.ndarray) -> Tensor:
    if kind == "mse":
        return mse(raw, target)
    if kind == "bce":
        return binary_cross_entropy_with_logits(raw, target)
    if kind == "softmax_ce":
        return softmax_cross_entropy(raw, target)
    raise ValueError(f"Unknown loss '{kind}'")


def fit_supervised(name: str, store: ParamStore, forward: Forward, y_train: np.ndarray,
                   y_val: np.ndarray, loss_kind: str, config: TrainConfig) -> Tuple[TrainingReport, TargetScaler]:
    """
    Train a model whose `forward(split, indices, training, step)` returns raw
    outputs for the selected examples of the "train" or "validation" split.
    """
    scaler = TargetScaler.fit(y_train, binary=loss_kind != "mse")
    target_train = scaler.transform(y_train) if loss_kind == "mse" else np.asarray(y_train)
    target_val = scaler.transform(y_val) if loss_kind == "mse" else np.asarray(y_val)

    def batch_loss(indices: np.ndarray, step: int) -> Tensor:
        return _loss(loss_kind, forward("train", indices, True, step), target_train[indices])

    def validate() -> float:
        total = 0.0
        with no_grad():
            for start in range(0, len(target_val), config.batch_size):
                idx = np.arange(start, min(start + config.batch_size, len(target_val)))
                total += _loss(loss_kind, forward("validation", idx, False, 0), target_val[idx]).item() * len(idx)
        return total / max(1, len(target_val))

    report = Trainer(store, config, name).fit(len(target_train), batch_loss, validate)
    return report, scaler


def batched_inference(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> List[R]:
    """
    Apply `fn` to each item without recording graphs.

    Results come back in input order, so parallel runs match serial ones.
    """
    with no_grad():
        if threads <= 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
