"""Minimal MLP classifier trained by plain SGD.

One hidden ReLU layer and a softmax output, parameters initialized with
Xavier-uniform bounds and zero biases.  The training loop is deliberately
bare: seeded per-epoch shuffling, fixed learning rate, no momentum, a full
evaluation of the held-out set after every epoch.  The loss function is
pluggable so that magnitude, spread, cross-entropy and mean squared error
can be compared under otherwise identical conditions.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import losses, metrics
from .errors import DivergenceError, InvalidArgumentError
from .losses import CLASSIFICATION_LOSSES, PredictionBatch
from .synthdata import SplitDataset


@dataclass(frozen=True)
class MLPModel:
    """Parameters of the two-layer perceptron.

    Shapes: w1 (hidden x input), b1 (hidden,), w2 (classes x hidden),
    b2 (classes,).
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        for name in ("w1", "b1", "w2", "b2"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.isfinite(a).all():
                raise InvalidArgumentError(f"{name} must be finite")
            object.__setattr__(self, name, a)
        if self.w1.ndim != 2 or self.w2.ndim != 2:
            raise InvalidArgumentError("weight matrices must be 2-D")
        if self.b1.shape != (self.w1.shape[0],) or self.b2.shape != (self.w2.shape[0],):
            raise InvalidArgumentError("bias shapes must match their layers")
        if self.w2.shape[1] != self.w1.shape[0]:
            raise InvalidArgumentError("layer widths are inconsistent")

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def n_classes(self) -> int:
        return self.w2.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run; defaults match the experiments."""

    loss_name: str
    learning_rate: float = 0.01
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.loss_name not in CLASSIFICATION_LOSSES:
            raise InvalidArgumentError(
                f"loss_name must be one of {sorted(CLASSIFICATION_LOSSES)}, got {self.loss_name!r}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise InvalidArgumentError("learning_rate must be positive")
        if self.epochs < 0:
            raise InvalidArgumentError("epochs must be non-negative")
        if self.batch_size < 1:
            raise InvalidArgumentError("batch_size must be at least 1")


@dataclass(frozen=True)
class EpochRecord:
    """Training loss plus held-out metrics for one epoch (1-based)."""

    epoch: int
    train_loss: float
    acc: float
    f1_micro: float
    f1_macro: float
    pr_auc: float
    cce: float
    mse: float
    sec: float
    pr_auc_macro: float


@dataclass(frozen=True)
class TrainTrace:
    """Per-epoch records of one training run."""

    records: tuple[EpochRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def init_model(input_dim: int, hidden_dim: int, n_classes: int, seed: int = 0) -> MLPModel:
    """Xavier-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases."""
    if min(input_dim, hidden_dim, n_classes) < 1:
        raise InvalidArgumentError("all layer sizes must be positive")
    rng = np.random.default_rng(seed)
    bound1 = math.sqrt(6.0 / (input_dim + hidden_dim))
    bound2 = math.sqrt(6.0 / (hidden_dim + n_classes))
    return MLPModel(
        w1=rng.uniform(-bound1, bound1, (hidden_dim, input_dim)),
        b1=np.zeros(hidden_dim),
        w2=rng.uniform(-bound2, bound2, (n_classes, hidden_dim)),
        b2=np.zeros(n_classes),
    )


def _forward_parts(model: MLPModel, x: np.ndarray):
    pre = x @ model.w1.T + model.b1
    hidden = np.maximum(pre, 0.0)
    logits = hidden @ model.w2.T + model.b2
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    return probs, hidden, pre


def forward(model: MLPModel, x) -> np.ndarray:
    """Class probabilities for a batch of feature rows."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise InvalidArgumentError("input must be a 2-D batch matching the model input size")
    if not np.isfinite(x).all():
        raise InvalidArgumentError("input must be finite")
    probs, _, _ = _forward_parts(model, x)
    return probs


def loss_gradients(model: MLPModel, x: np.ndarray, y_onehot: np.ndarray, loss_fn):
    """Loss value and parameter gradients for one batch.

    The loss gradient with respect to the probabilities is pulled back
    through the softmax Jacobian and the ReLU mask analytically.
    """
    probs, hidden, pre = _forward_parts(model, x)
    if not np.isfinite(probs).all():
        raise DivergenceError("non-finite network output")
    result = loss_fn(PredictionBatch(y_onehot, probs))
    g = result.grad
    # d loss / d logits for a softmax row p: p * g - p * (p . g)
    dlogits = probs * g - probs * np.einsum("ij,ij->i", probs, g)[:, None]
    dw2 = dlogits.T @ hidden
    db2 = dlogits.sum(axis=0)
    dhidden = dlogits @ model.w2
    dpre = dhidden * (pre > 0.0)
    dw1 = dpre.T @ x
    db1 = dpre.sum(axis=0)
    grads = {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2}
    for name, arr in grads.items():
        if not np.isfinite(arr).all():
            raise DivergenceError(f"non-finite gradient for {name}")
    return result.value, grads


def train_step(model: MLPModel, x, y_onehot, loss_fn, learning_rate: float):
    """One SGD update; returns (updated model, batch loss value)."""
    value, grads = loss_gradients(model, x, y_onehot, loss_fn)
    new_params = {
        "w1": model.w1 - learning_rate * grads["w1"],
        "b1": model.b1 - learning_rate * grads["b1"],
        "w2": model.w2 - learning_rate * grads["w2"],
        "b2": model.b2 - learning_rate * grads["b2"],
    }
    for name, arr in new_params.items():
        if not np.isfinite(arr).all():
            raise DivergenceError(f"non-finite parameter {name} after update")
    return MLPModel(**new_params), value


def train(model: MLPModel, data: SplitDataset, config: TrainConfig) -> TrainTrace:
    """Train for the configured epochs, evaluating the test split after each.

    Batches are drawn from a fresh seeded shuffle every epoch; a final short
    batch is kept.  The recorded seconds cover the parameter updates of the
    epoch, not the evaluation pass.  On divergence the raised error carries
    the partial trace.
    """
    loss_fn = CLASSIFICATION_LOSSES[config.loss_name]
    losses._prime(config.loss_name)
    x_train = data.train.features
    y_train = metrics.one_hot(data.train.labels, model.n_classes)
    x_test = data.test.features
    y_test = data.test.labels
    n_train = x_train.shape[0]
    bs = config.batch_size

    rng = np.random.default_rng(config.seed)
    records: list[EpochRecord] = []
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(n_train)
        total = 0.0
        n_batches = 0
        for start in range(0, n_train, bs):
            idx = order[start:start + bs]
            try:
                model, value = train_step(model, x_train[idx], y_train[idx],
                                          loss_fn, config.learning_rate)
            except DivergenceError as err:
                raise DivergenceError(
                    f"epoch {epoch}, batch {start // bs}: {err}",
                    partial_trace=TrainTrace(tuple(records))) from None
            total += value
            n_batches += 1
        sec = time.perf_counter() - started

        report = metrics.evaluate(y_test, forward(model, x_test), model.n_classes)
        records.append(EpochRecord(
            epoch=epoch,
            train_loss=total / n_batches,
            acc=report.accuracy,
            f1_micro=report.f1_micro,
            f1_macro=report.f1_macro,
            pr_auc=report.pr_auc,
            cce=report.cce,
            mse=report.mse,
            sec=sec,
            pr_auc_macro=report.pr_auc_macro,
        ))
    return TrainTrace(tuple(records))
