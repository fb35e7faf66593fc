"""Classification metrics for imbalanced multi-class evaluation.

Accuracy, per-class F1 with micro and macro averaging, and micro-averaged
one-vs-rest PR-AUC.  Undefined 0/0 precision or recall is taken as 0, and
tied scores are grouped when walking the PR curve, so every quantity is
deterministic.  For single-label problems micro-F1 coincides with accuracy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import losses
from .errors import InvalidArgumentError, UndefinedMetricError


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[i, j] = number of samples with true class i predicted as class j."""

    counts: np.ndarray


@dataclass(frozen=True)
class MetricsReport:
    """Every evaluation quantity tracked per epoch during training."""

    accuracy: float
    f1_micro: float
    f1_macro: float
    pr_auc: float
    pr_auc_macro: float
    cce: float
    mse: float


def one_hot(labels, n_classes: int) -> np.ndarray:
    """Encode integer labels as one-hot rows."""
    lab = np.asarray(labels)
    if lab.ndim != 1 or lab.size == 0:
        raise InvalidArgumentError("labels must be a non-empty 1-D array")
    if (lab < 0).any() or (lab >= n_classes).any():
        raise InvalidArgumentError(f"labels must lie in [0, {n_classes})")
    out = np.zeros((lab.size, n_classes))
    out[np.arange(lab.size), lab] = 1.0
    return out


def _check_labels_probs(y_true, y_prob):
    lab = np.asarray(y_true)
    prob = np.asarray(y_prob, dtype=np.float64)
    if lab.ndim != 1 or lab.size == 0:
        raise InvalidArgumentError("y_true must be a non-empty 1-D label array")
    if prob.ndim != 2 or prob.shape[0] != lab.size:
        raise InvalidArgumentError("y_pred must be a probability matrix matching y_true")
    return lab, prob


def accuracy(y_true, y_prob) -> float:
    """Fraction of rows whose argmax matches the label.

    Ties resolve to the lowest class index.
    """
    lab, prob = _check_labels_probs(y_true, y_prob)
    return float(np.mean(np.argmax(prob, axis=1) == lab))


def confusion_matrix(y_true, y_pred, n_classes: int | None = None) -> ConfusionMatrix:
    """Confusion counts from true and predicted label vectors."""
    yt = np.asarray(y_true)
    yp = np.asarray(y_pred)
    if yt.ndim != 1 or yt.shape != yp.shape or yt.size == 0:
        raise InvalidArgumentError("label vectors must be non-empty and equal length")
    if n_classes is None:
        n_classes = int(max(yt.max(), yp.max())) + 1
    counts = np.bincount(yt * n_classes + yp, minlength=n_classes * n_classes)
    return ConfusionMatrix(counts.reshape(n_classes, n_classes))


def f1_scores(y_true, y_pred, n_classes: int | None = None):
    """(micro, macro) F1 over predicted labels.

    Per class: precision = TP / (TP + FP), recall = TP / (TP + FN) with
    0/0 = 0.  Macro averages per-class F1 over all classes; micro pools the
    counts, which for single-label prediction equals accuracy.
    """
    cm = confusion_matrix(y_true, y_pred, n_classes).counts
    tp = np.diagonal(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp

    denom = 2.0 * tp + fp + fn
    per_class = np.divide(2.0 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    macro = float(per_class.mean())

    pooled = 2.0 * tp.sum() + fp.sum() + fn.sum()
    micro = float(2.0 * tp.sum() / pooled) if pooled > 0 else 0.0
    return micro, macro


def _average_precision(scores: np.ndarray, positives: np.ndarray) -> float:
    """Step-interpolated area under the PR curve with tied scores grouped."""
    total_pos = positives.sum()
    if total_pos == 0:
        raise UndefinedMetricError("PR-AUC undefined without positive labels")
    order = np.argsort(-scores, kind="stable")
    hits = positives[order]
    sorted_scores = scores[order]
    boundary = np.empty(scores.size, dtype=bool)
    boundary[:-1] = sorted_scores[:-1] != sorted_scores[1:]
    boundary[-1] = True
    tp = np.cumsum(hits)[boundary]
    predicted = np.arange(1, scores.size + 1)[boundary]
    precision = tp / predicted
    recall = tp / total_pos
    return float(np.sum(precision * np.diff(recall, prepend=0.0)))


def pr_auc(y_true, y_prob) -> float:
    """Micro-averaged one-vs-rest PR-AUC.

    Every (sample, class) pair contributes one score with a binary label
    taken from the one-hot ``y_true``; the pooled pairs form a single
    precision-recall curve.  Invariant under strictly monotone rescaling of
    the scores.
    """
    yt = np.asarray(y_true, dtype=np.float64)
    prob = np.asarray(y_prob, dtype=np.float64)
    if yt.ndim != 2 or yt.shape != prob.shape or yt.size == 0:
        raise InvalidArgumentError("y_true and y_pred must be equal-shape 2-D arrays")
    return _average_precision(prob.ravel(), yt.ravel())


def pr_auc_macro(y_true, y_prob) -> float:
    """Mean per-class PR-AUC over classes that have at least one positive."""
    yt = np.asarray(y_true, dtype=np.float64)
    prob = np.asarray(y_prob, dtype=np.float64)
    if yt.ndim != 2 or yt.shape != prob.shape or yt.size == 0:
        raise InvalidArgumentError("y_true and y_pred must be equal-shape 2-D arrays")
    values = []
    for c in range(yt.shape[1]):
        if yt[:, c].sum() > 0:
            values.append(_average_precision(prob[:, c], yt[:, c]))
    if not values:
        raise UndefinedMetricError("PR-AUC undefined without positive labels")
    return float(np.mean(values))


def evaluate(y_true, y_prob, n_classes: int) -> MetricsReport:
    """Full evaluation of probability predictions against integer labels."""
    lab, prob = _check_labels_probs(y_true, y_prob)
    onehot = one_hot(lab, n_classes)
    pred_labels = np.argmax(prob, axis=1)
    micro, macro = f1_scores(lab, pred_labels, n_classes)
    batch = losses.PredictionBatch(onehot, prob)
    return MetricsReport(
        accuracy=accuracy(lab, prob),
        f1_micro=micro,
        f1_macro=macro,
        pr_auc=pr_auc(onehot, prob),
        pr_auc_macro=pr_auc_macro(onehot, prob),
        cce=losses.cce_loss(batch).value,
        mse=losses.mse_loss(batch).value,
    )
