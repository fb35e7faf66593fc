"""Loss functions built on the point-cloud invariants, plus baselines.

The two headline losses treat the batch of prediction errors
``y_true - y_pred`` together with an appended zero vector as a point cloud
and charge the model for the cloud's effective cardinality:

    magnitude_loss = magnitude({errors} with 0 appended) - 1
    spread_loss    = spread({errors} with 0 appended) - 1

Near-identical error vectors are collapsed first (set semantics), so
repeating the same mistake costs no more than making it once.  Both losses
are zero exactly when every error is within the dedup tolerance of zero,
and both reduce to tanh(d / 2) for a single error of norm d.

Cross-entropy and mean squared error baselines use the same result type so
the training loop can treat all four interchangeably.  The contrastive
variants used for the division experiments operate on triplets of
(anchor, positive, negative) embeddings instead of class probabilities.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import InvalidArgumentError
from .invariants import (
    DEDUP_TOL,
    _MAGNITUDE,
    _SPREAD,
    _STATUS_OK,
    _fast_invariant,
    _greedy_groups,
    _magnitude_core,
    _prepared_distances,
    _spread_core,
)

_CLAMP = 1e-7


@dataclass(frozen=True)
class PredictionBatch:
    """One-hot targets paired with probability predictions, both b x n.

    ``validate=False`` skips the simplex checks; finite-difference harnesses
    need it because coordinate perturbations leave the probability simplex.
    """

    y_true: np.ndarray
    y_pred: np.ndarray
    validate: bool = True

    def __post_init__(self):
        yt = np.asarray(self.y_true, dtype=np.float64)
        yp = np.asarray(self.y_pred, dtype=np.float64)
        if yt.ndim != 2 or yt.shape != yp.shape or yt.shape[0] < 1:
            raise InvalidArgumentError("y_true and y_pred must be equal-shape 2-D arrays")
        if self.validate:
            if not (np.isfinite(yt).all() and np.isfinite(yp).all()):
                raise InvalidArgumentError("batch entries must be finite")
            if not np.logical_or(yt == 0.0, yt == 1.0).all() or not (yt.sum(axis=1) == 1.0).all():
                raise InvalidArgumentError("y_true rows must be one-hot")
            if (yp < 0.0).any() or (yp > 1.0).any():
                raise InvalidArgumentError("y_pred entries must lie in [0, 1]")
            if np.abs(yp.sum(axis=1) - 1.0).max() > 1e-6:
                raise InvalidArgumentError("y_pred rows must sum to 1 within 1e-6")
        object.__setattr__(self, "y_true", yt)
        object.__setattr__(self, "y_pred", yp)

    @property
    def batch_size(self) -> int:
        return self.y_true.shape[0]

    @property
    def n_classes(self) -> int:
        return self.y_true.shape[1]


@dataclass(frozen=True)
class LossResult:
    """A scalar loss value with its gradient d value / d y_pred (b x n)."""

    value: float
    grad: np.ndarray


@dataclass(frozen=True)
class TripletBatch:
    """Raw inputs and embeddings for a batch of (anchor, positive, negative) triplets."""

    anchor_inputs: np.ndarray
    negative_inputs: np.ndarray
    anchor_emb: np.ndarray
    positive_emb: np.ndarray
    negative_emb: np.ndarray
    temperature: float = 1.0

    def __post_init__(self):
        arrays = {}
        for name in ("anchor_inputs", "negative_inputs", "anchor_emb",
                     "positive_emb", "negative_emb"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            if a.ndim != 2 or not np.isfinite(a).all():
                raise InvalidArgumentError(f"{name} must be a finite 2-D array")
            arrays[name] = a
            object.__setattr__(self, name, a)
        b = arrays["anchor_emb"].shape[0]
        if any(a.shape[0] != b for a in arrays.values()) or b < 1:
            raise InvalidArgumentError("all triplet arrays must share one batch size")
        if arrays["positive_emb"].shape != arrays["anchor_emb"].shape or \
                arrays["negative_emb"].shape != arrays["anchor_emb"].shape:
            raise InvalidArgumentError("embedding arrays must share one shape")
        if arrays["negative_inputs"].shape != arrays["anchor_inputs"].shape:
            raise InvalidArgumentError("input arrays must share one shape")
        if not self.temperature > 0:
            raise InvalidArgumentError("temperature must be positive")

    @property
    def batch_size(self) -> int:
        return self.anchor_emb.shape[0]


@dataclass(frozen=True)
class TripletLossResult:
    """Loss value with gradients for each of the three embedding matrices."""

    value: float
    grad_anchor: np.ndarray
    grad_positive: np.ndarray
    grad_negative: np.ndarray


def _setlike_loss(errors: np.ndarray, mode: int):
    """Shared plumbing for the magnitude and spread losses.

    Appends the zero vector, collapses near-duplicates, evaluates the
    invariant at scale 1 and spreads each group's gradient evenly over its
    members.  The appended zero is constant, so its share is discarded.
    The compiled kernel handles the whole evaluation; if its solve is not
    accepted the numpy implementation reruns it with the full solver chain.
    """
    b = errors.shape[0]
    pts = np.vstack((errors, np.zeros((1, errors.shape[1]))))
    status, value, grads = _fast_invariant(pts, 1.0, DEDUP_TOL, mode, True)
    if status == _STATUS_OK:
        return value - 1.0, -grads[:b]
    core = _magnitude_core if mode == _MAGNITUDE else _spread_core
    d = _prepared_distances(pts)
    if float(d.min()) > DEDUP_TOL:
        value, grads = core(pts, d, 1.0)
        return value - 1.0, -grads[:b]
    reps, mults, group = _greedy_groups(d, DEDUP_TOL)
    sub = np.ix_(reps, reps)
    value, rep_grads = core(pts[reps], d[sub], 1.0)
    member_grads = rep_grads[group] / mults[group][:, None]
    return value - 1.0, -member_grads[:b]


def magnitude_loss(batch: PredictionBatch) -> LossResult:
    """Magnitude of the deduplicated errors with 0 appended, minus 1.

    Lies in [0, batch_size]; the gradient reaches y_pred through
    d error / d y_pred = -identity, with merged duplicates sharing their
    group gradient equally.
    """
    value, grad = _setlike_loss(batch.y_true - batch.y_pred, _MAGNITUDE)
    return LossResult(value, grad)


def spread_loss(batch: PredictionBatch) -> LossResult:
    """Spread of the deduplicated errors with 0 appended, minus 1."""
    value, grad = _setlike_loss(batch.y_true - batch.y_pred, _SPREAD)
    return LossResult(value, grad)


def cce_loss(batch: PredictionBatch) -> LossResult:
    """Mean categorical cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7]."""
    b = batch.batch_size
    true_idx = np.argmax(batch.y_true, axis=1)
    rows = np.arange(b)
    p_raw = batch.y_pred[rows, true_idx]
    p = np.clip(p_raw, _CLAMP, 1.0 - _CLAMP)
    value = float(-np.log(p).mean())
    grad = np.zeros_like(batch.y_pred)
    interior = (p_raw > _CLAMP) & (p_raw < 1.0 - _CLAMP)
    grad[rows[interior], true_idx[interior]] = -1.0 / (b * p[interior])
    return LossResult(value, grad)


def mse_loss(batch: PredictionBatch) -> LossResult:
    """Mean squared error averaged over every entry of the batch."""
    diff = batch.y_pred - batch.y_true
    count = diff.size
    value = float((diff * diff).sum() / count)
    return LossResult(value, (2.0 / count) * diff)


def welsch_leclerc(y_true, y_pred) -> float:
    """Robust error 1 - exp(-0.5 * ||y_true - y_pred||^2) for a single pair.

    Reference point for single-prediction comparisons; not wired into training.
    """
    yt = np.asarray(y_true, dtype=np.float64).ravel()
    yp = np.asarray(y_pred, dtype=np.float64).ravel()
    if yt.shape != yp.shape or yt.size == 0:
        raise InvalidArgumentError("y_true and y_pred must be equal-length vectors")
    if not (np.isfinite(yt).all() and np.isfinite(yp).all()):
        raise InvalidArgumentError("inputs must be finite")
    diff = yt - yp
    return float(1.0 - np.exp(-0.5 * float(diff @ diff)))


def contrastive_base_loss(batch: TripletBatch) -> TripletLossResult:
    """Mean log(1 + exp(-(a.p - a.n) / temperature)) over the triplet batch.

    The anchor/positive and anchor/negative products are reduced by
    summation, i.e. plain dot products per triplet.
    """
    a = batch.anchor_emb
    diff = batch.positive_emb - batch.negative_emb
    u = np.einsum("ij,ij->i", a, diff)
    tau = batch.temperature
    b = batch.batch_size
    value = float(np.logaddexp(0.0, -u / tau).mean())
    coef = (-expit(-u / tau) / (b * tau))[:, None]
    return TripletLossResult(
        value=value,
        grad_anchor=coef * diff,
        grad_positive=coef * a,
        grad_negative=-coef * a,
    )


def _division_loss(batch: TripletBatch, base: TripletLossResult, core,
                   use_embeddings: bool) -> TripletLossResult:
    """Divide a base loss by the invariant of the anchor-minus-negative set.

    The divisor set is deduplicated but gets no appended zero and no minus
    one.  With ``use_embeddings`` the set is built from embedding differences
    and the quotient rule routes gradient through the divisor as well;
    by default the raw input differences are used and the divisor is a
    constant with respect to the trainable embeddings.
    """
    if use_embeddings:
        diffs = batch.anchor_emb - batch.negative_emb
    else:
        diffs = batch.anchor_inputs - batch.negative_inputs
    d = _prepared_distances(diffs)
    if float(d.min()) > DEDUP_TOL:
        reps = np.arange(diffs.shape[0])
        mults = np.ones(diffs.shape[0], dtype=np.intp)
        group = reps
        d_sub = d
    else:
        reps, mults, group = _greedy_groups(d, DEDUP_TOL)
        d_sub = d[np.ix_(reps, reps)]

    if not use_embeddings:
        divisor, _ = core(diffs[reps], d_sub, 1.0, want_grad=False)
        value = base.value / divisor
        return TripletLossResult(
            value=value,
            grad_anchor=base.grad_anchor / divisor,
            grad_positive=base.grad_positive / divisor,
            grad_negative=base.grad_negative / divisor,
        )

    divisor, rep_grads = core(diffs[reps], d_sub, 1.0)
    member = rep_grads[group] / mults[group][:, None]
    value = base.value / divisor
    return TripletLossResult(
        value=value,
        grad_anchor=(base.grad_anchor - value * member) / divisor,
        grad_positive=base.grad_positive / divisor,
        grad_negative=(base.grad_negative + value * member) / divisor,
    )


def division_magnitude_loss(batch: TripletBatch, base: TripletLossResult,
                            use_embeddings: bool = False) -> TripletLossResult:
    """Contrastive base loss divided by the magnitude of the difference set."""
    return _division_loss(batch, base, _magnitude_core, use_embeddings)


def division_spread_loss(batch: TripletBatch, base: TripletLossResult,
                         use_embeddings: bool = False) -> TripletLossResult:
    """Contrastive base loss divided by the spread of the difference set."""
    return _division_loss(batch, base, _spread_core, use_embeddings)


def _prime(loss_name: str) -> None:
    """Trigger lazy kernel compilation outside any timed region."""
    if loss_name in ("magnitude", "spread"):
        pts = np.array([[0.5, 0.5], [0.0, 1.0]])
        _fast_invariant(pts, 1.0, DEDUP_TOL, _MAGNITUDE, True)
        _fast_invariant(pts, 1.0, DEDUP_TOL, _SPREAD, True)


#: Classification losses selectable by name in training configs and the CLI.
CLASSIFICATION_LOSSES = {
    "magnitude": magnitude_loss,
    "spread": spread_loss,
    "cce": cce_loss,
    "mse": mse_loss,
}
