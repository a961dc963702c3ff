"""Trainable extension of the fused classifier.

Two zero-initialized parameter blocks refine the cache scores: a square
projection ``w_proj`` applied to the test feature before it meets the
caption rows (added alongside the unprojected caption term, so the
training-free behavior is the starting point, not replaced), and a
per-cache-row bias ``e_bias`` scored against the test feature:

    s = (1-a)*Sim_I + a*(T @ w_proj @ x + T @ x) + e_bias @ x
    logits = beta * class_sum(exp(theta*(s-1))) + prototypes @ x

Both blocks start at zero, so an untrained state reproduces the
training-free logits. Either block can be disabled for ablations.
Training is plain SGD on mean cross-entropy with analytic gradients.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .embedstore import (
    EmbeddingMatrix,
    FewShotCache,
    as_feature_matrix,
    as_feature_vector,
    atomic_write_text,
    load_embeddings,
    save_embeddings,
)
from .errors import (
    CorruptStateError,
    DivergenceError,
    InputError,
    LabelError,
    ShapeError,
    ValidationError,
)
from .fusion import FusionConfig, activate, aggregate, combine_scores, scores_from_sims, _check_compat
from .zeroshot import ZeroShotHead, classify_batch, zeroshot_logits, zeroshot_logits_batch

LR_SCHEDULES = ("cosine", "constant")


@dataclass(frozen=True)
class TrainableState:
    """Learned parameters: (dim, dim) projection and (rows, dim) bias block."""

    w_proj: np.ndarray
    e_bias: np.ndarray
    enable_proj: bool = True
    enable_bias: bool = True

    def __post_init__(self):
        w = np.asarray(self.w_proj, dtype=np.float64)
        e = np.asarray(self.e_bias, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ShapeError(f"w_proj must be square, got shape {w.shape}")
        if e.ndim != 2:
            raise ShapeError(f"e_bias must be 2-D, got shape {e.shape}")
        if e.shape[1] != w.shape[0]:
            raise ShapeError(
                f"e_bias columns ({e.shape[1]}) must match w_proj dimension ({w.shape[0]})"
            )
        w = w.copy()
        e = e.copy()
        w.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "w_proj", w)
        object.__setattr__(self, "e_bias", e)

    @classmethod
    def zeros(
        cls, cache_rows: int, dim: int, enable_proj: bool = True, enable_bias: bool = True
    ) -> "TrainableState":
        return cls(
            w_proj=np.zeros((dim, dim)),
            e_bias=np.zeros((cache_rows, dim)),
            enable_proj=enable_proj,
            enable_bias=enable_bias,
        )

    @property
    def dim(self) -> int:
        return int(self.w_proj.shape[0])

    @property
    def cache_rows(self) -> int:
        return int(self.e_bias.shape[0])

    def require_finite(self) -> None:
        if not (np.all(np.isfinite(self.w_proj)) and np.all(np.isfinite(self.e_bias))):
            raise CorruptStateError("trainable state contains non-finite values")


@dataclass(frozen=True)
class TrainConfig:
    """SGD settings. Defaults: lr 5e-4, 50 epochs, batch 256, cosine decay.

    learning_rate 0 is allowed and makes training a recorded no-op, which
    keeps ablation sweeps uniform. Momentum and weight decay are available
    but default to off.
    """

    learning_rate: float = 5e-4
    epochs: int = 50
    batch_size: int = 256
    seed: int = 0
    lr_schedule: str = "cosine"
    momentum: float = 0.0
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.learning_rate < 0.0:
            raise ValidationError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be at least 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ValidationError(f"lr_schedule must be one of {LR_SCHEDULES}, got {self.lr_schedule!r}")
        if self.momentum < 0.0 or self.weight_decay < 0.0:
            raise ValidationError("momentum and weight_decay must be non-negative")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "lr_schedule": self.lr_schedule,
            "momentum": self.momentum,
            "weight_decay": self.weight_decay,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        base = cls()
        return cls(
            learning_rate=float(d.get("learning_rate", base.learning_rate)),
            epochs=int(d.get("epochs", base.epochs)),
            batch_size=int(d.get("batch_size", base.batch_size)),
            seed=int(d.get("seed", base.seed)),
            lr_schedule=str(d.get("lr_schedule", base.lr_schedule)),
            momentum=float(d.get("momentum", base.momentum)),
            weight_decay=float(d.get("weight_decay", base.weight_decay)),
        )


def _check_state(cache: FewShotCache, state: TrainableState) -> None:
    if state.dim != cache.dim:
        raise ShapeError(f"state dim {state.dim} != cache dim {cache.dim}")
    if state.cache_rows != cache.images.rows:
        raise ShapeError(
            f"e_bias has {state.cache_rows} rows but the cache has {cache.images.rows}"
        )


def _state_sims_batch(cache: FewShotCache, state: TrainableState, feats: np.ndarray):
    """Projection and bias similarity blocks for an (M, dim) batch, or None when disabled."""
    sim_proj = feats @ (cache.texts64 @ state.w_proj).T if state.enable_proj else None
    sim_bias = feats @ state.e_bias.T if state.enable_bias else None
    return sim_proj, sim_bias


def tidea_logits(
    cache: FewShotCache, head: ZeroShotHead, state: TrainableState, test, config: FusionConfig
) -> np.ndarray:
    """Fused logits for one test feature with the trainable terms applied.

    With zero parameters (or both blocks disabled) this reproduces the
    training-free logits for the same inputs.
    """
    _check_compat(cache, head)
    _check_state(cache, state)
    state.require_finite()
    t = as_feature_vector(test, cache.dim)
    sim_image = cache.images64 @ t
    sim_text = cache.texts64 @ t
    sim_proj = (cache.texts64 @ state.w_proj) @ t if state.enable_proj else None
    sim_bias = state.e_bias @ t if state.enable_bias else None
    s = scores_from_sims(sim_image, sim_text, config.alpha, sim_proj, sim_bias)
    return combine_scores(s, zeroshot_logits(head, t), cache.num_classes, cache.shots, config)


def tidea_logits_batch(
    cache: FewShotCache, head: ZeroShotHead, state: TrainableState, tests, config: FusionConfig
) -> np.ndarray:
    """Row-wise tidea_logits for an (M, dim) block of test features."""
    _check_compat(cache, head)
    _check_state(cache, state)
    state.require_finite()
    feats = as_feature_matrix(tests, cache.dim)
    _, fs, logits = _forward_batch(cache, head, state, feats, config)
    return logits


def _forward_batch(
    cache: FewShotCache,
    head: ZeroShotHead,
    state: TrainableState,
    feats: np.ndarray,
    config: FusionConfig,
):
    """Shared forward pass: returns (scores, activated scores, logits)."""
    sim_image = feats @ cache.images64.T
    sim_text = feats @ cache.texts64.T
    sim_proj, sim_bias = _state_sims_batch(cache, state, feats)
    s = scores_from_sims(sim_image, sim_text, config.alpha, sim_proj, sim_bias)
    fs = activate(s, config.theta)
    logits = config.beta * aggregate(fs, cache.num_classes, cache.shots) + zeroshot_logits_batch(head, feats)
    return s, fs, logits


def _validate_labels(labels, num_classes: int, batch_rows: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1 or y.shape[0] != batch_rows:
        raise ShapeError(f"labels must be 1-D with {batch_rows} entries, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        raise LabelError(f"labels must be integers, got dtype {y.dtype}")
    bad = (y < 0) | (y >= num_classes)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise LabelError(f"label {int(y[idx])} at position {idx} is outside [0, {num_classes})")
    return y.astype(np.int64)


def loss_and_grads(
    cache: FewShotCache,
    head: ZeroShotHead,
    state: TrainableState,
    batch,
    labels,
    config: FusionConfig,
):
    """Mean cross-entropy over a batch and its analytic parameter gradients.

    Args:
        batch: (M, dim) test features.
        labels: M integer class labels.

    Returns:
        (loss, grad_w, grad_e). Gradients for a disabled block are zero
        matrices of the block's shape.
    """
    _check_compat(cache, head)
    _check_state(cache, state)
    state.require_finite()
    feats = as_feature_matrix(batch, cache.dim)
    m = feats.shape[0]
    y = _validate_labels(labels, cache.num_classes, m)

    _, fs, logits = _forward_batch(cache, head, state, feats, config)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    loss = -float(log_probs[np.arange(m), y].mean())
    if not math.isfinite(loss):
        raise DivergenceError(f"loss is non-finite ({loss})")

    # d(loss)/d(logits): (softmax - onehot) / batch size.
    dlogits = np.exp(log_probs)
    dlogits[np.arange(m), y] -= 1.0
    dlogits /= m
    # Chain through the class sum and the activation: each cache row r of
    # class i contributes beta * theta * f(s_r) * dlogits[:, i].
    coeff = np.repeat(dlogits, cache.shots, axis=1) * (config.beta * config.theta * fs)
    if state.enable_proj:
        grad_w = config.alpha * (cache.texts64.T @ (coeff.T @ feats))
    else:
        grad_w = np.zeros_like(state.w_proj)
    grad_e = coeff.T @ feats if state.enable_bias else np.zeros_like(state.e_bias)
    return loss, grad_w, grad_e


def sgd_step(state: TrainableState, grads, step_lr: float) -> TrainableState:
    """One gradient step, applied only to enabled blocks. Returns a new state."""
    grad_w, grad_e = grads
    if step_lr < 0.0:
        raise ValidationError(f"step_lr must be non-negative, got {step_lr}")
    grad_w = np.asarray(grad_w, dtype=np.float64)
    grad_e = np.asarray(grad_e, dtype=np.float64)
    if grad_w.shape != state.w_proj.shape or grad_e.shape != state.e_bias.shape:
        raise ShapeError(
            f"gradient shapes {grad_w.shape}/{grad_e.shape} do not match state "
            f"{state.w_proj.shape}/{state.e_bias.shape}"
        )
    w = state.w_proj - step_lr * grad_w if state.enable_proj else state.w_proj
    e = state.e_bias - step_lr * grad_e if state.enable_bias else state.e_bias
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(e))):
        raise DivergenceError("parameter update produced non-finite values")
    return replace(state, w_proj=w, e_bias=e)


def _step_lr(tc: TrainConfig, step: int, total_steps: int) -> float:
    if tc.lr_schedule == "constant":
        return tc.learning_rate
    return tc.learning_rate * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))


def train(
    cache: FewShotCache,
    head: ZeroShotHead,
    train_features,
    train_labels,
    val_features,
    val_labels,
    fusion: FusionConfig,
    tc: TrainConfig,
    enable_proj: bool = True,
    enable_bias: bool = True,
):
    """SGD-train the adapter from zero init, keeping the best-validation epoch.

    Batches are drawn with a seeded per-epoch shuffle; runs with the same
    seed are bit-identical. Validation accuracy is measured after every
    epoch and the earliest best state wins ties.

    Returns:
        (best_state, history) where history has one (train_loss,
        val_accuracy) pair per epoch. With both blocks disabled the run is
        a no-op: zero state, empty history.
    """
    state = TrainableState.zeros(cache.images.rows, cache.dim, enable_proj, enable_bias)
    if not (enable_proj or enable_bias):
        return state, []
    feats_arr = np.asarray(train_features, dtype=np.float64)
    if feats_arr.ndim != 2 or feats_arr.shape[0] == 0:
        raise InputError(f"training features must be a non-empty 2-D block, got shape {feats_arr.shape}")
    feats = as_feature_matrix(feats_arr, cache.dim)
    m = feats.shape[0]
    y = _validate_labels(train_labels, cache.num_classes, m)
    val = as_feature_matrix(val_features, cache.dim)
    val_y = _validate_labels(val_labels, cache.num_classes, val.shape[0])

    rng = np.random.default_rng(tc.seed)
    steps_per_epoch = math.ceil(m / tc.batch_size)
    total_steps = tc.epochs * steps_per_epoch
    velocity_w = np.zeros_like(state.w_proj)
    velocity_e = np.zeros_like(state.e_bias)
    history: list[tuple[float, float]] = []
    best_state, best_acc = state, -1.0
    step = 0
    for _ in range(tc.epochs):
        perm = rng.permutation(m)
        epoch_losses = []
        for start in range(0, m, tc.batch_size):
            idx = perm[start : start + tc.batch_size]
            loss, grad_w, grad_e = loss_and_grads(cache, head, state, feats[idx], y[idx], fusion)
            if tc.weight_decay > 0.0:
                grad_w = grad_w + tc.weight_decay * state.w_proj
                grad_e = grad_e + tc.weight_decay * state.e_bias
            if tc.momentum > 0.0:
                velocity_w = tc.momentum * velocity_w + grad_w
                velocity_e = tc.momentum * velocity_e + grad_e
                grad_w, grad_e = velocity_w, velocity_e
            state = sgd_step(state, (grad_w, grad_e), _step_lr(tc, step, total_steps))
            epoch_losses.append(loss)
            step += 1
        preds = classify_batch(tidea_logits_batch(cache, head, state, val, fusion))
        val_acc = float(np.mean(preds == val_y))
        history.append((float(np.mean(epoch_losses)), val_acc))
        if val_acc > best_acc:
            best_acc, best_state = val_acc, state
    return best_state, history


def save_checkpoint(
    state: TrainableState,
    prefix: Path | str,
    fusion: FusionConfig,
    tc: TrainConfig,
    epoch: int,
    val_accuracy: float,
) -> None:
    """Write <prefix>.wproj.emb, <prefix>.ebias.emb and a <prefix>.json sidecar.

    Parameter blocks are stored as float32, matching the embedding format.
    """
    prefix = Path(prefix)
    save_embeddings(EmbeddingMatrix(state.w_proj.astype(np.float32)), _part(prefix, "wproj.emb"))
    save_embeddings(EmbeddingMatrix(state.e_bias.astype(np.float32)), _part(prefix, "ebias.emb"))
    sidecar = {
        "fusion": fusion.to_dict(),
        "train": tc.to_dict(),
        "epoch": int(epoch),
        "val_accuracy": float(val_accuracy),
        "enable_proj": state.enable_proj,
        "enable_bias": state.enable_bias,
    }
    atomic_write_text(_part(prefix, "json"), json.dumps(sidecar, sort_keys=True, indent=2) + "\n")


def _part(prefix: Path, suffix: str) -> Path:
    return prefix.parent / f"{prefix.name}.{suffix}"


def load_checkpoint(prefix: Path | str) -> tuple[TrainableState, dict]:
    """Read a checkpoint written by save_checkpoint. Returns (state, sidecar dict)."""
    prefix = Path(prefix)
    with open(_part(prefix, "json"), "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    w = load_embeddings(_part(prefix, "wproj.emb"))
    e = load_embeddings(_part(prefix, "ebias.emb"))
    state = TrainableState(
        w_proj=w.data64,
        e_bias=e.data64,
        enable_proj=bool(sidecar.get("enable_proj", True)),
        enable_bias=bool(sidecar.get("enable_bias", True)),
    )
    return state, sidecar
