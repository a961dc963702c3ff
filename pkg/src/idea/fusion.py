"""Training-free cache fusion.

The fused classifier blends two cache similarities (test feature against
the stored image rows Sim_I and against the stored caption rows Sim_T),
pushes the blend through a sharpened exponential, sums the result per
class, and adds the plain zero-shot scores:

    logits = beta * class_sum(exp(theta * (s - 1))) + prototypes @ test
    s      = (1 - alpha) * Sim_I + alpha * Sim_T

With beta = 0 the cache term vanishes and the output is exactly the
zero-shot scores, so the knob doubles as an ablation switch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedstore import FewShotCache, as_feature_matrix, as_feature_vector
from .errors import ShapeError, ValidationError
from .zeroshot import ZeroShotHead, zeroshot_logits, zeroshot_logits_batch


@dataclass(frozen=True)
class FusionConfig:
    """Scalar knobs of the fused classifier.

    alpha blends caption-cache similarity against image-cache similarity
    (0 = images only, 1 = captions only), beta scales the cache term
    relative to the zero-shot scores, and theta sharpens the activation.
    Defaults are the best settings from the hyperparameter sweep.
    """

    alpha: float = 0.5
    beta: float = 2.75
    theta: float = 2.0

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValidationError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.beta < 0.0:
            raise ValidationError(f"beta must be non-negative, got {self.beta}")
        if self.theta <= 0.0:
            raise ValidationError(f"theta must be positive, got {self.theta}")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "theta": self.theta}

    @classmethod
    def from_dict(cls, d: dict) -> "FusionConfig":
        base = cls()
        return cls(
            alpha=float(d.get("alpha", base.alpha)),
            beta=float(d.get("beta", base.beta)),
            theta=float(d.get("theta", base.theta)),
        )


@dataclass(frozen=True)
class SimilarityPair:
    """Cache similarities of one test feature: image rows and caption rows."""

    sim_image: np.ndarray
    sim_text: np.ndarray


def similarities(cache: FewShotCache, test) -> SimilarityPair:
    """Dot products of one test feature against every cache row (float64)."""
    t = as_feature_vector(test, cache.dim)
    return SimilarityPair(sim_image=cache.images64 @ t, sim_text=cache.texts64 @ t)


def activate(x, theta: float) -> np.ndarray:
    """Elementwise exp(theta * (x - 1)).

    Maps similarity 1 to 1 and decays sub-unit similarities toward zero;
    theta controls how sharply.
    """
    if theta <= 0.0:
        raise ValidationError(f"theta must be positive, got {theta}")
    return np.exp(theta * (np.asarray(x, dtype=np.float64) - 1.0))


def aggregate(x, n: int, k: int) -> np.ndarray:
    """Sum a class-major length-n*k vector into n per-class totals.

    Accepts any (..., n*k) array and reduces the last axis. Columns are
    added left to right so the result matches a per-class running sum
    exactly, independent of array size.
    """
    if n < 1 or k < 1:
        raise ShapeError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[-1] != n * k:
        raise ShapeError(f"last axis must have length {n * k}, got {arr.shape[-1]}")
    shaped = arr.reshape(arr.shape[:-1] + (n, k))
    out = shaped[..., 0].copy()
    for j in range(1, k):
        out += shaped[..., j]
    return out


def scores_from_sims(sim_image, sim_text, alpha: float, sim_proj=None, sim_bias=None) -> np.ndarray:
    """Blend cache similarities into pre-activation scores.

    The optional terms carry the trainable extensions: sim_proj is the
    caption similarity through the learned projection (scaled by alpha,
    alongside the plain caption term), sim_bias the per-row bias scores.
    Kept as one function so every caller blends in the same order.
    """
    s = (1.0 - alpha) * np.asarray(sim_image, dtype=np.float64) + alpha * np.asarray(
        sim_text, dtype=np.float64
    )
    if sim_proj is not None:
        s = s + alpha * sim_proj
    if sim_bias is not None:
        s = s + sim_bias
    return s


def combine_scores(scores, zero_shot, n: int, k: int, config: FusionConfig) -> np.ndarray:
    """Fused logits: beta-weighted class totals of activated scores, plus zero-shot."""
    return config.beta * aggregate(activate(scores, config.theta), n, k) + zero_shot


def _check_compat(cache: FewShotCache, head: ZeroShotHead) -> None:
    if cache.dim != head.dim:
        raise ShapeError(f"cache dim {cache.dim} != prototype dim {head.dim}")
    if cache.num_classes != head.num_classes:
        raise ShapeError(
            f"cache has {cache.num_classes} classes but head has {head.num_classes}"
        )


def idea_logits(cache: FewShotCache, head: ZeroShotHead, test, config: FusionConfig) -> np.ndarray:
    """Training-free fused logits for one test feature.

    Args:
        cache: class-major few-shot cache (images + captions).
        head: zero-shot prototype head over the same classes.
        test: unit-normalized feature vector of length cache.dim.
        config: fusion knobs.

    Returns:
        Float64 logits of length num_classes.
    """
    _check_compat(cache, head)
    sims = similarities(cache, test)
    s = scores_from_sims(sims.sim_image, sims.sim_text, config.alpha)
    return combine_scores(s, zeroshot_logits(head, test), cache.num_classes, cache.shots, config)


def idea_logits_batch(cache: FewShotCache, head: ZeroShotHead, tests, config: FusionConfig) -> np.ndarray:
    """Row-wise idea_logits for an (M, dim) block of test features."""
    _check_compat(cache, head)
    m = as_feature_matrix(tests, cache.dim)
    sim_image = m @ cache.images64.T
    sim_text = m @ cache.texts64.T
    s = scores_from_sims(sim_image, sim_text, config.alpha)
    return combine_scores(s, zeroshot_logits_batch(head, m), cache.num_classes, cache.shots, config)
