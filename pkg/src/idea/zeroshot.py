"""Zero-shot classification against class-prototype embeddings."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedstore import EmbeddingMatrix, as_feature_matrix, as_feature_vector
from .errors import ShapeError, ValidationError


@dataclass(frozen=True)
class ZeroShotHead:
    """One unit-normalized prototype row per class, plus the class names."""

    prototypes: EmbeddingMatrix
    class_names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(str(n) for n in self.class_names)
        object.__setattr__(self, "class_names", names)
        if not self.prototypes.normalized:
            raise ValidationError("prototype rows must be unit-normalized")
        if self.prototypes.rows != len(names):
            raise ValidationError(
                f"{self.prototypes.rows} prototype rows but {len(names)} class names"
            )
        if len(set(names)) != len(names):
            raise ValidationError("class names must be distinct")

    @property
    def num_classes(self) -> int:
        return self.prototypes.rows

    @property
    def dim(self) -> int:
        return self.prototypes.dim


def zeroshot_logits(head: ZeroShotHead, test) -> np.ndarray:
    """Dot product of one test feature against every class prototype.

    Returns a float64 vector of length num_classes. For unit-norm inputs
    each entry is the cosine similarity, so values lie in [-1, 1] up to
    float rounding.
    """
    t = as_feature_vector(test, head.dim)
    return head.prototypes.data64 @ t


def zeroshot_logits_batch(head: ZeroShotHead, tests) -> np.ndarray:
    """Row-wise zeroshot_logits for an (M, dim) block of test features."""
    m = as_feature_matrix(tests, head.dim)
    return m @ head.prototypes.data64.T


def classify(logits) -> int:
    """Index of the highest logit; ties resolve to the lowest index."""
    arr = np.asarray(logits, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ShapeError(f"expected a non-empty 1-D logits vector, got shape {arr.shape}")
    return int(np.argmax(arr))


def classify_batch(logits) -> np.ndarray:
    """Row-wise classify for an (M, N) logits matrix."""
    arr = np.asarray(logits, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ShapeError(f"expected a non-empty 2-D logits matrix, got shape {arr.shape}")
    return np.argmax(arr, axis=1)
