"""Few-shot image classification from precomputed embeddings.

A training-free cache adapter and its trainable extension over a frozen
vision-language backbone, operating entirely on embedding matrices: no
model weights, no GPU, no image decoding. See the README for the file
formats and the CLI.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    CardinalityError,
    CorruptStateError,
    DegenerateRowError,
    DivergenceError,
    FormatError,
    IdeaError,
    InputError,
    LabelError,
    ShapeError,
    StageError,
    ValidationError,
)
from .embedstore import (
    CacheManifest,
    EmbeddingMatrix,
    FewShotCache,
    assemble_cache,
    l2_normalize_rows,
    load_embeddings,
    load_manifest,
    save_embeddings,
    save_manifest,
)
from .zeroshot import ZeroShotHead, classify, classify_batch, zeroshot_logits, zeroshot_logits_batch
from .fusion import (
    FusionConfig,
    SimilarityPair,
    activate,
    aggregate,
    idea_logits,
    idea_logits_batch,
    similarities,
)
from .trainable import (
    TrainConfig,
    TrainableState,
    load_checkpoint,
    loss_and_grads,
    save_checkpoint,
    sgd_step,
    tidea_logits,
    tidea_logits_batch,
    train,
)
from .hypersearch import GridSpec, SweepEntry, coordinate_sweep, grid_search
from .harness import (
    EvalReport,
    ExperimentConfig,
    ExperimentPaths,
    evaluate,
    load_labels,
    run_experiment,
    sample_shots,
    save_labels,
    write_report,
)

__all__ = [
    "__version__",
    # errors
    "IdeaError", "ValidationError", "FormatError", "ShapeError", "DegenerateRowError",
    "CardinalityError", "LabelError", "CorruptStateError", "DivergenceError", "InputError",
    "StageError",
    # embedding store
    "EmbeddingMatrix", "CacheManifest", "FewShotCache", "load_embeddings", "save_embeddings",
    "l2_normalize_rows", "assemble_cache", "load_manifest", "save_manifest",
    # zero-shot
    "ZeroShotHead", "zeroshot_logits", "zeroshot_logits_batch", "classify", "classify_batch",
    # training-free fusion
    "FusionConfig", "SimilarityPair", "similarities", "activate", "aggregate",
    "idea_logits", "idea_logits_batch",
    # trainable
    "TrainableState", "TrainConfig", "tidea_logits", "tidea_logits_batch", "loss_and_grads",
    "sgd_step", "train", "save_checkpoint", "load_checkpoint",
    # search
    "GridSpec", "SweepEntry", "grid_search", "coordinate_sweep",
    # harness
    "ExperimentConfig", "ExperimentPaths", "EvalReport", "sample_shots", "evaluate",
    "run_experiment", "load_labels", "save_labels", "write_report",
]
