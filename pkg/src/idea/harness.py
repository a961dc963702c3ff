"""End-to-end experiment harness.

Feeds EMB1 feature files through shot sampling, cache assembly, optional
grid search and training, and test-set evaluation, producing a JSON
report. Reports are written with sorted keys and atomic renames; two runs
of the same config differ only in the timing field.

Labels travel next to each EMB1 file as a JSON array of integers, one per
row. Relative paths inside a config file resolve against the file's
directory.
"""
from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .embedstore import (
    CacheManifest,
    FewShotCache,
    assemble_cache,
    atomic_write_text,
    EmbeddingMatrix,
    load_embeddings,
    load_manifest,
)
from .errors import (
    CardinalityError,
    InputError,
    LabelError,
    ShapeError,
    StageError,
    ValidationError,
)
from .fusion import FusionConfig, idea_logits_batch
from .hypersearch import GridSpec, grid_search
from .trainable import TrainConfig, train, tidea_logits_batch
from .zeroshot import ZeroShotHead, classify_batch, zeroshot_logits_batch

MODES = ("zeroshot", "idea", "tidea")


def load_labels(path: Path | str) -> np.ndarray:
    """Read a JSON array of integer labels, one per embedding row."""
    with open(path, "r", encoding="utf-8") as fh:
        values = json.load(fh)
    if not isinstance(values, list) or not values:
        raise ValidationError(f"{path}: labels must be a non-empty JSON array")
    arr = np.asarray(values)
    if not np.issubdtype(arr.dtype, np.integer):
        raise LabelError(f"{path}: labels must all be integers")
    return arr.astype(np.int64)


def save_labels(labels, path: Path | str) -> None:
    arr = np.asarray(labels, dtype=np.int64)
    atomic_write_text(path, json.dumps([int(v) for v in arr]) + "\n")


@dataclass(frozen=True)
class ExperimentPaths:
    """Input file locations. Fields a mode does not use may stay None."""

    manifest: Path
    prototypes: Path
    test_images: Path
    test_labels: Path
    train_images: Path | None = None
    train_labels: Path | None = None
    train_captions: Path | None = None
    val_images: Path | None = None
    val_labels: Path | None = None

    def to_dict(self) -> dict:
        return {
            name: (str(value) if value is not None else None)
            for name, value in self.__dict__.items()
        }

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "ExperimentPaths":
        def resolve(key: str, required: bool) -> Path | None:
            value = d.get(key)
            if value is None:
                if required:
                    raise ValidationError(f"config paths are missing required entry {key!r}")
                return None
            p = Path(value)
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            return p

        return cls(
            manifest=resolve("manifest", True),
            prototypes=resolve("prototypes", True),
            test_images=resolve("test_images", True),
            test_labels=resolve("test_labels", True),
            train_images=resolve("train_images", False),
            train_labels=resolve("train_labels", False),
            train_captions=resolve("train_captions", False),
            val_images=resolve("val_images", False),
            val_labels=resolve("val_labels", False),
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: mode, sampling seed, knobs, and input locations."""

    mode: str
    paths: ExperimentPaths
    shots: int = 16
    seed: int = 0
    fusion: FusionConfig = field(default_factory=FusionConfig)
    train: TrainConfig | None = None
    enable_proj: bool = True
    enable_bias: bool = True
    search: GridSpec | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.shots < 1:
            raise ValidationError(f"shots must be at least 1, got {self.shots}")
        if self.mode == "tidea" and self.train is None:
            raise ValidationError("mode 'tidea' requires a train config")

    def echo_dict(self) -> dict:
        return {
            "mode": self.mode,
            "shots": self.shots,
            "seed": self.seed,
            "fusion": self.fusion.to_dict(),
            "train": self.train.to_dict() if self.train is not None else None,
            "enable_proj": self.enable_proj,
            "enable_bias": self.enable_bias,
            "search": self.search.to_dict() if self.search is not None else None,
            "paths": self.paths.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        if "mode" not in d:
            raise ValidationError("config is missing 'mode'")
        if "paths" not in d:
            raise ValidationError("config is missing 'paths'")
        train_dict = d.get("train")
        search_dict = d.get("search")
        return cls(
            mode=str(d["mode"]),
            paths=ExperimentPaths.from_dict(d["paths"], base_dir),
            shots=int(d.get("shots", 16)),
            seed=int(d.get("seed", 0)),
            fusion=FusionConfig.from_dict(d.get("fusion", {})),
            train=TrainConfig.from_dict(train_dict) if train_dict is not None else None,
            enable_proj=bool(d.get("enable_proj", True)),
            enable_bias=bool(d.get("enable_bias", True)),
            search=GridSpec.from_dict(search_dict) if search_dict is not None else None,
        )

    @classmethod
    def from_file(cls, path: Path | str) -> "ExperimentConfig":
        path = Path(path)
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return cls.from_dict(data, base_dir=path.parent)


@dataclass
class EvalReport:
    """Evaluation result plus enough context to reproduce it."""

    top1_accuracy: float
    per_class_accuracy: list[float]
    config: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    dataset_name: str = ""
    backbone_tag: str = ""
    tool_version: str = __version__
    details: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "top1_accuracy": self.top1_accuracy,
            "per_class_accuracy": self.per_class_accuracy,
            "config": self.config,
            "timing": self.timing,
            "dataset_name": self.dataset_name,
            "backbone_tag": self.backbone_tag,
            "tool_version": self.tool_version,
            "details": self.details,
        }


def report_json(report: EvalReport) -> str:
    """Canonical JSON for a report: sorted keys, newline-terminated."""
    return json.dumps(report.to_json_dict(), sort_keys=True, indent=2) + "\n"


def write_report(report: EvalReport, path: Path | str) -> None:
    atomic_write_text(path, report_json(report))


def sample_shots(labels, k: int, seed: int) -> np.ndarray:
    """Pick k row indices per class, uniformly without replacement.

    Output is class-major and keeps each class's rows in their original
    split order, so downstream cache assembly is stable. Deterministic per
    seed; the sampling stream is independent of any training seed.
    """
    if k < 1:
        raise InputError(f"k must be at least 1, got {k}")
    arr = np.asarray(labels)
    if arr.ndim != 1 or arr.size == 0:
        raise ShapeError(f"labels must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise LabelError(f"labels must be integers, got dtype {arr.dtype}")
    if arr.min() < 0:
        raise LabelError(f"labels must be non-negative, found {int(arr.min())}")
    num_classes = int(arr.max()) + 1
    rng = np.random.default_rng(seed)
    picks = []
    for cls in range(num_classes):
        pool = np.flatnonzero(arr == cls)
        if pool.size < k:
            raise CardinalityError(f"class {cls} has {pool.size} samples, need at least {k}")
        chosen = rng.choice(pool, size=k, replace=False)
        chosen.sort()
        picks.append(chosen)
    return np.concatenate(picks)


def evaluate(logits, labels) -> EvalReport:
    """Top-1 and per-class accuracy for an (M, N) logits block.

    Classes absent from ``labels`` get per-class accuracy 0.0.
    """
    arr = np.asarray(logits, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ShapeError(f"logits must be a non-empty 2-D matrix, got shape {arr.shape}")
    y = np.asarray(labels)
    if y.ndim != 1 or y.shape[0] != arr.shape[0]:
        raise ShapeError(f"labels must be 1-D with {arr.shape[0]} entries, got shape {y.shape}")
    num_classes = arr.shape[1]
    bad = (y < 0) | (y >= num_classes)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise LabelError(f"label {int(y[idx])} at position {idx} is outside [0, {num_classes})")
    preds = classify_batch(arr)
    correct = int(np.sum(preds == y))
    per_class = []
    for cls in range(num_classes):
        mask = y == cls
        if mask.any():
            per_class.append(float(np.sum(preds[mask] == cls) / np.sum(mask)))
        else:
            per_class.append(0.0)
    return EvalReport(top1_accuracy=correct / y.shape[0], per_class_accuracy=per_class)


@contextmanager
def _stage(name: str):
    """Tag any failure inside the block with the pipeline stage it came from."""
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


@dataclass
class ExperimentContext:
    """Loaded inputs shared by the harness and the CLI subcommands."""

    manifest: CacheManifest
    head: ZeroShotHead
    test_features: EmbeddingMatrix
    test_labels: np.ndarray
    cache: FewShotCache | None = None
    val_features: EmbeddingMatrix | None = None
    val_labels: np.ndarray | None = None


def build_context(config: ExperimentConfig, need_cache: bool, need_val: bool) -> ExperimentContext:
    """Load and validate every input file an experiment needs."""
    paths = config.paths
    with _stage("load-manifest"):
        manifest = load_manifest(paths.manifest)
    with _stage("load-prototypes"):
        prototypes = load_embeddings(paths.prototypes)
        head = ZeroShotHead(prototypes=prototypes, class_names=manifest.class_names)
    with _stage("load-test"):
        test_features = load_embeddings(paths.test_images)
        test_labels = load_labels(paths.test_labels)
        if test_labels.shape[0] != test_features.rows:
            raise ShapeError(
                f"{test_features.rows} test rows but {test_labels.shape[0]} labels"
            )
    ctx = ExperimentContext(
        manifest=manifest, head=head, test_features=test_features, test_labels=test_labels
    )
    if need_cache:
        for key in ("train_images", "train_labels", "train_captions"):
            if getattr(paths, key) is None:
                raise StageError("load-train", ValidationError(f"config paths are missing {key!r}"))
        with _stage("load-train"):
            train_features = load_embeddings(paths.train_images)
            train_labels = load_labels(paths.train_labels)
            captions = load_embeddings(paths.train_captions)
            if train_labels.shape[0] != train_features.rows:
                raise ShapeError(
                    f"{train_features.rows} train rows but {train_labels.shape[0]} labels"
                )
            if captions.rows != train_features.rows:
                raise ShapeError(
                    f"{train_features.rows} train rows but {captions.rows} caption rows"
                )
        with _stage("sample-shots"):
            indices = sample_shots(train_labels, config.shots, config.seed)
        with _stage("assemble-cache"):
            cache_manifest = CacheManifest(
                dataset_name=manifest.dataset_name,
                num_classes=manifest.num_classes,
                shots=config.shots,
                class_names=manifest.class_names,
                backbone_tag=manifest.backbone_tag,
                dim=manifest.dim,
                modality="image",
            )
            ctx.cache = assemble_cache(
                EmbeddingMatrix(train_features.data[indices], normalized=train_features.normalized),
                EmbeddingMatrix(captions.data[indices], normalized=captions.normalized),
                cache_manifest,
                train_labels[indices],
            )
    if need_val:
        if paths.val_images is None or paths.val_labels is None:
            raise StageError(
                "load-val", ValidationError("config paths need val_images and val_labels")
            )
        with _stage("load-val"):
            ctx.val_features = load_embeddings(paths.val_images)
            ctx.val_labels = load_labels(paths.val_labels)
            if ctx.val_labels.shape[0] != ctx.val_features.rows:
                raise ShapeError(
                    f"{ctx.val_features.rows} val rows but {ctx.val_labels.shape[0]} labels"
                )
    return ctx


def run_experiment(config: ExperimentConfig) -> EvalReport:
    """Execute one experiment end to end and return its report.

    zeroshot mode touches only the prototypes and the test split. idea
    samples shots and assembles the cache. tidea additionally trains on
    the sampled cache features, checkpointing by validation accuracy.
    When a search grid is configured, grid search on the validation split
    picks the fusion knobs before evaluation (and before training).
    """
    start = time.perf_counter()
    need_cache = config.mode != "zeroshot"
    need_val = config.mode == "tidea" or config.search is not None
    if config.mode == "zeroshot":
        need_val = False
    ctx = build_context(config, need_cache=need_cache, need_val=need_val)

    chosen = config.fusion
    details: dict = {}
    if need_cache and config.search is not None:
        with _stage("grid-search"):
            chosen, table = grid_search(
                ctx.cache, ctx.head, ctx.val_features.data64, ctx.val_labels, config.search
            )
            details["search"] = {"best": chosen.to_dict(), "evaluated": len(table)}

    state = None
    if config.mode == "tidea":
        with _stage("train"):
            state, history = train(
                ctx.cache,
                ctx.head,
                ctx.cache.images64,
                ctx.cache.labels,
                ctx.val_features.data64,
                ctx.val_labels,
                chosen,
                config.train,
                enable_proj=config.enable_proj,
                enable_bias=config.enable_bias,
            )
            details["train"] = {
                "history": [[loss, acc] for loss, acc in history],
                "best_val_accuracy": max((acc for _, acc in history), default=None),
            }

    with _stage("evaluate"):
        tests = ctx.test_features.data64
        if config.mode == "zeroshot":
            logits = zeroshot_logits_batch(ctx.head, tests)
        elif config.mode == "idea":
            logits = idea_logits_batch(ctx.cache, ctx.head, tests, chosen)
        else:
            logits = tidea_logits_batch(ctx.cache, ctx.head, state, tests, chosen)
        report = evaluate(logits, ctx.test_labels)

    details["fusion"] = chosen.to_dict()
    report.config = config.echo_dict()
    report.details = details
    report.dataset_name = ctx.manifest.dataset_name
    report.backbone_tag = ctx.manifest.backbone_tag
    report.timing = {"total_seconds": time.perf_counter() - start}
    return report
