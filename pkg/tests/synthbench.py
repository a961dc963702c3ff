"""Seeded synthetic benchmark: Gaussian class clusters on the unit sphere.

Image and caption features are noisy copies of per-class center
directions; prototypes are noisier copies, so the zero-shot head is
mediocre and the cache genuinely helps. ``caption_misalign`` optionally
pulls every caption toward the next class's center, creating a
systematic text-side defect that the trainable terms can learn to
undo. Everything is driven by one numpy Generator, so a given seed
always produces the same files.
"""
from dataclasses import dataclass
from pathlib import Path
import json

import numpy as np

from idea.embedstore import EmbeddingMatrix, assemble_cache, save_embeddings, save_manifest
from idea.harness import sample_shots, save_labels
from helpers import make_head, make_manifest, unit_rows


@dataclass
class Benchmark:
    centers: np.ndarray
    train_x: np.ndarray
    train_y: np.ndarray
    captions: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    prototypes: np.ndarray
    n_classes: int
    dim: int


def make_benchmark(
    seed=0,
    n_classes=10,
    dim=32,
    train_per_class=20,
    val_per_class=20,
    test_per_class=50,
    sigma_image=0.15,
    sigma_caption=0.18,
    sigma_proto=0.30,
    caption_misalign=0.0,
):
    rng = np.random.default_rng(seed)
    centers = unit_rows(rng.normal(size=(n_classes, dim)))

    def cluster(count, sigma):
        feats, labels = [], []
        for c in range(n_classes):
            feats.append(centers[c] + sigma * rng.normal(size=(count, dim)))
            labels.extend([c] * count)
        return unit_rows(np.concatenate(feats)), np.asarray(labels, dtype=np.int64)

    train_x, train_y = cluster(train_per_class, sigma_image)
    caption_dirs = centers[train_y]
    if caption_misalign > 0.0:
        caption_dirs = caption_dirs + caption_misalign * centers[(train_y + 1) % n_classes]
    captions = unit_rows(caption_dirs + sigma_caption * rng.normal(size=train_x.shape))
    val_x, val_y = cluster(val_per_class, sigma_image)
    test_x, test_y = cluster(test_per_class, sigma_image)
    prototypes = unit_rows(centers + sigma_proto * rng.normal(size=(n_classes, dim)))
    return Benchmark(
        centers=centers,
        train_x=train_x,
        train_y=train_y,
        captions=captions,
        val_x=val_x,
        val_y=val_y,
        test_x=test_x,
        test_y=test_y,
        prototypes=prototypes,
        n_classes=n_classes,
        dim=dim,
    )


def benchmark_instance(bench: Benchmark, shots=16, seed=0):
    """Sample a class-major cache and head from an in-memory benchmark."""
    idx = sample_shots(bench.train_y, shots, seed)
    manifest = make_manifest(bench.n_classes, shots, bench.dim, dataset="synthetic-clusters")
    cache = assemble_cache(
        EmbeddingMatrix(bench.train_x[idx], normalized=True),
        EmbeddingMatrix(bench.captions[idx], normalized=True),
        manifest,
        bench.train_y[idx],
    )
    return cache, make_head(bench.prototypes, bench.n_classes)


def write_benchmark(bench: Benchmark, directory: Path) -> dict:
    """Write the benchmark as EMB1 + labels + manifest files. Returns the paths dict."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = make_manifest(bench.n_classes, 0, bench.dim, dataset="synthetic-clusters")
    save_manifest(manifest, directory / "manifest.json")

    def emit(name, rows):
        save_embeddings(EmbeddingMatrix(rows, normalized=True), directory / name)

    emit("prototypes.emb", bench.prototypes)
    emit("train_images.emb", bench.train_x)
    emit("train_captions.emb", bench.captions)
    emit("val_images.emb", bench.val_x)
    emit("test_images.emb", bench.test_x)
    save_labels(bench.train_y, directory / "train_labels.json")
    save_labels(bench.val_y, directory / "val_labels.json")
    save_labels(bench.test_y, directory / "test_labels.json")
    return {
        "manifest": "manifest.json",
        "prototypes": "prototypes.emb",
        "train_images": "train_images.emb",
        "train_labels": "train_labels.json",
        "train_captions": "train_captions.emb",
        "val_images": "val_images.emb",
        "val_labels": "val_labels.json",
        "test_images": "test_images.emb",
        "test_labels": "test_labels.json",
    }


def write_config(directory: Path, paths: dict, mode="idea", **overrides) -> Path:
    """Write an experiment config JSON next to the benchmark files."""
    directory = Path(directory)
    config = {"mode": mode, "shots": 16, "seed": 0, "paths": paths}
    if mode == "tidea" and "train" not in overrides:
        config["train"] = {}
    config.update(overrides)
    path = directory / f"config_{mode}.json"
    path.write_text(json.dumps(config, indent=2))
    return path
