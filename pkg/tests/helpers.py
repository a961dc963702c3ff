"""Shared builders for random test fixtures."""
import numpy as np

from idea.embedstore import CacheManifest, EmbeddingMatrix, assemble_cache
from idea.zeroshot import ZeroShotHead


def unit_rows(arr):
    arr = np.asarray(arr, dtype=np.float64)
    return arr / np.linalg.norm(arr, axis=1, keepdims=True)


def make_manifest(n, k, d, dataset="synthetic", backbone="test-backbone", modality="image"):
    return CacheManifest(
        dataset_name=dataset,
        num_classes=n,
        shots=k,
        class_names=tuple(f"class{i}" for i in range(n)),
        backbone_tag=backbone,
        dim=d,
        modality=modality,
    )


def make_cache(images, texts, n, k):
    """Class-major cache from unit-norm float arrays, keeping values as given."""
    images = np.asarray(images)
    manifest = make_manifest(n, k, images.shape[1])
    return assemble_cache(
        EmbeddingMatrix(images, normalized=True),
        EmbeddingMatrix(np.asarray(texts), normalized=True),
        manifest,
        np.repeat(np.arange(n), k),
    )


def make_head(prototypes, n):
    return ZeroShotHead(
        prototypes=EmbeddingMatrix(np.asarray(prototypes), normalized=True),
        class_names=tuple(f"class{i}" for i in range(n)),
    )


def random_instance(rng, n, k, d):
    """Random unit-row cache + head. Returns (cache, head)."""
    images = unit_rows(rng.normal(size=(n * k, d)))
    texts = unit_rows(rng.normal(size=(n * k, d)))
    protos = unit_rows(rng.normal(size=(n, d)))
    return make_cache(images, texts, n, k), make_head(protos, n)


def random_unit_vector(rng, d):
    v = rng.normal(size=d)
    return v / np.linalg.norm(v)
