"""Embedding storage: the EMB1 binary format, manifests, few-shot caches.

Feature matrices are stored on disk as row-major 32-bit floats and
normalized once at ingestion; everything downstream assumes unit rows and
never renormalizes. Few-shot caches keep their rows class-major (the K
samples of class i occupy rows i*K .. i*K+K-1), which is the layout the
class aggregation step relies on. Similarity math upcasts to float64; the
32-bit width applies to storage only.
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    CardinalityError,
    DegenerateRowError,
    FormatError,
    LabelError,
    ShapeError,
    ValidationError,
)

MAGIC = b"EMB1"
FORMAT_VERSION = 1

## Header layout (little-endian): magic, version u32, rows u64, dim u64,
## normalized u8, then 7 reserved zero bytes. Payload starts at byte 32.
_HEADER = struct.Struct("<4sIQQB7s")
HEADER_SIZE = _HEADER.size

_OFFSET_MAGIC = 0
_OFFSET_VERSION = 4
_OFFSET_ROWS = 8
_OFFSET_DIM = 16
_OFFSET_NORMALIZED = 24
_OFFSET_RESERVED = 25
PAYLOAD_OFFSET = HEADER_SIZE

UNIT_NORM_TOL = 1e-4  # declared-normalized rows must be this close to unit norm
ZERO_ROW_EPS = 1e-12  # rows at or below this norm cannot be normalized

ROW_ORDER_CLASS_MAJOR = "class-major"
MODALITIES = ("image", "text", "class-prototype", "test")


def atomic_write_bytes(path: Path | str, payload: bytes) -> None:
    """Write via a sibling temp file and rename, so readers never see partial output."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def atomic_write_text(path: Path | str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def as_feature_vector(x, dim: int | None = None) -> np.ndarray:
    """Coerce to a 1-D float64 vector, checking the length when dim is given."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ShapeError(f"expected a non-empty 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ShapeError(f"expected a vector of length {dim}, got {arr.shape[0]}")
    return arr


def as_feature_matrix(x, dim: int | None = None) -> np.ndarray:
    """Coerce to a 2-D float64 matrix, checking the column count when dim is given."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ShapeError(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise ShapeError(f"expected {dim} columns, got {arr.shape[1]}")
    return arr


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Immutable (rows, dim) block of float32 feature rows.

    Args:
        data: any 2-D array-like; copied and stored as C-contiguous float32.
        normalized: declares that every row has unit L2 norm. Checked at
            construction within ``UNIT_NORM_TOL``.
    """

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float32, order="C", copy=True)
        if data.ndim != 2:
            raise ValidationError(f"embedding data must be 2-D, got shape {data.shape}")
        rows, dim = data.shape
        if rows < 1 or dim < 1:
            raise ValidationError(f"embedding data must be at least 1x1, got {rows}x{dim}")
        if not np.all(np.isfinite(data)):
            bad = int(np.flatnonzero(~np.isfinite(data))[0])
            raise ValidationError(
                f"embedding data contains a non-finite value at row {bad // dim}, column {bad % dim}"
            )
        if self.normalized:
            norms = np.linalg.norm(data.astype(np.float64), axis=1)
            drift = float(np.max(np.abs(norms - 1.0)))
            if drift > UNIT_NORM_TOL:
                worst = int(np.argmax(np.abs(norms - 1.0)))
                raise ValidationError(
                    f"matrix declared normalized but row {worst} has norm {norms[worst]:.6f}"
                )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])

    @cached_property
    def data64(self) -> np.ndarray:
        """Float64 copy used for similarity accumulation."""
        out = self.data.astype(np.float64)
        out.setflags(write=False)
        return out


def load_embeddings(path: Path | str) -> EmbeddingMatrix:
    """Read one EMB1 file.

    Raises:
        FormatError: on bad magic, unsupported version, zero rows or dim,
            truncated or oversized payload, or non-finite payload values.
            The error names the byte offset of the offending field.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < HEADER_SIZE:
        raise FormatError(path, len(raw), f"truncated header, need {HEADER_SIZE} bytes, file has {len(raw)}")
    magic, version, rows, dim, norm_flag, reserved = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(path, _OFFSET_MAGIC, f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(path, _OFFSET_VERSION, f"unsupported format version {version}")
    if rows == 0:
        raise FormatError(path, _OFFSET_ROWS, "row count must be at least 1")
    if dim == 0:
        raise FormatError(path, _OFFSET_DIM, "dimension must be at least 1")
    if norm_flag not in (0, 1):
        raise FormatError(path, _OFFSET_NORMALIZED, f"normalized flag must be 0 or 1, got {norm_flag}")
    if reserved != b"\x00" * 7:
        raise FormatError(path, _OFFSET_RESERVED, "reserved header bytes must be zero")
    expected = rows * dim * 4
    payload = raw[HEADER_SIZE:]
    if len(payload) < expected:
        raise FormatError(
            path,
            HEADER_SIZE + len(payload),
            f"truncated payload, expected {expected} bytes after the header, got {len(payload)}",
        )
    if len(payload) > expected:
        raise FormatError(
            path,
            HEADER_SIZE + expected,
            f"trailing data, expected exactly {expected} payload bytes, got {len(payload)}",
        )
    flat = np.frombuffer(payload, dtype="<f4")
    finite = np.isfinite(flat)
    if not finite.all():
        bad = int(np.flatnonzero(~finite)[0])
        raise FormatError(path, HEADER_SIZE + bad * 4, f"non-finite value at element {bad}")
    data = flat.reshape(rows, dim)
    return EmbeddingMatrix(data=data, normalized=bool(norm_flag))


def save_embeddings(matrix: EmbeddingMatrix, path: Path | str) -> None:
    """Write one EMB1 file atomically. Round-trips bit-exactly through load."""
    if not np.all(np.isfinite(matrix.data)):
        raise ValidationError("refusing to write a matrix with non-finite values")
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION, matrix.rows, matrix.dim, 1 if matrix.normalized else 0, b"\x00" * 7
    )
    payload = matrix.data.astype("<f4", copy=False).tobytes(order="C")
    atomic_write_bytes(Path(path), header + payload)


def l2_normalize_rows(matrix: EmbeddingMatrix) -> EmbeddingMatrix:
    """Scale every row to unit L2 norm.

    Raises:
        DegenerateRowError: naming the first row whose norm is <= 1e-12.
    """
    data = matrix.data64
    norms = np.linalg.norm(data, axis=1)
    small = norms <= ZERO_ROW_EPS
    if small.any():
        row = int(np.flatnonzero(small)[0])
        raise DegenerateRowError(row, float(norms[row]))
    return EmbeddingMatrix(data=(data / norms[:, None]).astype(np.float32), normalized=True)


@dataclass(frozen=True)
class CacheManifest:
    """Sidecar metadata describing one embedding file or cache.

    ``row_order`` is always class-major; ``modality`` tags what the rows
    are (image features, caption features, class prototypes, or test
    features). ``shots`` is 0 for files without a per-class budget.
    """

    dataset_name: str
    num_classes: int
    shots: int
    class_names: tuple[str, ...]
    backbone_tag: str
    dim: int
    modality: str
    row_order: str = ROW_ORDER_CLASS_MAJOR

    def __post_init__(self):
        names = tuple(str(n) for n in self.class_names)
        object.__setattr__(self, "class_names", names)
        if self.num_classes < 1:
            raise ValidationError("num_classes must be at least 1")
        if self.shots < 0:
            raise ValidationError("shots must be non-negative")
        if self.dim < 1:
            raise ValidationError("dim must be at least 1")
        if len(names) != self.num_classes:
            raise ValidationError(
                f"expected {self.num_classes} class names, got {len(names)}"
            )
        if len(set(names)) != len(names):
            raise ValidationError("class names must be distinct")
        if self.row_order != ROW_ORDER_CLASS_MAJOR:
            raise ValidationError(f"unsupported row order {self.row_order!r}")
        if self.modality not in MODALITIES:
            raise ValidationError(f"modality must be one of {MODALITIES}, got {self.modality!r}")

    def to_dict(self) -> dict:
        return {
            "dataset_name": self.dataset_name,
            "num_classes": self.num_classes,
            "shots": self.shots,
            "class_names": list(self.class_names),
            "backbone_tag": self.backbone_tag,
            "dim": self.dim,
            "row_order": self.row_order,
            "modality": self.modality,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CacheManifest":
        required = (
            "dataset_name", "num_classes", "shots", "class_names",
            "backbone_tag", "dim", "row_order", "modality",
        )
        missing = [key for key in required if key not in d]
        if missing:
            raise ValidationError(f"manifest is missing fields: {', '.join(missing)}")
        return cls(
            dataset_name=str(d["dataset_name"]),
            num_classes=int(d["num_classes"]),
            shots=int(d["shots"]),
            class_names=tuple(d["class_names"]),
            backbone_tag=str(d["backbone_tag"]),
            dim=int(d["dim"]),
            modality=str(d["modality"]),
            row_order=str(d["row_order"]),
        )


def load_manifest(path: Path | str) -> CacheManifest:
    with open(path, "r", encoding="utf-8") as fh:
        return CacheManifest.from_dict(json.load(fh))


def save_manifest(manifest: CacheManifest, path: Path | str) -> None:
    atomic_write_text(path, json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n")


@dataclass(frozen=True)
class FewShotCache:
    """Paired image and caption features for N classes x K shots.

    Rows are class-major and both matrices are unit-normalized; ``labels``
    is the implied [0,0,..,1,1,..] pattern and is validated against it.
    """

    manifest: CacheManifest
    images: EmbeddingMatrix
    texts: EmbeddingMatrix
    labels: np.ndarray

    def __post_init__(self):
        n, k = self.manifest.num_classes, self.manifest.shots
        if k < 1:
            raise ValidationError("a few-shot cache needs shots >= 1")
        expected_rows = n * k
        if self.images.rows != expected_rows or self.texts.rows != expected_rows:
            raise ShapeError(
                f"cache matrices must have {expected_rows} rows "
                f"(got images={self.images.rows}, texts={self.texts.rows})"
            )
        if self.images.dim != self.texts.dim or self.images.dim != self.manifest.dim:
            raise ShapeError(
                f"dimension mismatch: images={self.images.dim}, texts={self.texts.dim}, "
                f"manifest={self.manifest.dim}"
            )
        if not (self.images.normalized and self.texts.normalized):
            raise ValidationError("cache matrices must be normalized")
        labels = np.asarray(self.labels, dtype=np.int64).copy()
        if not np.array_equal(labels, np.repeat(np.arange(n), k)):
            raise ValidationError("cache labels must be class-major: K rows per class, in class order")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def num_classes(self) -> int:
        return self.manifest.num_classes

    @property
    def shots(self) -> int:
        return self.manifest.shots

    @property
    def dim(self) -> int:
        return self.manifest.dim

    @property
    def images64(self) -> np.ndarray:
        return self.images.data64

    @property
    def texts64(self) -> np.ndarray:
        return self.texts.data64


def assemble_cache(
    images: EmbeddingMatrix,
    texts: EmbeddingMatrix,
    manifest: CacheManifest,
    labels: Sequence[int] | np.ndarray,
) -> FewShotCache:
    """Reorder paired image/caption rows into a class-major few-shot cache.

    The permutation is stable: within a class, rows keep their input order.
    Rows are normalized here if the inputs were not already.

    Raises:
        LabelError: a label falls outside [0, num_classes).
        CardinalityError: some class does not have exactly ``shots`` rows.
        ShapeError: row counts or dimensions disagree.
    """
    n, k = manifest.num_classes, manifest.shots
    if k < 1:
        raise ValidationError("manifest.shots must be >= 1 to assemble a cache")
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ShapeError(f"labels must be 1-D, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise LabelError(f"labels must be integers, got dtype {labels.dtype}")
    if images.rows != texts.rows:
        raise ShapeError(f"images have {images.rows} rows but texts have {texts.rows}")
    if images.dim != texts.dim:
        raise ShapeError(f"images have dim {images.dim} but texts have dim {texts.dim}")
    if labels.shape[0] != n * k:
        raise ShapeError(f"expected {n * k} labels for {n} classes x {k} shots, got {labels.shape[0]}")
    if images.rows != n * k:
        raise ShapeError(f"expected {n * k} rows, got {images.rows}")
    out_of_range = (labels < 0) | (labels >= n)
    if out_of_range.any():
        bad = int(np.flatnonzero(out_of_range)[0])
        raise LabelError(f"label {int(labels[bad])} at row {bad} is outside [0, {n})")
    counts = np.bincount(labels, minlength=n)
    if np.any(counts != k):
        cls = int(np.flatnonzero(counts != k)[0])
        raise CardinalityError(
            f"class {cls} ({manifest.class_names[cls]!r}) has {int(counts[cls])} rows, expected {k}"
        )
    order = np.argsort(labels, kind="stable")
    img = EmbeddingMatrix(images.data[order], normalized=images.normalized)
    txt = EmbeddingMatrix(texts.data[order], normalized=texts.normalized)
    if not img.normalized:
        img = l2_normalize_rows(img)
    if not txt.normalized:
        txt = l2_normalize_rows(txt)
    return FewShotCache(manifest=manifest, images=img, texts=txt, labels=labels[order])
