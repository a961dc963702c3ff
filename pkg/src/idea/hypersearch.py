"""Validation-set search over the fusion knobs.

Cache and prototype similarities are computed once per search; each
candidate config only re-runs the cheap blend/activate/sum step. Two
modes: the full Cartesian product over the grid, and a coordinate sweep
that varies one knob at a time around a base config (one table row per
grid value, handy for reading off each knob's sensitivity).
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from itertools import product
from pathlib import Path

import numpy as np

from .embedstore import FewShotCache, as_feature_matrix, atomic_write_text
from .errors import InputError, ShapeError, ValidationError
from .fusion import FusionConfig, combine_scores, scores_from_sims
from .trainable import TrainableState, _state_sims_batch
from .zeroshot import ZeroShotHead, classify_batch, zeroshot_logits_batch

## Default grids, matching the published sweep. alpha 0 and 1 isolate the
## image and caption caches; beta 0 degenerates to pure zero-shot.
DEFAULT_ALPHAS = (0.0, 0.2, 0.4, 0.5, 0.8, 1.0)
DEFAULT_BETAS = (0.0, 1.0, 2.0, 2.5, 2.75, 3.0)
DEFAULT_THETAS = (0.5, 1.0, 1.5, 2.0, 3.0, 3.5)

SWEEP_PARAMETERS = ("alpha", "beta", "theta")


@dataclass(frozen=True)
class GridSpec:
    """Candidate values per knob. Every list must be non-empty and in range."""

    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    betas: tuple[float, ...] = DEFAULT_BETAS
    thetas: tuple[float, ...] = DEFAULT_THETAS

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        betas = tuple(float(b) for b in self.betas)
        thetas = tuple(float(t) for t in self.thetas)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "thetas", thetas)
        if not alphas or not betas or not thetas:
            raise InputError("every grid axis needs at least one value")
        if any(not (0.0 <= a <= 1.0) for a in alphas):
            raise ValidationError("alpha grid values must lie in [0, 1]")
        if any(b < 0.0 for b in betas):
            raise ValidationError("beta grid values must be non-negative")
        if any(t <= 0.0 for t in thetas):
            raise ValidationError("theta grid values must be positive")

    @property
    def size(self) -> int:
        return len(self.alphas) * len(self.betas) * len(self.thetas)

    def to_dict(self) -> dict:
        return {"alphas": list(self.alphas), "betas": list(self.betas), "thetas": list(self.thetas)}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(
            alphas=tuple(d.get("alphas", DEFAULT_ALPHAS)),
            betas=tuple(d.get("betas", DEFAULT_BETAS)),
            thetas=tuple(d.get("thetas", DEFAULT_THETAS)),
        )


@dataclass(frozen=True)
class SweepEntry:
    """One coordinate-sweep row: which knob moved, its value, the accuracy."""

    parameter: str
    value: float
    config: FusionConfig
    accuracy: float


@dataclass(frozen=True)
class _Precomputed:
    sim_image: np.ndarray
    sim_text: np.ndarray
    sim_proj: np.ndarray | None
    sim_bias: np.ndarray | None
    zero_shot: np.ndarray
    labels: np.ndarray
    num_classes: int
    shots: int


def _precompute(
    cache: FewShotCache,
    head: ZeroShotHead,
    val_features,
    val_labels,
    state: TrainableState | None,
) -> _Precomputed:
    feats = as_feature_matrix(val_features, cache.dim)
    labels = np.asarray(val_labels)
    if labels.ndim != 1 or labels.shape[0] != feats.shape[0]:
        raise ShapeError(
            f"validation labels must be 1-D with {feats.shape[0]} entries, got shape {labels.shape}"
        )
    sim_proj, sim_bias = (None, None) if state is None else _state_sims_batch(cache, state, feats)
    return _Precomputed(
        sim_image=feats @ cache.images64.T,
        sim_text=feats @ cache.texts64.T,
        sim_proj=sim_proj,
        sim_bias=sim_bias,
        zero_shot=zeroshot_logits_batch(head, feats),
        labels=labels,
        num_classes=cache.num_classes,
        shots=cache.shots,
    )


def _accuracy(pre: _Precomputed, config: FusionConfig) -> float:
    s = scores_from_sims(pre.sim_image, pre.sim_text, config.alpha, pre.sim_proj, pre.sim_bias)
    logits = combine_scores(s, pre.zero_shot, pre.num_classes, pre.shots, config)
    return float(np.mean(classify_batch(logits) == pre.labels))


def grid_search(
    cache: FewShotCache,
    head: ZeroShotHead,
    val_features,
    val_labels,
    grid: GridSpec | None = None,
    state: TrainableState | None = None,
):
    """Evaluate every grid config on the validation set.

    Returns:
        (best, table): the winning config, and the full (config, accuracy)
        table sorted by accuracy descending. Ties sort by (alpha, beta,
        theta) ascending, so the winner is deterministic.
    """
    grid = grid if grid is not None else GridSpec()
    pre = _precompute(cache, head, val_features, val_labels, state)
    table = []
    for alpha, beta, theta in product(grid.alphas, grid.betas, grid.thetas):
        config = FusionConfig(alpha=alpha, beta=beta, theta=theta)
        table.append((config, _accuracy(pre, config)))
    table.sort(key=lambda row: (-row[1], row[0].alpha, row[0].beta, row[0].theta))
    return table[0][0], table


def coordinate_sweep(
    cache: FewShotCache,
    head: ZeroShotHead,
    val_features,
    val_labels,
    grid: GridSpec | None = None,
    base: FusionConfig | None = None,
    state: TrainableState | None = None,
) -> list[SweepEntry]:
    """Vary one knob at a time over its grid, holding the others at ``base``.

    Emits len(grid axis) rows per swept parameter, in grid order.
    """
    grid = grid if grid is not None else GridSpec()
    base = base if base is not None else FusionConfig()
    pre = _precompute(cache, head, val_features, val_labels, state)
    entries = []
    axes = {"alpha": grid.alphas, "beta": grid.betas, "theta": grid.thetas}
    for parameter in SWEEP_PARAMETERS:
        for value in axes[parameter]:
            config = replace(base, **{parameter: value})
            entries.append(
                SweepEntry(parameter=parameter, value=value, config=config, accuracy=_accuracy(pre, config))
            )
    return entries


def search_table_csv(table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["alpha", "beta", "theta", "accuracy"])
    for config, accuracy in table:
        writer.writerow([config.alpha, config.beta, config.theta, accuracy])
    return buf.getvalue()


def search_table_json(table) -> str:
    rows = [
        {"alpha": c.alpha, "beta": c.beta, "theta": c.theta, "accuracy": acc} for c, acc in table
    ]
    return json.dumps(rows, sort_keys=True, indent=2) + "\n"


def sweep_csv(entries: list[SweepEntry]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["parameter", "value", "alpha", "beta", "theta", "accuracy"])
    for e in entries:
        writer.writerow([e.parameter, e.value, e.config.alpha, e.config.beta, e.config.theta, e.accuracy])
    return buf.getvalue()


def sweep_json(entries: list[SweepEntry]) -> str:
    rows = [
        {
            "parameter": e.parameter,
            "value": e.value,
            "alpha": e.config.alpha,
            "beta": e.config.beta,
            "theta": e.config.theta,
            "accuracy": e.accuracy,
        }
        for e in entries
    ]
    return json.dumps(rows, sort_keys=True, indent=2) + "\n"


def write_search_outputs(table, prefix: Path | str) -> tuple[Path, Path]:
    """Write <prefix>.csv and <prefix>.json for a grid-search table."""
    prefix = Path(prefix)
    csv_path = prefix.parent / f"{prefix.name}.csv"
    json_path = prefix.parent / f"{prefix.name}.json"
    atomic_write_text(csv_path, search_table_csv(table))
    atomic_write_text(json_path, search_table_json(table))
    return csv_path, json_path


def write_sweep_outputs(entries: list[SweepEntry], prefix: Path | str) -> tuple[Path, Path]:
    """Write <prefix>.csv and <prefix>.json for a coordinate sweep."""
    prefix = Path(prefix)
    csv_path = prefix.parent / f"{prefix.name}.csv"
    json_path = prefix.parent / f"{prefix.name}.json"
    atomic_write_text(csv_path, sweep_csv(entries))
    atomic_write_text(json_path, sweep_json(entries))
    return csv_path, json_path
