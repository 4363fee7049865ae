"""Synthetic classification datasets labeled by thresholding a statistic of
a Gaussian input.

Two variants: ``syn1`` scores each input by the mean of exp(z_i) (a convex
nonlinear statistic), ``syn2`` by an affine statistic whose level sets are
parallel hyperplanes.  Interval thresholds are empirical quantiles of the
training scores, so training classes come out nearly equally populated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .numerics import _generator

__all__ = ["SynthSpec", "SynthResult", "generate", "write_dataset"]

SynthVariant = Literal["syn1", "syn2"]


@dataclass(frozen=True)
class SynthSpec:
    variant: SynthVariant
    n_train: int
    n_test: int
    seed: int
    dim: int = 10
    num_classes: int = 20

    def __post_init__(self):
        if self.variant not in ("syn1", "syn2"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.num_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.num_classes}")
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.n_train < self.num_classes or self.n_test < 1:
            raise ValueError("n_train must cover every class and n_test must be positive")


@dataclass(frozen=True)
class SynthResult:
    spec: SynthSpec
    thresholds: np.ndarray  # (num_classes - 1,) increasing interval points
    train_features: np.ndarray
    train_labels: np.ndarray
    test_features: np.ndarray
    test_labels: np.ndarray

    @property
    def train_counts(self) -> np.ndarray:
        return np.bincount(self.train_labels, minlength=self.spec.num_classes)


def _score(z: np.ndarray, variant: SynthVariant) -> np.ndarray:
    if variant == "syn1":
        return np.exp(z).mean(axis=1)
    # affine statistic: double weight on the first half of the coordinates
    d = z.shape[1]
    w = np.ones(d)
    w[: (d + 1) // 2] = 2.0
    return (z @ w) / (d / 2.0)


def generate(spec: SynthSpec) -> SynthResult:
    """Draw standard-normal inputs and label them by score interval.

    Thresholds are the training-score order statistics at ranks
    floor(k n_train / num_classes); the test portion reuses them.  Class
    rule: label = number of thresholds <= score (inclusive-left intervals).
    """
    gen = _generator(spec.seed, 0)
    z = gen.standard_normal((spec.n_train + spec.n_test, spec.dim))
    h = _score(z, spec.variant)
    h_train, h_test = h[: spec.n_train], h[spec.n_train :]

    ranks = (np.arange(1, spec.num_classes) * spec.n_train) // spec.num_classes
    thresholds = np.sort(h_train)[ranks - 1]

    train_labels = np.searchsorted(thresholds, h_train, side="right")
    test_labels = np.searchsorted(thresholds, h_test, side="right")
    return SynthResult(
        spec=spec,
        thresholds=thresholds,
        train_features=z[: spec.n_train],
        train_labels=train_labels.astype(np.int64),
        test_features=z[spec.n_train :],
        test_labels=test_labels.astype(np.int64),
    )


def _write_split(path: Path, features: np.ndarray, labels: np.ndarray) -> None:
    dim = features.shape[1]
    header = "class," + ",".join(f"f{j}" for j in range(dim))
    with path.open("w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for label, row in zip(labels, features):
            fh.write(str(int(label)) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def write_dataset(result: SynthResult, out_dir: str | Path) -> dict[str, Path]:
    """Write train/test files in the loader's input format plus a sidecar.

    The sidecar records the spec, thresholds, and training class counts.
    Output is byte-identical for identical specs.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = result.spec
    stem = f"{spec.variant}_seed{spec.seed}"
    paths = {
        "train": out / f"{stem}_train.csv",
        "test": out / f"{stem}_test.csv",
        "meta": out / f"{stem}_meta.json",
    }
    _write_split(paths["train"], result.train_features, result.train_labels)
    _write_split(paths["test"], result.test_features, result.test_labels)
    meta = {
        "variant": spec.variant,
        "seed": spec.seed,
        "dim": spec.dim,
        "num_classes": spec.num_classes,
        "n_train": spec.n_train,
        "n_test": spec.n_test,
        "thresholds": [repr(float(t)) for t in result.thresholds],
        "train_class_counts": result.train_counts.tolist(),
    }
    paths["meta"].write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths
