"""Pipeline over exported feature embeddings and predicted probabilities.

Takes the output of an externally trained classifier (features, labels, and
optionally predicted probabilities), fits the tail exponent beta, computes
the pairwise separability statistics p1/p2, estimates the per-pair confusion
constants kappa, and compares per-class accuracy against the analytic
prediction.

Input format (see ``load_dataset``): delimiter-separated text with a header
row.  Required column ``class``; feature columns ``f0..f{n-1}`` (at least
one); optional ``yhat`` (probability of the true class) and optional full
distribution columns ``p0..p{C-1}``.  Lines starting with ``#`` are skipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bounds import expected_accuracy
from .numerics import _generator

__all__ = [
    "DatasetParseError",
    "DatasetValidationError",
    "FeatureDataset",
    "BetaFit",
    "PairSeparability",
    "KappaEstimate",
    "ClassAccuracy",
    "AccuracyReport",
    "Histogram",
    "HistogramBin",
    "load_dataset",
    "mean_cross_entropy",
    "fit_beta",
    "pair_separability",
    "estimate_kappa",
    "accuracy_report",
    "histogram_export",
    "DEFAULT_BETA_GRID",
]

DEFAULT_BETA_GRID = tuple(round(1.0 + 0.1 * i, 10) for i in range(51))

PROB_ATOL = 1e-6


class DatasetParseError(ValueError):
    """Malformed input file; carries the offending 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DatasetValidationError(ValueError):
    """Structurally parseable input that violates a dataset invariant."""


@dataclass
class FeatureDataset:
    """Labeled feature vectors with optional predicted probabilities."""

    labels: np.ndarray  # (m,) int
    features: np.ndarray  # (m, n) float
    yhat_true: np.ndarray | None = None  # (m,) float in (0, 1]
    prob_matrix: np.ndarray | None = None  # (m, C) float, rows sum to 1
    num_classes: int = 0  # inferred as 1 + max label when not set

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.features = np.asarray(self.features, dtype=float)
        if self.yhat_true is not None:
            self.yhat_true = np.asarray(self.yhat_true, dtype=float)
        if self.prob_matrix is not None:
            self.prob_matrix = np.asarray(self.prob_matrix, dtype=float)
        inferred = self.num_classes == 0
        if inferred:
            self.num_classes = int(self.labels.max()) + 1 if self.labels.size else 0
        self._validate(require_all_classes=inferred)

    def _validate(self, require_all_classes: bool) -> None:
        m = self.labels.shape[0]
        if m == 0:
            raise DatasetValidationError("dataset has no rows")
        if self.features.ndim != 2 or self.features.shape[0] != m:
            raise DatasetValidationError("features must be an (m, n) array")
        if self.features.shape[1] < 1:
            raise DatasetValidationError("need at least one feature column")
        if self.labels.min() < 0:
            raise DatasetValidationError("class labels must be nonnegative")
        if self.labels.max() >= self.num_classes:
            raise DatasetValidationError(
                f"label {int(self.labels.max())} outside [0, {self.num_classes - 1}]"
            )
        if require_all_classes:
            present = np.unique(self.labels)
            missing = sorted(set(range(self.num_classes)) - set(present.tolist()))
            if missing:
                raise DatasetValidationError(
                    f"class {missing[0]} has no samples (pass num_classes to allow gaps)"
                )
        if self.yhat_true is not None:
            if self.yhat_true.shape != (m,):
                raise DatasetValidationError("yhat column must have one value per row")
            if np.any(self.yhat_true <= 0.0) or np.any(self.yhat_true > 1.0):
                raise DatasetValidationError("yhat values must lie in (0, 1]")
        if self.prob_matrix is not None:
            if self.prob_matrix.shape != (m, self.num_classes):
                raise DatasetValidationError(
                    f"probability matrix must be (m, {self.num_classes})"
                )
            if np.any(self.prob_matrix < 0.0):
                raise DatasetValidationError("probabilities must be nonnegative")
            sums = self.prob_matrix.sum(axis=1)
            bad = np.flatnonzero(np.abs(sums - 1.0) > PROB_ATOL)
            if bad.size:
                raise DatasetValidationError(
                    f"probability row {int(bad[0])} sums to {sums[bad[0]]:.8f}, not 1"
                )
            if self.yhat_true is not None:
                own = self.prob_matrix[np.arange(m), self.labels]
                bad = np.flatnonzero(np.abs(own - self.yhat_true) > PROB_ATOL)
                if bad.size:
                    raise DatasetValidationError(
                        f"row {int(bad[0])}: prob_matrix[label] disagrees with yhat"
                    )

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.labels.shape[0]


def load_dataset(
    path: str | Path, delimiter: str = ",", num_classes: int | None = None
) -> FeatureDataset:
    """Parse and validate a feature dataset file.

    Raises :class:`DatasetParseError` with the offending line number for
    malformed rows and :class:`DatasetValidationError` for invariant
    violations.  ``num_classes`` overrides the inferred class count for
    datasets where some class has no samples.
    """
    path = Path(path)
    rows: list[list[str]] = []
    line_nos: list[int] = []
    header: list[str] | None = None
    header_line = 0
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = [f.strip() for f in line.split(delimiter)]
            if header is None:
                header = fields
                header_line = lineno
            else:
                rows.append(fields)
                line_nos.append(lineno)
    if header is None:
        raise DatasetParseError(1, "empty file (no header row)")
    if "class" not in header:
        raise DatasetParseError(header_line, "header is missing the 'class' column")
    if not rows:
        raise DatasetParseError(header_line, "no data rows after the header")

    col = {name: i for i, name in enumerate(header)}
    feat_ids = sorted(int(h[1:]) for h in header if h.startswith("f") and h[1:].isdigit())
    if not feat_ids:
        raise DatasetParseError(header_line, "no feature columns f0..f{n-1} found")
    if feat_ids != list(range(len(feat_ids))):
        raise DatasetParseError(header_line, "feature columns must be contiguous f0..f{n-1}")
    prob_ids = sorted(int(h[1:]) for h in header if h.startswith("p") and h[1:].isdigit())
    if prob_ids and prob_ids != list(range(len(prob_ids))):
        raise DatasetParseError(header_line, "probability columns must be contiguous p0..p{C-1}")
    has_yhat = "yhat" in header

    m, n = len(rows), len(feat_ids)
    labels = np.empty(m, dtype=np.int64)
    features = np.empty((m, n), dtype=float)
    yhat = np.empty(m, dtype=float) if has_yhat else None
    probs = np.empty((m, len(prob_ids)), dtype=float) if prob_ids else None

    for i, (fields, lineno) in enumerate(zip(rows, line_nos)):
        if len(fields) != len(header):
            raise DatasetParseError(
                lineno, f"expected {len(header)} fields, got {len(fields)}"
            )
        try:
            labels[i] = int(fields[col["class"]])
            for j in range(n):
                features[i, j] = float(fields[col[f"f{j}"]])
            if has_yhat:
                yhat[i] = float(fields[col["yhat"]])
            if probs is not None:
                for j in range(probs.shape[1]):
                    probs[i, j] = float(fields[col[f"p{j}"]])
        except ValueError as exc:
            raise DatasetParseError(lineno, str(exc)) from None

    if num_classes is None and probs is not None:
        num_classes = probs.shape[1]
    if probs is not None and num_classes != probs.shape[1]:
        raise DatasetValidationError(
            f"{probs.shape[1]} probability columns but num_classes={num_classes}"
        )
    return FeatureDataset(
        labels=labels,
        features=features,
        yhat_true=yhat,
        prob_matrix=probs,
        num_classes=num_classes or 0,
    )


def mean_cross_entropy(ds: FeatureDataset) -> float:
    """Dataset loss L = -(1/m) sum log yhat_true."""
    y = _true_class_probs(ds)
    if np.any(y == 0.0):
        raise ValueError("yhat_true contains an exact zero; loss is undefined")
    return float(-np.mean(np.log(y)))


def _true_class_probs(ds: FeatureDataset) -> np.ndarray:
    if ds.yhat_true is not None:
        return ds.yhat_true
    if ds.prob_matrix is not None:
        return ds.prob_matrix[np.arange(len(ds)), ds.labels]
    raise ValueError("dataset has neither yhat nor probability columns")


@dataclass(frozen=True)
class BetaFit:
    """Result of the tail-exponent grid search.

    ``ks_stat`` is the minimized Kolmogorov-Smirnov distance between the
    transformed scores and the moment-matched exponential; ties on the grid
    break toward the smaller beta.
    """

    beta_hat: float
    mu_hat: float
    ks_stat: float
    beta_grid: tuple


def _ks_distance_sorted(t_sorted: np.ndarray, mean: float) -> float:
    n = t_sorted.size
    cdf = 1.0 - np.exp(-t_sorted / mean)
    steps = np.arange(n, dtype=float)
    return float(max(np.max((steps + 1.0) / n - cdf), np.max(cdf - steps / n)))


def fit_beta(ds: FeatureDataset, beta_grid=DEFAULT_BETA_GRID) -> BetaFit:
    """Pick the beta whose transformed scores look most exponential.

    For each candidate beta the scores t = (-log yhat)^(1/beta) are compared
    (via the KS distance) against the exponential with the sample-mean rate.
    """
    grid = tuple(float(b) for b in beta_grid)
    if not grid:
        raise ValueError("beta grid must be nonempty")
    if any(g <= 0.0 for g in grid):
        raise ValueError("beta grid entries must be positive")
    scores = -np.log(_true_class_probs(ds))
    if np.all(scores == 0.0):
        raise ValueError("all predicted probabilities are exactly 1; transform is degenerate")
    scores = np.sort(scores)  # monotone transforms preserve the order
    best = None
    for beta in grid:
        t = scores ** (1.0 / beta)
        mean = float(t.mean())
        d = _ks_distance_sorted(t, mean)
        if best is None or d < best[0]:
            best = (d, beta, mean)
    ks, beta_hat, mu_hat = best
    return BetaFit(beta_hat=beta_hat, mu_hat=mu_hat, ks_stat=ks, beta_grid=grid)


@dataclass(frozen=True)
class PairSeparability:
    """Sample probabilities that inter-class distance beats intra-class.

    p1 anchors at class c1, p2 at class c2; the inter pool is always the
    opposite class's first ``n_inter`` sampled points.
    """

    c1: int
    c2: int
    p1: float
    p2: float
    n_anchor: int
    n_intra: int
    n_inter: int
    seed: int


def _pair_fraction(
    anchors: np.ndarray, intra_pool: np.ndarray, inter_pool: np.ndarray
) -> float:
    """Fraction of (anchor, intra, inter) triples with d_inter > d_intra, ties failing."""
    d_intra = np.linalg.norm(anchors[:, None, :] - intra_pool[None, :, :], axis=2)
    d_inter = np.linalg.norm(anchors[:, None, :] - inter_pool[None, :, :], axis=2)
    count = 0
    for j in range(anchors.shape[0]):
        row = np.sort(d_intra[j])
        # 'left' counts intra distances strictly below each inter distance
        count += int(np.searchsorted(row, d_inter[j], side="left").sum())
    return count / (anchors.shape[0] * intra_pool.shape[0] * inter_pool.shape[0])


def pair_separability(
    ds: FeatureDataset,
    c1: int,
    c2: int,
    n_anchor: int = 100,
    n_pool: int = 100,
    seed: int = 0,
) -> PairSeparability:
    """p1/p2 statistics for one class pair.

    Per class, ``n_anchor + n_pool`` points are sampled without replacement
    (seeded); the first ``n_anchor`` are anchors, the rest the intra pool,
    and the opposite class's first ``n_pool`` sampled points form the inter
    pool.  Equivalent to the brute-force triple loop over
    1(d_inter > d_intra).
    """
    if c1 == c2:
        raise ValueError("separability needs two distinct classes")
    need = n_anchor + n_pool
    gen = _generator(seed, 0)
    sampled = {}
    for c in (c1, c2):
        idx = np.flatnonzero(ds.labels == c)
        if idx.size < need:
            raise ValueError(
                f"class {c} has {idx.size} points but {need} are required "
                f"(n_anchor + n_pool)"
            )
        sampled[c] = ds.features[idx[gen.permutation(idx.size)[:need]]]
    a1, pool1 = sampled[c1][:n_anchor], sampled[c1][n_anchor:]
    a2, pool2 = sampled[c2][:n_anchor], sampled[c2][n_anchor:]
    p1 = _pair_fraction(a1, pool1, sampled[c2][:n_pool])
    p2 = _pair_fraction(a2, pool2, sampled[c1][:n_pool])
    return PairSeparability(
        c1=c1, c2=c2, p1=p1, p2=p2,
        n_anchor=n_anchor, n_intra=n_pool, n_inter=n_pool, seed=seed,
    )


@dataclass(frozen=True)
class KappaEstimate:
    """Per-ordered-pair confusion constants and the per-class minima.

    ``kappa[c_target, c_true]`` inverts the mean conditional probability of a
    class-``c_true`` sample being assigned ``c_target`` given not ``c_true``.
    ``raw`` keeps the pre-clamp values (clamping floors entries at 1);
    ``skipped[c]`` counts samples with yhat exactly 1 whose conditional is
    undefined; ``eta_spread[c]`` is a diagnostic for how constant the
    conditional split is within the class (mean per-target std).
    """

    kappa: np.ndarray
    kappa_star: np.ndarray
    raw: np.ndarray
    skipped: np.ndarray
    eta_spread: np.ndarray


def estimate_kappa(ds: FeatureDataset) -> KappaEstimate:
    """Estimate kappa for every ordered class pair from the probability rows."""
    if ds.prob_matrix is None:
        raise ValueError("kappa estimation needs the full probability columns")
    C = ds.num_classes
    raw = np.full((C, C), np.nan)
    skipped = np.zeros(C, dtype=np.int64)
    eta_spread = np.zeros(C)
    for c_true in range(C):
        rows = ds.prob_matrix[ds.labels == c_true]
        denom = 1.0 - rows[:, c_true]
        keep = denom > 0.0
        skipped[c_true] = int(np.count_nonzero(~keep))
        if not np.any(keep):
            raise ValueError(
                f"every sample of class {c_true} has yhat = 1; conditionals undefined"
            )
        cond = rows[keep] / denom[keep, None]
        others = [c for c in range(C) if c != c_true]
        means = cond[:, others].mean(axis=0)
        with np.errstate(divide="ignore"):
            raw[others, c_true] = 1.0 / means
        eta_spread[c_true] = float(cond[:, others].std(axis=0).mean())
    kappa = np.where(np.isnan(raw), np.nan, np.maximum(raw, 1.0))
    kappa_star = np.array([np.nanmin(kappa[:, c]) for c in range(C)])
    return KappaEstimate(
        kappa=kappa, kappa_star=kappa_star, raw=raw, skipped=skipped, eta_spread=eta_spread
    )


@dataclass(frozen=True)
class ClassAccuracy:
    class_id: int
    n: int
    actual: float
    predicted: float
    lower_bound: float


@dataclass(frozen=True)
class AccuracyReport:
    loss: float
    rows: tuple


def accuracy_report(ds: FeatureDataset, fit: BetaFit) -> AccuracyReport:
    """Actual vs predicted per-class accuracy, plus the universal bound.

    ``predicted`` uses the estimated kappa*, ``lower_bound`` the kappa* = 1
    case that holds for any class.
    """
    if ds.prob_matrix is None:
        raise ValueError("accuracy report needs the full probability columns")
    loss = mean_cross_entropy(ds)
    kappas = estimate_kappa(ds)
    argmax = ds.prob_matrix.argmax(axis=1)
    floor = expected_accuracy(loss, fit.beta_hat, 1.0)
    rows = []
    for c in range(ds.num_classes):
        mask = ds.labels == c
        n = int(np.count_nonzero(mask))
        actual = float(np.mean(argmax[mask] == c)) if n else math.nan
        k_star = float(kappas.kappa_star[c])
        predicted = expected_accuracy(loss, fit.beta_hat, k_star) if math.isfinite(k_star) else 1.0
        rows.append(
            ClassAccuracy(class_id=c, n=n, actual=actual, predicted=predicted, lower_bound=floor)
        )
    return AccuracyReport(loss=loss, rows=tuple(rows))


@dataclass(frozen=True)
class HistogramBin:
    lo: float
    hi: float
    empirical_density: float
    fitted_density: float


@dataclass(frozen=True)
class Histogram:
    mu_hat: float
    bins: tuple


def histogram_export(ds: FeatureDataset, beta: float, n_bins: int) -> Histogram:
    """Equal-width histogram of (-log yhat)^(1/beta) with the fitted density.

    The fitted curve is the exponential with the sample-mean rate, evaluated
    at bin centers.  Empirical densities integrate to 1 over the bins.
    """
    if n_bins < 2:
        raise ValueError(f"need at least 2 bins, got {n_bins}")
    if beta <= 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    t = (-np.log(_true_class_probs(ds))) ** (1.0 / beta)
    hi = float(t.max())
    if hi == 0.0:
        hi = 1.0  # all scores zero: keep a valid bin range
    mu_hat = float(t.mean())
    edges = np.linspace(0.0, hi, n_bins + 1)
    counts, _ = np.histogram(t, bins=edges)
    width = edges[1] - edges[0]
    m = t.size
    centers = 0.5 * (edges[:-1] + edges[1:])
    fitted = np.exp(-centers / mu_hat) / mu_hat if mu_hat > 0.0 else np.zeros(n_bins)
    bins = tuple(
        HistogramBin(
            lo=float(edges[i]),
            hi=float(edges[i + 1]),
            empirical_density=float(counts[i] / (m * width)),
            fitted_density=float(fitted[i]),
        )
        for i in range(n_bins)
    )
    return Histogram(mu_hat=mu_hat, bins=bins)
