"""Shared statistical primitives: rank correlation, bootstrap CIs, F1, seeded RNG streams."""

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


def rng_stream(seed: int, index: int = 0) -> np.random.Generator:
    """Deterministic generator fully determined by (seed, index).

    Parallel workloads draw one stream per work item so serial and
    parallel runs are replayable.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def spearman(xs, ys) -> float:
    """Spearman rank correlation with average ranks for ties.

    Raises ValueError on length mismatch, fewer than 3 points, or
    constant input on either side.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise ValueError("length mismatch: %d vs %d" % (len(xs), len(ys)))
    if len(xs) < 3:
        raise ValueError("need at least 3 pairs")
    if np.all(xs == xs[0]) or np.all(ys == ys[0]):
        raise ValueError("constant input: rank correlation undefined")
    rx = rankdata(xs)
    ry = rankdata(ys)
    return float(np.corrcoef(rx, ry)[0, 1])


@dataclass
class BootstrapResult:
    estimate: float
    ci_low: float
    ci_high: float
    num_resamples: int


def bootstrap_mean_ci(samples, num_resamples: int = 1000, level: float = 0.95,
                      rng: np.random.Generator | None = None) -> BootstrapResult:
    """Percentile bootstrap CI for the mean."""
    samples = np.asarray(samples, dtype=float)
    n = len(samples)
    if n == 0:
        raise ValueError("empty sample")
    if rng is None:
        rng = rng_stream(0)
    idx = rng.integers(0, n, size=(num_resamples, n))
    means = samples[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    return BootstrapResult(float(samples.mean()), float(lo), float(hi), num_resamples)


def f1_micro_macro(predicted: np.ndarray, actual: np.ndarray) -> tuple[float, float]:
    """Micro- and macro-averaged F1 over a (items x labels) boolean decision matrix.

    Micro pools TP/FP/FN over all labels; macro averages per-label F1,
    scoring 0 for labels where F1 is undefined.
    """
    predicted = np.asarray(predicted, dtype=bool)
    actual = np.asarray(actual, dtype=bool)
    if predicted.shape != actual.shape:
        raise ValueError("shape mismatch")
    if predicted.ndim == 1:
        predicted = predicted[:, None]
        actual = actual[:, None]
    tp = (predicted & actual).sum(axis=0).astype(float)
    fp = (predicted & ~actual).sum(axis=0).astype(float)
    fn = (~predicted & actual).sum(axis=0).astype(float)

    denom = 2 * tp.sum() + fp.sum() + fn.sum()
    micro = float(2 * tp.sum() / denom) if denom > 0 else 0.0

    per_label_denom = 2 * tp + fp + fn
    with np.errstate(invalid="ignore", divide="ignore"):
        per_label = np.where(per_label_denom > 0, 2 * tp / per_label_denom, 0.0)
    macro = float(per_label.mean())
    return micro, macro
