"""Expected Calibration Error over equal-width confidence bins.

Bins are half-open (lower, upper] with a confidence of exactly 0 assigned to
the first bin; M defaults to 10 everywhere in the CLI. ECE weights each bin
by its sample count, so empty bins carry no weight and report zeroed
statistics. Only detections enter the computation: false negatives have no
confidence score and therefore no bin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ValidationError

__all__ = [
    "BinStatistics",
    "bin_outcomes",
    "expected_calibration_error",
    "reliability_rows",
    "DEFAULT_BINS",
]

DEFAULT_BINS = 10


@dataclass(frozen=True)
class BinStatistics:
    lower: float
    upper: float
    count: int
    mean_confidence: float
    precision: float

    @property
    def gap(self) -> float:
        return self.precision - self.mean_confidence


def _bin_index(confidences, m_bins):
    idx = np.ceil(np.asarray(confidences) * m_bins).astype(int) - 1
    return np.clip(idx, 0, m_bins - 1)


def bin_outcomes(labeled, m_bins=DEFAULT_BINS) -> list[BinStatistics]:
    """Group (confidence, correct) pairs into M equal-width bins.

    `labeled` is any iterable of (confidence, correct) pairs; returns one
    BinStatistics per bin, empty bins included with zeroed statistics.
    """
    if m_bins < 1:
        raise ValidationError(f"m_bins must be >= 1, got {m_bins}")
    pairs = list(labeled)
    conf = np.array([c for c, _ in pairs], dtype=float)
    correct = np.array([bool(k) for _, k in pairs], dtype=bool)
    if conf.size and (conf.min() < 0.0 or conf.max() > 1.0):
        raise ValidationError("confidences must lie in [0, 1]")

    idx = _bin_index(conf, m_bins) if conf.size else np.empty(0, int)
    bins = []
    for m in range(m_bins):
        members = idx == m
        count = int(members.sum())
        if count:
            mean_conf = float(conf[members].mean())
            prec = float(correct[members].mean())
        else:
            mean_conf = 0.0
            prec = 0.0
        bins.append(BinStatistics(m / m_bins, (m + 1) / m_bins, count, mean_conf, prec))
    return bins


def expected_calibration_error(bins) -> float:
    """Count-weighted mean absolute gap between per-bin precision and confidence."""
    n = sum(b.count for b in bins)
    if n == 0:
        raise DataError("ECE is undefined for an empty sample set")
    return sum(b.count / n * abs(b.precision - b.mean_confidence) for b in bins)


def reliability_rows(bins) -> list[tuple[float, float, int, float, float, float]]:
    """Rows (lower, upper, count, mean_confidence, precision, gap) per bin."""
    return [
        (b.lower, b.upper, b.count, b.mean_confidence, b.precision, b.gap if b.count else 0.0)
        for b in bins
    ]
