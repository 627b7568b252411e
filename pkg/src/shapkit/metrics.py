"""Agreement between attribution vectors, and cost ratios between explainers."""
from __future__ import annotations

import logging
import math
from dataclasses import astuple, dataclass

import numpy as np

from .errors import ConfigError, DimensionError

log = logging.getLogger(__name__)

CSV_HEADER = ("C", "E", "concordant", "discordant", "tied", "call_ratio", "time_ratio")


def _pair(reference, candidate):
    a = np.asarray(reference, dtype=float).reshape(-1)
    b = np.asarray(candidate, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return a, b


def concordance_counts(reference, candidate):
    """(concordant, discordant, tied) over all unordered feature pairs.

    A pair is tied when either vector has equal values for it.
    """
    a, b = _pair(reference, candidate)
    if a.shape[0] < 2:
        raise DimensionError("concordance needs at least 2 features")
    i, j = np.triu_indices(a.shape[0], k=1)
    sa = np.sign(a[i] - a[j])
    sb = np.sign(b[i] - b[j])
    tied = (sa == 0) | (sb == 0)
    conc = ~tied & (sa == sb)
    return int(conc.sum()), int((~tied & ~conc).sum()), int(tied.sum())


def concordance_index(reference, candidate) -> float:
    """Fraction of feature pairs ordered the same way; ties earn half credit."""
    c, d, t = concordance_counts(reference, candidate)
    return (c + 0.5 * t) / (c + d + t)


def _minmax(v):
    lo, hi = v.min(), v.max()
    if hi == lo:
        log.warning("constant attribution vector; mapping it to 0.5")
        return np.full_like(v, 0.5)
    return (v - lo) / (hi - lo)


def normalized_euclidean(reference, candidate) -> float:
    """L2 distance of the two min-max rescaled vectors, divided by sqrt(m)."""
    a, b = _pair(reference, candidate)
    if a.shape[0] < 1:
        raise DimensionError("empty vectors")
    d = _minmax(a) - _minmax(b)
    return math.sqrt(math.fsum(d * d) / a.shape[0])


def cost_ratio(report_a, report_b):
    """``(calls_a / calls_b, time_a / time_b)``."""
    if report_b.model_calls == 0 or report_b.wall_time_ms == 0:
        raise ConfigError("cost_ratio: the reference report has a zero counter")
    return (report_a.model_calls / report_b.model_calls,
            report_a.wall_time_ms / report_b.wall_time_ms)


@dataclass
class ComparisonResult:
    C: float
    E: float
    concordant: int
    discordant: int
    tied: int
    call_ratio: float
    time_ratio: float

    def csv_row(self) -> list:
        return [repr(v) if isinstance(v, float) else str(v) for v in astuple(self)]


def compare(reference_report, candidate_report) -> ComparisonResult:
    """Score ``candidate_report`` against ``reference_report`` on all features."""
    ref = reference_report.full()
    cand = candidate_report.full()
    c, d, t = concordance_counts(ref, cand)
    call_r, time_r = cost_ratio(candidate_report, reference_report)
    return ComparisonResult((c + 0.5 * t) / (c + d + t), normalized_euclidean(ref, cand),
                            c, d, t, call_r, time_r)
