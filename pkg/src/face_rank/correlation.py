"""Agreement statistics between metric scores and fine-tuned accuracies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError

WEIGHTING_NOTE = "additive hyperbolic: w_ij = 1/(1+r_i) + 1/(1+r_j), r = accuracy rank desc"


@dataclass
class CorrelationReport:
    """Zoo-level agreement between scores and ground-truth accuracies.

    ``tau_w`` / ``pearson`` are the headline values (first metric in
    ``per_metric``); the per-metric map holds every evaluated column.
    """

    tau_w: float
    pearson: float | None
    model_count: int
    per_metric: dict = field(default_factory=dict)
    excluded_missing_accuracy: int = 0
    weighting: str = WEIGHTING_NOTE


def _descending_ranks(values: np.ndarray) -> np.ndarray:
    """Zero-based ranks of values in descending order; ties share the mean rank."""
    order = np.argsort(-values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j)
        i = j + 1
    return ranks


def weighted_kendall(scores, accuracies) -> float:
    """Weighted Kendall rank correlation.

    Pairs are weighted by the hyperbolic rank weights of their accuracies
    (descending, so disagreements among the top models cost most). Tied
    pairs in either vector contribute zero to the numerator but keep their
    full denominator weight.
    """
    s = np.asarray(scores, dtype=np.float64)
    a = np.asarray(accuracies, dtype=np.float64)
    if s.shape != a.shape or s.ndim != 1:
        raise EvaluationError(
            f"need equal-length 1-D vectors, got {s.shape} and {a.shape}"
        )
    m = s.size
    if m < 2:
        raise EvaluationError("need at least 2 models to correlate")
    r = _descending_ranks(a)
    w = 1.0 / (1.0 + r)
    num = 0.0
    den = 0.0
    for i in range(m):
        for j in range(i + 1, m):
            wij = w[i] + w[j]
            den += wij
            num += wij * np.sign(s[i] - s[j]) * np.sign(a[i] - a[j])
    return float(num / den)


def pearson(scores, accuracies) -> float:
    """Sample Pearson correlation; rejects constant vectors."""
    s = np.asarray(scores, dtype=np.float64)
    a = np.asarray(accuracies, dtype=np.float64)
    if s.shape != a.shape or s.ndim != 1:
        raise EvaluationError(
            f"need equal-length 1-D vectors, got {s.shape} and {a.shape}"
        )
    if s.size < 2:
        raise EvaluationError("need at least 2 models to correlate")
    sd = s - s.mean()
    ad = a - a.mean()
    ss, aa = float(sd @ sd), float(ad @ ad)
    if ss == 0.0 or aa == 0.0:
        raise EvaluationError("correlation undefined for a constant vector")
    return float((sd @ ad) / np.sqrt(ss * aa))
