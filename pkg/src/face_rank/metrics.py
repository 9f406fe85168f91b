"""Collapse and fairness scores over class statistics, plus score fusion.

The per-model scores:

* variance collapse C: negative trace of the within-class covariance against
  the pseudo-inverse of the between-class covariance, divided by K.
* class fairness F: mean row entropy of the temperature-softmaxed matrix of
  pairwise Bhattacharyya coefficients (the class overlap matrix).

Zoo-level fusion min-max rescales C and F independently across models and
sums them. The ETF-closeness diagnostic measures how far globally-centered
class means are from a simplex equiangular tight frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DegenerateInputError
from .linalg import (
    LOGDET_FLOOR,
    PINV_REL_TOL,
    ClassStats,
    log_det_psd,
    pinv_psd,
)

DEFAULT_TEMPERATURE = 0.05
SIGMA_B_DEGENERACY_RATIO = 1e-12
FULL_COV_SHRINKAGE = 1e-4


@dataclass
class FairnessConfig:
    """Temperature for the overlap softmax. Small values sharpen contrasts."""

    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        if not (self.temperature > 0):
            raise ValueError(f"temperature must be > 0, got {self.temperature}")


@dataclass
class OverlapMatrix:
    """K x K Bhattacharyya distances and coefficients between classes.

    distances[i, j] >= 0 with an exactly zero diagonal; coefficients is
    elementwise exp(-distances), so its diagonal is exactly 1.
    """

    distances: np.ndarray
    coefficients: np.ndarray

    @property
    def k_count(self) -> int:
        return self.distances.shape[0]


@dataclass
class ScoreReport:
    """Per-model metric values; normalized fields appear after fusion."""

    model_id: str
    raw_c: float | None = None
    raw_f: float | None = None
    norm_c: float | None = None
    norm_f: float | None = None
    face: float | None = None
    baselines: dict = field(default_factory=dict)
    degenerate_flags: list = field(default_factory=list)
    error: str | None = None


def variance_collapse(stats: ClassStats, flags: list | None = None,
                      rel_tol: float = PINV_REL_TOL) -> float:
    """Variance collapse score C = -trace(sigma_w @ pinv(sigma_b)) / K.

    Always <= 0; 0 is the perfect-collapse maximum. When the between-class
    covariance is negligible against the within-class one the score is a
    meaningless 0, which is surfaced through ``flags``.
    """
    sw, sb = stats.sigma_w, stats.sigma_b
    if sw.shape != sb.shape:
        raise DataError(
            f"sigma_w shape {sw.shape} != sigma_b shape {sb.shape}"
        )
    tr_b = float(np.trace(sb))
    tr_w = float(np.trace(sw))
    if flags is not None and tr_b < SIGMA_B_DEGENERACY_RATIO * tr_w:
        flags.append("sigma_b_degenerate")
    c = -float(np.trace(sw @ pinv_psd(sb, rel_tol))) / stats.k_count
    return min(c, 0.0)


def _shrink_full_cov(cov: np.ndarray) -> np.ndarray:
    # Regularization for the full-covariance overlap path; keeps averaged
    # covariances invertible when n_k < d. Identical covariances still give
    # exactly zero distance because both classes receive the same ridge.
    d = cov.shape[0]
    lam = FULL_COV_SHRINKAGE * float(np.trace(cov)) / d
    return cov + lam * np.eye(d)


def bhattacharyya_pair(mean_i, mean_j, cov_i, cov_j,
                       cov_mode: str = "diagonal",
                       rel_tol: float = PINV_REL_TOL,
                       floor: float = LOGDET_FLOOR) -> float:
    """Bhattacharyya distance between two Gaussians N(mean, cov).

    distance = (1/8) dm' avg_cov^-1 dm
             + (1/2) [logdet(avg_cov) - (logdet(cov_i) + logdet(cov_j)) / 2]

    In diagonal mode the covariances are 1-D variance vectors and the
    inverse is an elementwise reciprocal of the floored variances. In full
    mode each covariance gets a small trace-scaled ridge before averaging.
    """
    dm = np.asarray(mean_i, dtype=np.float64) - np.asarray(mean_j, dtype=np.float64)
    if cov_mode == "diagonal":
        avg = 0.5 * (np.asarray(cov_i, dtype=np.float64) +
                     np.asarray(cov_j, dtype=np.float64))
        quad = float(np.sum(dm * dm / np.maximum(avg, floor)))
        logdets = (log_det_psd(avg, floor)
                   - 0.5 * (log_det_psd(cov_i, floor) + log_det_psd(cov_j, floor)))
    elif cov_mode == "full":
        ci = _shrink_full_cov(np.asarray(cov_i, dtype=np.float64))
        cj = _shrink_full_cov(np.asarray(cov_j, dtype=np.float64))
        avg = 0.5 * (ci + cj)
        quad = float(dm @ pinv_psd(avg, rel_tol) @ dm)
        logdets = (log_det_psd(avg, floor)
                   - 0.5 * (log_det_psd(ci, floor) + log_det_psd(cj, floor)))
    else:
        raise ValueError(f"unknown cov_mode {cov_mode!r}")
    return max(0.125 * quad + 0.5 * logdets, 0.0)


def overlap_matrix(stats: ClassStats, cov_mode: str | None = None,
                   rel_tol: float = PINV_REL_TOL,
                   floor: float = LOGDET_FLOOR) -> OverlapMatrix:
    """Pairwise Bhattacharyya distances/coefficients between all classes."""
    mode = stats.cov_mode if cov_mode is None else cov_mode
    if mode != stats.cov_mode:
        raise DataError(
            f"stats carry {stats.cov_mode!r} covariances, requested {mode!r}"
        )
    k = stats.k_count
    dist = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            dij = bhattacharyya_pair(
                stats.class_means[i], stats.class_means[j],
                stats.sigma_k[i], stats.sigma_k[j],
                cov_mode=mode, rel_tol=rel_tol, floor=floor,
            )
            dist[i, j] = dist[j, i] = dij
    return OverlapMatrix(distances=dist, coefficients=np.exp(-dist))


def class_fairness(om: OverlapMatrix, cfg: FairnessConfig | None = None) -> float:
    """Mean row entropy of softmax(coefficients / temperature).

    The softmax runs over each full row, self-overlap diagonal included.
    Bounded by log K, attained exactly when every row is constant.
    """
    cfg = cfg or FairnessConfig()
    b = np.asarray(om.coefficients, dtype=np.float64)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DataError(f"overlap matrix must be square, got shape {b.shape}")
    if not np.isfinite(b).all():
        raise DataError("overlap matrix contains non-finite values")
    logits = b / cfg.temperature
    logits -= logits.max(axis=1, keepdims=True)
    exps = np.exp(logits)
    p = exps / exps.sum(axis=1, keepdims=True)
    # 0 * log(0) := 0
    plogp = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return float(-plogp.sum() / b.shape[0])


def minmax_rescale(values) -> list[float]:
    """Min-max rescale to [0, 1]; a constant vector maps to all 0.5."""
    vals = [float(v) for v in values]
    if not vals:
        raise DataError("cannot rescale an empty value list")
    if not all(np.isfinite(vals)):
        raise DataError("cannot rescale non-finite values")
    lo, hi = min(vals), max(vals)
    if hi == lo:
        return [0.5] * len(vals)
    return [(v - lo) / (hi - lo) for v in vals]


def fuse_scores(raw: list[tuple[str, float, float]]) -> list[ScoreReport]:
    """Fuse raw (model_id, C, F) triples into normalized reports.

    Each of C and F is min-max rescaled across the zoo and the fused score
    is their sum; ties in the extrema degrade that term to 0.5 everywhere.
    """
    if not raw:
        raise DataError("fuse_scores needs at least one model")
    ids = [r[0] for r in raw]
    norm_c = minmax_rescale([r[1] for r in raw])
    norm_f = minmax_rescale([r[2] for r in raw])
    return [
        ScoreReport(model_id=m, raw_c=float(c), raw_f=float(f),
                    norm_c=nc, norm_f=nf, face=nc + nf)
        for (m, c, f), nc, nf in zip(raw, norm_c, norm_f)
    ]


def etf_distance(class_means: np.ndarray, global_mean: np.ndarray) -> float:
    """Frobenius distance of centered class means from a simplex ETF Gram.

    With A the K x d matrix of rows (class_mean_k - global_mean):

        || A A' / ||A A'||_F  -  (I_K - 11'/K) / sqrt(K - 1) ||_F

    Scale-invariant in A; exactly 0 when the means sit at simplex ETF
    vertices around the global mean.
    """
    a = np.asarray(class_means, dtype=np.float64) - np.asarray(
        global_mean, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 2:
        raise DataError(f"need a K x d matrix with K >= 2, got shape {a.shape}")
    k = a.shape[0]
    gram = a @ a.T
    gram_norm = float(np.linalg.norm(gram))
    if gram_norm == 0.0:
        raise DegenerateInputError("centered class means are all zero")
    target = (np.eye(k) - np.full((k, k), 1.0 / k)) / np.sqrt(k - 1)
    return float(np.linalg.norm(gram / gram_norm - target))
