"""Reference transferability metrics: LEEP, NCE, LogME, H-score, GBC.

All five follow the "higher is better" convention. LEEP and NCE need the
source classifier's predictions on the target samples; the rest work from
embeddings alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .linalg import PINV_REL_TOL, FeatureSet, pinv_psd
from .metrics import OverlapMatrix

PROB_FLOOR = 1e-12
ROW_SUM_ATOL = 1e-6

LOGME_TOL = 1e-5
LOGME_MAX_ITER = 100


@dataclass
class SourcePredictions:
    """Row-stochastic n x Z matrix of source-classifier probabilities."""

    probs: np.ndarray
    source_class_count: int

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 2:
            raise DataError(f"probs must be 2-D, got shape {self.probs.shape}")
        z = int(self.source_class_count)
        if z < 2:
            raise DataError(f"need at least 2 source classes, got {z}")
        if self.probs.shape[1] != z:
            raise DataError(
                f"probs have {self.probs.shape[1]} columns, expected Z={z}"
            )
        if not np.isfinite(self.probs).all():
            raise DataError("probs contain non-finite values")
        if self.probs.min() < 0.0 or self.probs.max() > 1.0:
            raise DataError("probs must lie in [0, 1]")
        sums = self.probs.sum(axis=1)
        bad = np.abs(sums - 1.0) > ROW_SUM_ATOL
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DataError(
                f"row {row} sums to {sums[row]:.8f}, not 1 within {ROW_SUM_ATOL}"
            )

    @property
    def n(self) -> int:
        return self.probs.shape[0]


def leep(preds: SourcePredictions, labels: np.ndarray) -> float:
    """Log expected empirical prediction.

    Builds the empirical conditional P(target y | source z) by soft-counting
    the source probabilities, then scores the mean log-probability of the
    true labels under the composed predictor. Always <= 0.
    """
    labels = np.asarray(labels, dtype=np.int64)
    theta = preds.probs
    n = theta.shape[0]
    if labels.shape != (n,):
        raise DataError(f"labels must have shape ({n},), got {labels.shape}")
    k = int(labels.max()) + 1
    joint = np.zeros((k, theta.shape[1]))
    np.add.at(joint, labels, theta)
    marginal = joint.sum(axis=0)
    cond = joint / np.maximum(marginal, PROB_FLOOR)
    eep = (cond[labels] * theta).sum(axis=1)
    return float(np.log(np.maximum(eep, PROB_FLOOR)).mean())


def nce(source_hard_labels: np.ndarray, labels: np.ndarray) -> float:
    """Negative conditional entropy -H(Y | Z) of the empirical joint.

    Z are hard source assignments (argmax of the source predictions, ties
    broken toward the lowest index by the caller). 0 is the best value,
    reached whenever Y is a deterministic function of Z.
    """
    z = np.asarray(source_hard_labels, dtype=np.int64)
    y = np.asarray(labels, dtype=np.int64)
    if z.size == 0 or z.shape != y.shape:
        raise DataError("need two equal-length nonempty label vectors")
    n = z.size
    nz = int(z.max()) + 1
    ny = int(y.max()) + 1
    joint = np.zeros((nz, ny))
    np.add.at(joint, (z, y), 1.0)
    joint /= n
    pz = joint.sum(axis=1, keepdims=True)
    cond = joint / np.maximum(pz, PROB_FLOOR)
    log_cond = np.log(np.maximum(cond, PROB_FLOOR))
    h_y_given_z = -float((joint * np.where(joint > 0, log_cond, 0.0)).sum())
    return -h_y_given_z


def _logme_column(s2, z, y2, n, d, tol=LOGME_TOL, max_iter=LOGME_MAX_ITER):
    """Evidence maximization for one regression target.

    s2: squared singular values of the feature matrix; z: target projected
    onto the left singular vectors; y2: squared norm of the target.
    Alternates fixed-point updates of (alpha, beta) until the per-sample log
    evidence moves less than tol. Returns (evidence, converged).

    When the target is (numerically) perfectly fit the evidence is unbounded
    in beta; that is detected through a scale-aware residual floor and
    reported as non-convergence with the last finite iterate.
    """
    alpha, beta = 1.0, 1.0
    r = s2.size
    resid_null = y2 - float(z @ z)  # component outside the feature span
    resid_floor = 1e-10 * max(y2, 1e-300)
    evidence = None
    for _ in range(max_iter):
        denom = alpha + beta * s2
        m2 = float(np.sum((beta * np.sqrt(s2) * z / denom) ** 2))
        resid = float(np.sum((alpha * z / denom) ** 2)) + resid_null
        gamma = float(np.sum(beta * s2 / denom))
        logdet = float(np.sum(np.log(denom))) + (d - r) * np.log(alpha)
        ev = (n * np.log(beta) + d * np.log(alpha) - n * np.log(2 * np.pi)
              - beta * max(resid, 0.0) - alpha * m2 - logdet) / (2 * n)
        if not np.isfinite(ev):
            return evidence if evidence is not None else -np.inf, False
        if evidence is not None and abs(ev - evidence) < tol:
            return ev, True
        evidence = ev
        if resid <= resid_floor:  # perfect fit, evidence unbounded in beta
            return evidence, False
        alpha_new = gamma / max(m2, 1e-300)
        beta_new = (n - gamma) / resid
        if not (np.isfinite(alpha_new) and np.isfinite(beta_new)
                and alpha_new > 0 and beta_new > 0):
            return evidence, False
        alpha, beta = alpha_new, beta_new
    return evidence, False


def logme(fs: FeatureSet, flags: list | None = None) -> float:
    """Mean per-sample log marginal evidence of Bayesian linear regression.

    Each class's one-hot indicator vector is regressed on the features; the
    per-class evidences (each already divided by n) are averaged. Columns
    whose fixed point fails to settle within the iteration cap keep their
    last iterate and add a diagnostic flag.
    """
    f = fs.features
    n, d = f.shape
    u, s, _ = np.linalg.svd(f, full_matrices=False)
    s2 = s**2
    evidences = []
    for k in range(fs.k_count):
        y = (fs.labels == k).astype(np.float64)
        ev, converged = _logme_column(s2, u.T @ y, float(y @ y), n, d)
        if not converged and flags is not None:
            flags.append(f"logme_nonconverged_class_{k}")
        evidences.append(ev)
    return float(np.mean(evidences))


def hscore(fs: FeatureSet, rel_tol: float = PINV_REL_TOL) -> float:
    """trace(pinv(cov(features)) @ cov(class-mean-replaced features)).

    Both covariances are population-normalized around the global mean; the
    pseudo-inverse keeps the score finite for rank-deficient features.
    """
    f = fs.features
    n = f.shape[0]
    mean = f.mean(axis=0)
    centered = f - mean
    cov = centered.T @ centered / n

    k = fs.k_count
    class_means = np.zeros((k, f.shape[1]))
    np.add.at(class_means, fs.labels, f)
    counts = np.bincount(fs.labels, minlength=k)
    class_means /= counts[:, None]
    g = class_means[fs.labels] - mean
    cov_between = g.T @ g / n

    h = float(np.trace(pinv_psd(cov, rel_tol) @ cov_between))
    return max(h, 0.0)


def gbc(om: OverlapMatrix) -> float:
    """Negative sum of Bhattacharyya coefficients over unordered class pairs.

    Bounded in [-K(K-1)/2, 0); approaches 0 as classes separate.
    """
    b = om.coefficients
    k = b.shape[0]
    iu = np.triu_indices(k, 1)
    return -float(b[iu].sum())
