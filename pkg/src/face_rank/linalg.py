"""Covariance statistics and stable symmetric-matrix primitives.

Everything downstream (collapse scores, class overlaps, baselines) is built
on the quantities computed here: per-class and global means, within- and
between-class covariances, per-class covariances, plus a PSD pseudo-inverse
and a floored log-determinant that stay finite on rank-deficient input.

All covariances use population normalization (1/n_k), no Bessel correction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, MissingClassError, SymmetryError

SYMMETRY_ATOL = 1e-8
PINV_REL_TOL = 1e-10
LOGDET_FLOOR = 1e-12

COV_MODES = ("full", "diagonal")


@dataclass
class FeatureSet:
    """An n x d embedding matrix with dense integer class labels.

    Labels must cover every value in [0, k_count); use ``zoo.load_features``
    to remap sparse label ids from files. ``label_values`` records the
    original label value for each dense index when a remap happened.
    """

    features: np.ndarray
    labels: np.ndarray
    k_count: int
    model_id: str = ""
    label_values: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {self.features.shape}")
        n, d = self.features.shape
        if d < 1:
            raise DataError("feature dimension must be >= 1")
        if self.labels.shape != (n,):
            raise DataError(
                f"labels must have shape ({n},), got {self.labels.shape}"
            )
        if not np.isfinite(self.features).all():
            raise DataError("features contain non-finite values")
        k = int(self.k_count)
        if k < 2:
            raise DataError(f"need at least 2 classes, got k_count={k}")
        if n < k:
            raise DataError(f"need n >= K, got n={n}, K={k}")
        if self.labels.min() < 0 or self.labels.max() >= k:
            raise DataError(
                f"labels must lie in [0, {k - 1}], got range "
                f"[{self.labels.min()}, {self.labels.max()}]"
            )
        counts = np.bincount(self.labels, minlength=k)
        if (counts == 0).any():
            empty = int(np.flatnonzero(counts == 0)[0])
            raise MissingClassError(f"class {empty} has no samples")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass
class ClassStats:
    """Per-class and pooled first/second moments of a FeatureSet.

    ``sigma_k`` is (K, d, d) in full mode and (K, d) per-class diagonal
    variances in diagonal mode. ``sigma_w`` and ``sigma_b`` are always full
    d x d matrices.
    """

    global_mean: np.ndarray
    class_means: np.ndarray
    sigma_w: np.ndarray
    sigma_b: np.ndarray
    sigma_k: np.ndarray
    class_counts: np.ndarray
    cov_mode: str = "diagonal"
    flags: list = field(default_factory=list)

    @property
    def k_count(self) -> int:
        return self.class_means.shape[0]

    @property
    def dim(self) -> int:
        return self.class_means.shape[1]


def class_statistics(fs: FeatureSet, cov_mode: str = "diagonal") -> ClassStats:
    """Compute means and covariance statistics of an embedding set.

    sigma_w averages the per-class population covariances with equal class
    weight 1/K; sigma_b is the equally weighted scatter of class means
    around the global mean. Per-class covariances keep only the diagonal in
    diagonal mode.
    """
    if cov_mode not in COV_MODES:
        raise ValueError(f"cov_mode must be one of {COV_MODES}, got {cov_mode!r}")
    h = fs.features
    y = fs.labels
    k = fs.k_count
    n, d = h.shape

    counts = np.bincount(y, minlength=k)
    if (counts == 0).any():
        empty = int(np.flatnonzero(counts == 0)[0])
        raise MissingClassError(f"class {empty} has no samples")

    global_mean = h.mean(axis=0)
    class_means = np.zeros((k, d))
    np.add.at(class_means, y, h)
    class_means /= counts[:, None]

    sigma_w = np.zeros((d, d))
    if cov_mode == "full":
        sigma_k = np.zeros((k, d, d))
    else:
        sigma_k = np.zeros((k, d))
    for ki in range(k):
        centered = h[y == ki] - class_means[ki]
        cov_k = centered.T @ centered / counts[ki]
        cov_k = 0.5 * (cov_k + cov_k.T)
        sigma_w += cov_k
        if cov_mode == "full":
            sigma_k[ki] = cov_k
        else:
            sigma_k[ki] = np.diag(cov_k)
    sigma_w /= k

    centered_means = class_means - global_mean
    sigma_b = centered_means.T @ centered_means / k
    sigma_b = 0.5 * (sigma_b + sigma_b.T)

    return ClassStats(
        global_mean=global_mean,
        class_means=class_means,
        sigma_w=sigma_w,
        sigma_b=sigma_b,
        sigma_k=sigma_k,
        class_counts=counts,
        cov_mode=cov_mode,
    )


def _check_symmetric(m: np.ndarray, atol: float = SYMMETRY_ATOL) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise SymmetryError(f"expected a square matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise DataError("matrix contains non-finite values")
    if np.abs(m - m.T).max(initial=0.0) > atol:
        raise SymmetryError(f"matrix is not symmetric within {atol}")
    return 0.5 * (m + m.T)


def pinv_psd(m: np.ndarray, rel_tol: float = PINV_REL_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of a symmetric PSD matrix.

    Eigendecomposition based: eigenvalues below rel_tol * max eigenvalue are
    treated as exact zeros (their reciprocals set to 0). The zero matrix maps
    to the zero matrix.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    m = _check_symmetric(m)
    w, v = np.linalg.eigh(m)
    w_max = w.max(initial=0.0)
    if w_max <= 0.0:
        return np.zeros_like(m)
    inv_w = np.where(w > rel_tol * w_max, 1.0 / np.where(w > 0, w, 1.0), 0.0)
    return (v * inv_w) @ v.T


def log_det_psd(m: np.ndarray, floor: float = LOGDET_FLOOR) -> float:
    """Floored log-determinant of a symmetric PSD matrix.

    Returns sum(log(max(eigenvalue, floor))), which is always finite even
    for singular input. A 1-D array is interpreted as the diagonal of a
    diagonal matrix (the diagonal covariance mode).
    """
    if floor <= 0:
        raise ValueError("floor must be positive")
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 1:
        if not np.isfinite(m).all():
            raise DataError("diagonal contains non-finite values")
        return float(np.log(np.maximum(m, floor)).sum())
    m = _check_symmetric(m)
    w = np.linalg.eigvalsh(m)
    return float(np.log(np.maximum(w, floor)).sum())
