"""Deterministic synthetic Gaussian zoos with planted quality ordering.

Class means sit at the vertices of a regular simplex scaled so the pairwise
distance equals ``separation``. ``fairness_skew`` slides one mean toward its
neighbor and then rescales the centered configuration back to the unskewed
between-class energy, so skew redistributes the class geometry without
changing its overall scale (separation and skew stay independent knobs).

Sampling is reproducible down to the byte across platforms: the stream is
Philox-4x64-10 keyed by (seed, blake2b-64 of the packed spec parameters),
uniforms are (raw >> 11) * 2**-53, and normals come from an explicit
Box-Muller transform of consecutive uniform pairs.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DataError
from .linalg import FeatureSet
from .zoo import ZooConfig, ZooEntry, ZooManifest, write_features, write_manifest

# Default level ladder for generated zoos. Quality q in [0, 1] raises
# separation, lowers noise, and removes skew. The design keeps every level
# in the heavily-overlapping regime (separation/noise ratio near 0.6),
# where both the collapse score and the fairness score respond to skew in
# the quality direction; the separation/noise drift is kept mild because a
# rising ratio pushes the fairness score the other way. The skew anchors
# were solved offline to equalize the fused-score gap between adjacent
# levels on the exact (population) response curves.
LADDER_RATIO = (0.600, 0.615)  # separation / noise_sigma
LADDER_NOISE = (2.002, 1.998)
LADDER_SKEW_ANCHORS = (0.80, 0.774, 0.739, 0.689, 0.623, 0.538, 0.423, 0.15)


@dataclass
class SynthSpec:
    """Parameters of one synthetic embedding set."""

    k_count: int = 4
    dim: int = 8
    samples_per_class: int = 150
    separation: float = 1.2
    noise_sigma: float = 2.0
    fairness_skew: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.k_count < 2:
            raise DataError(f"need k_count >= 2, got {self.k_count}")
        if self.samples_per_class < 2:
            raise DataError(
                f"need samples_per_class >= 2, got {self.samples_per_class}")
        if self.dim < 1:
            raise DataError(f"need dim >= 1, got {self.dim}")
        if not (self.separation > 0 and np.isfinite(self.separation)):
            raise DataError(f"separation must be positive, got {self.separation}")
        if not (self.noise_sigma >= 0 and np.isfinite(self.noise_sigma)):
            raise DataError(
                f"noise_sigma must be non-negative, got {self.noise_sigma}")
        if not (0.0 <= self.fairness_skew <= 1.0):
            raise DataError(
                f"fairness_skew must lie in [0, 1], got {self.fairness_skew}")
        if not (0 <= self.seed < 2**64):
            raise DataError("seed must fit in an unsigned 64-bit integer")


def _param_digest(spec: SynthSpec) -> int:
    packed = struct.pack(
        "<QQQddd",
        spec.k_count, spec.dim, spec.samples_per_class,
        spec.separation, spec.noise_sigma, spec.fairness_skew,
    )
    return int.from_bytes(
        hashlib.blake2b(packed, digest_size=8).digest(), "little")


def _standard_normals(spec: SynthSpec, count: int) -> np.ndarray:
    bitgen = np.random.Philox(
        key=np.array([spec.seed, _param_digest(spec)], dtype=np.uint64))
    pairs = (count + 1) // 2
    raw = bitgen.random_raw(2 * pairs)
    u = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53
    u1, u2 = u[:pairs], u[pairs:]
    radius = np.sqrt(-2.0 * np.log1p(-u1))  # 1 - u1 in (0, 1], log stays finite
    angle = 2.0 * np.pi * u2
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:count]


def _simplex_means(k: int, dim: int) -> np.ndarray:
    """K unit-pairwise-distance-normalized simplex vertices, zero-padded to dim."""
    if dim < k - 1:
        raise DataError(
            f"a {k}-class simplex needs dim >= {k - 1}, got dim={dim}")
    # orthonormal Helmert-style basis of the centered subspace of R^k
    basis = np.zeros((k - 1, k))
    for r in range(1, k):
        basis[r - 1, :r] = 1.0
        basis[r - 1, r] = -r
        basis[r - 1] /= np.sqrt(r * (r + 1))
    vertices = np.eye(k) - 1.0 / k
    coords = vertices @ basis.T  # (k, k-1), pairwise distance sqrt(2)
    coords /= np.sqrt(2.0)
    means = np.zeros((k, dim))
    means[:, : k - 1] = coords
    return means


def planted_means(spec: SynthSpec) -> np.ndarray:
    """Class mean configuration: scaled simplex, skewed, scale-restored."""
    means = _simplex_means(spec.k_count, spec.dim) * spec.separation
    if spec.fairness_skew > 0.0:
        energy = float(np.sum(means**2))  # already centered at the origin
        means = means.copy()
        means[0] = (1.0 - spec.fairness_skew) * means[0] \
            + spec.fairness_skew * means[1]
        centered = means - means.mean(axis=0)
        skew_energy = float(np.sum(centered**2))
        means = centered * np.sqrt(energy / skew_energy)
    return means


def gen_featureset(spec: SynthSpec) -> FeatureSet:
    """Draw the synthetic embedding set described by ``spec``.

    Samples are grouped by class (labels 0,...,0,1,...,1,...); identical
    specs produce bit-identical arrays.
    """
    means = planted_means(spec)
    k, d, spc = spec.k_count, spec.dim, spec.samples_per_class
    noise = _standard_normals(spec, k * spc * d).reshape(k * spc, d)
    labels = np.repeat(np.arange(k), spc)
    features = means[labels] + spec.noise_sigma * noise
    return FeatureSet(
        features=features,
        labels=labels,
        k_count=k,
        model_id=f"synth-k{k}-d{d}-seed{spec.seed}",
    )


def default_quality_levels(count: int) -> list[tuple[float, float, float]]:
    """Monotone (separation, noise_sigma, fairness_skew) ladder.

    Level quality strictly increases: separation rises while noise and skew
    fall. Index 0 is the worst model, index count-1 the best. Skew values
    interpolate the solved 8-level anchors.
    """
    if count < 2:
        raise DataError(f"need at least 2 levels, got {count}")
    qs = np.linspace(0.0, 1.0, count)
    anchor_qs = np.linspace(0.0, 1.0, len(LADDER_SKEW_ANCHORS))
    skews = np.interp(qs, anchor_qs, LADDER_SKEW_ANCHORS)
    levels = []
    for q, skew in zip(qs, skews):
        noise = LADDER_NOISE[0] + (LADDER_NOISE[1] - LADDER_NOISE[0]) * q
        ratio = LADDER_RATIO[0] + (LADDER_RATIO[1] - LADDER_RATIO[0]) * q
        levels.append((float(ratio * noise), float(noise), float(skew)))
    return levels


def gen_zoo(base: SynthSpec,
            quality_levels: list[tuple[float, float, float]],
            out_dir) -> ZooManifest:
    """Write one FEAT file per quality level plus a manifest.

    The planted accuracy proxy of level i is i / (levels - 1). Levels with
    identical parameters produce identical files (the sampling stream is
    keyed by the parameters, not the level index).
    """
    if len(quality_levels) < 2:
        raise DataError(f"need at least 2 quality levels, got {len(quality_levels)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (sep, noise, skew) in enumerate(quality_levels):
        spec = replace(base, separation=sep, noise_sigma=noise,
                       fairness_skew=skew)
        fs = gen_featureset(spec)
        feat_path = out_dir / f"level_{i:02d}.feat"
        write_features(fs, feat_path, dtype="f32")
        entries.append(ZooEntry(
            model_id=f"synth-level-{i:02d}",
            feature_path=feat_path,
            accuracy=i / (len(quality_levels) - 1),
        ))
    manifest = ZooManifest(entries=entries, target_name="synthetic",
                           config=ZooConfig())
    write_manifest(manifest, out_dir / "manifest.json")
    return manifest
