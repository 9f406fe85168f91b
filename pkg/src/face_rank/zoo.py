"""Feature-file ingestion, zoo manifests, and report serialization.

FEAT binary layout (all little-endian):

    offset  size  field
    0       4     magic, the ASCII bytes "FACE"
    4       2     version, u16, currently 1
    6       1     dtype, u8: 0 = float32, 1 = float64
    7       1     reserved, u8, written as 0
    8       8     n, u64, number of rows
    16      8     d, u64, number of columns
    24      n*d*itemsize   feature values, row-major
    ...     n*4   labels, u32

Prediction files reuse the same container with d = Z probability columns.
CSV files carry a header row of feature column names ending in a final
``label`` column and are the hand-fixture path.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .correlation import CorrelationReport
from .errors import DataError, FaceRankError, FeatFormatError, ManifestError
from .linalg import LOGDET_FLOOR, PINV_REL_TOL, FeatureSet
from .baselines import SourcePredictions
from .metrics import DEFAULT_TEMPERATURE, ScoreReport

FEAT_MAGIC = b"FACE"
FEAT_VERSION = 1
_HEADER = struct.Struct("<4sHBBQQ")
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_CODES = {"f32": 0, "f64": 1}

BASELINE_ORDER = ("leep", "nce", "logme", "hscore", "gbc", "etf")


# ---------------------------------------------------------------------------
# FEAT / CSV feature files


def _remap_labels(raw_labels: np.ndarray):
    values, dense = np.unique(raw_labels, return_inverse=True)
    return dense.astype(np.int64), values


def write_features(fs: FeatureSet, path, dtype: str = "f32") -> None:
    """Write a FeatureSet as a FEAT file; labels are the dense ids."""
    if dtype not in _DTYPE_CODES:
        raise ValueError(f"dtype must be 'f32' or 'f64', got {dtype!r}")
    write_matrix(fs.features, fs.labels, path, dtype=dtype)


def write_matrix(matrix: np.ndarray, labels: np.ndarray, path,
                 dtype: str = "f32") -> None:
    """Write an arbitrary n x d matrix plus u32 labels in FEAT layout."""
    matrix = np.asarray(matrix)
    labels = np.asarray(labels)
    n, d = matrix.shape
    code = _DTYPE_CODES[dtype]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FEAT_MAGIC, FEAT_VERSION, code, 0, n, d))
        fh.write(np.ascontiguousarray(matrix, dtype=_DTYPES[code]).tobytes())
        fh.write(np.ascontiguousarray(labels, dtype="<u4").tobytes())


def _read_feat(path) -> tuple[np.ndarray, np.ndarray]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FeatFormatError(
            f"file too short for a FEAT header ({len(data)} bytes)",
            offset=len(data),
        )
    magic, version, dtype_code, _, n, d = _HEADER.unpack_from(data)
    if magic != FEAT_MAGIC:
        raise FeatFormatError(
            f"bad magic {magic!r}, expected {FEAT_MAGIC!r}", offset=0)
    if version != FEAT_VERSION:
        raise FeatFormatError(
            f"unsupported FEAT version {version}, expected {FEAT_VERSION}",
            offset=4,
        )
    if dtype_code not in _DTYPES:
        raise FeatFormatError(f"unknown dtype code {dtype_code}", offset=6)
    dt = _DTYPES[dtype_code]
    feat_bytes = n * d * dt.itemsize
    expected = _HEADER.size + feat_bytes + n * 4
    if len(data) != expected:
        raise FeatFormatError(
            f"payload is {len(data)} bytes, expected {expected} "
            f"for n={n}, d={d}",
            offset=min(len(data), expected),
        )
    feats = np.frombuffer(
        data, dtype=dt, count=n * d, offset=_HEADER.size
    ).reshape(n, d)
    labels = np.frombuffer(
        data, dtype="<u4", count=n, offset=_HEADER.size + feat_bytes
    )
    return feats.astype(np.float64), labels.astype(np.int64)


def _read_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FeatFormatError("empty CSV file")
    header = [h.strip() for h in rows[0]]
    if not header or header[-1] != "label":
        raise FeatFormatError(
            "CSV header must end with a 'label' column, got "
            f"{header[-1] if header else '<empty>'!r}"
        )
    d = len(header) - 1
    if d < 1:
        raise FeatFormatError("CSV has no feature columns")
    feats = np.empty((len(rows) - 1, d))
    labels = np.empty(len(rows) - 1, dtype=np.int64)
    for i, row in enumerate(rows[1:]):
        if len(row) != d + 1:
            raise FeatFormatError(
                f"CSV row {i + 2} has {len(row)} fields, expected {d + 1}")
        try:
            feats[i] = [float(v) for v in row[:d]]
            labels[i] = int(row[d])
        except ValueError as exc:
            raise FeatFormatError(f"CSV row {i + 2}: {exc}") from exc
    return feats, labels


def load_features(path, model_id: str = "") -> FeatureSet:
    """Load a FEAT or CSV feature file into a validated FeatureSet.

    Labels are remapped onto the dense range [0, K-1] in increasing order
    of the original values; the originals are kept on ``label_values``.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        feats, raw_labels = _read_csv(path)
    else:
        feats, raw_labels = _read_feat(path)
    if not np.isfinite(feats).all():
        bad = np.argwhere(~np.isfinite(feats))[0]
        raise DataError(
            f"non-finite feature value at row {bad[0]}, column {bad[1]} "
            f"in {path.name}"
        )
    labels, values = _remap_labels(raw_labels)
    if values.size < 2:
        raise DataError(f"{path.name} contains a single class")
    return FeatureSet(
        features=feats,
        labels=labels,
        k_count=int(values.size),
        model_id=model_id or path.stem,
        label_values=values,
    )


def load_predictions(path) -> SourcePredictions:
    """Load a FEAT prediction file (rows are source-class probabilities)."""
    probs, _ = _read_feat(path)
    if not np.isfinite(probs).all():
        raise DataError(f"non-finite probability in {Path(path).name}")
    return SourcePredictions(probs=probs, source_class_count=probs.shape[1])


# ---------------------------------------------------------------------------
# Manifests


@dataclass
class ZooConfig:
    cov_mode: str = "diagonal"
    temperature: float = DEFAULT_TEMPERATURE
    pinv_rel_tol: float = PINV_REL_TOL
    logdet_floor: float = LOGDET_FLOOR


@dataclass
class ZooEntry:
    model_id: str
    feature_path: Path
    prediction_path: Path | None = None
    accuracy: float | None = None


@dataclass
class ZooManifest:
    entries: list[ZooEntry]
    target_name: str = ""
    config: ZooConfig = field(default_factory=ZooConfig)


_CONFIG_KEYS = {"cov_mode", "temperature", "pinv_rel_tol", "logdet_floor"}
_ENTRY_KEYS = {"model_id", "feature_path", "prediction_path", "accuracy"}


def load_manifest(path) -> ZooManifest:
    """Parse and validate a zoo manifest JSON document.

    Relative file paths are resolved against the manifest's directory.
    Defaults: cov_mode=diagonal, temperature=0.05.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot parse manifest {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestError("manifest root must be a JSON object")
    unknown = set(doc) - {"target_name", "config", "entries"}
    if unknown:
        raise ManifestError(f"unknown manifest keys: {sorted(unknown)}")

    target_name = doc.get("target_name", "")
    if not isinstance(target_name, str):
        raise ManifestError("target_name must be a string")

    cfg_doc = doc.get("config", {})
    if not isinstance(cfg_doc, dict):
        raise ManifestError("config must be a JSON object")
    unknown = set(cfg_doc) - _CONFIG_KEYS
    if unknown:
        raise ManifestError(f"unknown config keys: {sorted(unknown)}")
    config = ZooConfig(
        cov_mode=cfg_doc.get("cov_mode", "diagonal"),
        temperature=float(cfg_doc.get("temperature", DEFAULT_TEMPERATURE)),
        pinv_rel_tol=float(cfg_doc.get("pinv_rel_tol", PINV_REL_TOL)),
        logdet_floor=float(cfg_doc.get("logdet_floor", LOGDET_FLOOR)),
    )
    if config.cov_mode not in ("diagonal", "full"):
        raise ManifestError(f"config.cov_mode must be 'diagonal' or 'full', "
                            f"got {config.cov_mode!r}")
    if not config.temperature > 0:
        raise ManifestError("config.temperature must be > 0")

    entries_doc = doc.get("entries")
    if not isinstance(entries_doc, list) or not entries_doc:
        raise ManifestError("manifest needs a nonempty 'entries' list")
    base = path.parent
    entries = []
    seen = set()
    for i, e in enumerate(entries_doc):
        if not isinstance(e, dict):
            raise ManifestError(f"entry {i} must be a JSON object")
        unknown = set(e) - _ENTRY_KEYS
        if unknown:
            raise ManifestError(f"entry {i}: unknown keys {sorted(unknown)}")
        model_id = e.get("model_id")
        if not isinstance(model_id, str) or not model_id:
            raise ManifestError(f"entry {i}: model_id must be a nonempty string")
        if model_id in seen:
            raise ManifestError(f"duplicate model_id {model_id!r}")
        seen.add(model_id)
        if "feature_path" not in e:
            raise ManifestError(f"entry {model_id!r}: feature_path is required")
        feature_path = base / e["feature_path"]
        if not feature_path.is_file():
            raise ManifestError(
                f"entry {model_id!r}: feature file not found: {feature_path}")
        prediction_path = None
        if e.get("prediction_path") is not None:
            prediction_path = base / e["prediction_path"]
            if not prediction_path.is_file():
                raise ManifestError(
                    f"entry {model_id!r}: prediction file not found: "
                    f"{prediction_path}")
        accuracy = e.get("accuracy")
        if accuracy is not None:
            accuracy = float(accuracy)
            if not (0.0 <= accuracy <= 1.0):
                raise ManifestError(
                    f"entry {model_id!r}: accuracy {accuracy} outside [0, 1]")
        entries.append(ZooEntry(model_id=model_id, feature_path=feature_path,
                                prediction_path=prediction_path,
                                accuracy=accuracy))
    return ZooManifest(entries=entries, target_name=target_name, config=config)


def write_manifest(manifest: ZooManifest, path) -> None:
    """Serialize a manifest; file paths are written relative to ``path``."""
    path = Path(path)
    doc = {
        "target_name": manifest.target_name,
        "config": {
            "cov_mode": manifest.config.cov_mode,
            "temperature": manifest.config.temperature,
        },
        "entries": [],
    }
    for e in manifest.entries:
        entry = {
            "model_id": e.model_id,
            "feature_path": _relative_to(e.feature_path, path.parent),
        }
        if e.prediction_path is not None:
            entry["prediction_path"] = _relative_to(e.prediction_path, path.parent)
        if e.accuracy is not None:
            entry["accuracy"] = e.accuracy
        doc["entries"].append(entry)
    path.write_text(json.dumps(doc, indent=2) + "\n")


def _relative_to(target: Path, base: Path) -> str:
    try:
        return str(Path(target).relative_to(base))
    except ValueError:
        return str(target)


# ---------------------------------------------------------------------------
# Reports


def _rank_key(r: ScoreReport):
    primary = r.face
    if primary is None:
        primary = r.norm_c if r.norm_c is not None else r.norm_f
    if primary is None:
        primary = r.raw_c if r.raw_c is not None else r.raw_f
    if primary is None:
        return (1, 0.0, r.model_id)
    return (0, -primary, r.model_id)


def rank_reports(reports: list[ScoreReport]) -> list[ScoreReport]:
    """Order reports by descending fused score, ties by model_id."""
    return sorted(reports, key=_rank_key)


def _report_dict(r: ScoreReport) -> dict:
    out = {"model_id": r.model_id}
    for name in ("face", "norm_c", "norm_f", "raw_c", "raw_f"):
        value = getattr(r, name)
        if value is not None:
            out[name] = value
    if r.baselines:
        out["baselines"] = {
            k: r.baselines[k] for k in BASELINE_ORDER if k in r.baselines
        }
        # anything nonstandard, in name order
        extras = sorted(set(r.baselines) - set(BASELINE_ORDER))
        for k in extras:
            out["baselines"][k] = r.baselines[k]
    if r.degenerate_flags:
        out["degenerate_flags"] = list(r.degenerate_flags)
    if r.error is not None:
        out["error"] = r.error
    return out


def _corr_dict(corr: CorrelationReport) -> dict:
    return {
        "tau_w": corr.tau_w,
        "pearson": corr.pearson,
        "model_count": corr.model_count,
        "excluded_missing_accuracy": corr.excluded_missing_accuracy,
        "weighting": corr.weighting,
        "per_metric": corr.per_metric,
    }


def _fmt6(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def emit_report(reports: list[ScoreReport],
                corr: CorrelationReport | None = None,
                fmt: str = "json",
                target_name: str = "",
                config: dict | None = None) -> bytes:
    """Serialize ranked score reports (and optional correlations).

    JSON keeps full float precision and omits absent fields; CSV renders
    floats with 6 significant digits and leaves absent cells empty.
    """
    if not reports:
        raise FaceRankError("nothing to report")
    ranked = rank_reports(reports)
    if fmt == "json":
        doc = {"target_name": target_name}
        if config:
            doc["config"] = config
        doc["models"] = [_report_dict(r) for r in ranked]
        if corr is not None:
            doc["correlation"] = _corr_dict(corr)
        return (json.dumps(doc, indent=2) + "\n").encode()
    if fmt == "csv":
        score_cols = [c for c in ("face", "norm_c", "norm_f", "raw_c", "raw_f")
                      if any(getattr(r, c) is not None for r in ranked)]
        base_cols = [b for b in BASELINE_ORDER
                     if any(b in r.baselines for r in ranked)]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["model_id", *score_cols, *base_cols, "flags", "error"])
        for r in ranked:
            row = [r.model_id]
            row += [_fmt6(getattr(r, c)) for c in score_cols]
            row += [_fmt6(r.baselines.get(b)) for b in base_cols]
            row.append(";".join(r.degenerate_flags))
            row.append(r.error or "")
            writer.writerow(row)
        if corr is not None:
            writer.writerow([])
            writer.writerow(["metric", "tau_w", "pearson"])
            for name, stats in corr.per_metric.items():
                writer.writerow([name, _fmt6(stats.get("tau_w")),
                                 _fmt6(stats.get("pearson"))])
        return buf.getvalue().encode()
    raise ValueError(f"format must be 'json' or 'csv', got {fmt!r}")


def emit_correlation(corr: CorrelationReport, fmt: str = "json") -> bytes:
    """Serialize a correlation report on its own."""
    if fmt == "json":
        return (json.dumps(_corr_dict(corr), indent=2) + "\n").encode()
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["metric", "tau_w", "pearson"])
        for name, stats in corr.per_metric.items():
            writer.writerow([name, _fmt6(stats.get("tau_w")),
                             _fmt6(stats.get("pearson"))])
        return buf.getvalue().encode()
    raise ValueError(f"format must be 'json' or 'csv', got {fmt!r}")
