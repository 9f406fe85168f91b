"""Command-line pipeline: score a zoo, evaluate correlations, generate data.

Subcommands:

* ``score``  per model: load features -> class statistics -> selected
  metrics; then fuse raw collapse/fairness scores across the zoo and emit a
  ranked report. A broken entry annotates its row instead of aborting.
* ``eval``   join a score report with manifest accuracies and report
  weighted Kendall / Pearson agreement per metric.
* ``gen``    write a synthetic zoo with a planted quality ordering.

Exit codes: 0 success, 1 fatal, 2 partial per-entry failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines as bl
from . import metrics as mt
from .correlation import CorrelationReport, pearson, weighted_kendall
from .errors import DegenerateInputError, EvaluationError, FaceRankError
from .linalg import class_statistics
from .synth import SynthSpec, default_quality_levels, gen_zoo
from .zoo import (
    ZooManifest,
    emit_correlation,
    emit_report,
    load_features,
    load_manifest,
    load_predictions,
)

ALL_METRICS = ("face", "vc", "cf", "leep", "nce", "logme", "hscore", "gbc", "etf")
DEFAULT_METRICS = ("face", "leep", "nce", "logme", "hscore", "gbc")

ENV_JOBS = "FACE_RANK_JOBS"
ENV_TEMPERATURE = "FACE_RANK_TEMPERATURE"


@dataclass
class RunConfig:
    command: str
    manifest_path: Path | None = None
    output_path: Path | None = None
    fmt: str = "json"
    metrics: tuple = DEFAULT_METRICS
    jobs: int = 1
    cov_mode: str | None = None
    temperature: float | None = None
    scores_path: Path | None = None
    gen_levels: int = 8
    gen_k: int = 3
    gen_dim: int = 2
    gen_spc: int = 2000
    gen_seed: int = 0
    out_dir: Path | None = None

    def __post_init__(self):
        if self.command == "score" and not self.metrics:
            raise FaceRankError("score needs a nonempty metric selection")
        unknown = set(self.metrics) - set(ALL_METRICS)
        if unknown:
            raise FaceRankError(f"unknown metrics: {sorted(unknown)}")


@dataclass
class _EntryResult:
    model_id: str
    raw_c: float | None = None
    raw_f: float | None = None
    baselines: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    error: str | None = None


def _score_entry(entry, metrics, config) -> _EntryResult:
    res = _EntryResult(model_id=entry.model_id)
    try:
        fs = load_features(entry.feature_path, model_id=entry.model_id)
        wants_c = "face" in metrics or "vc" in metrics
        wants_f = "face" in metrics or "cf" in metrics
        need_stats = wants_c or wants_f or "gbc" in metrics or "etf" in metrics
        stats = None
        if need_stats:
            stats = class_statistics(fs, cov_mode=config.cov_mode)
        if wants_c:
            res.raw_c = mt.variance_collapse(
                stats, flags=res.flags, rel_tol=config.pinv_rel_tol)
        om = None
        if wants_f or "gbc" in metrics:
            om = mt.overlap_matrix(stats, rel_tol=config.pinv_rel_tol,
                                   floor=config.logdet_floor)
        if wants_f:
            res.raw_f = mt.class_fairness(
                om, mt.FairnessConfig(temperature=config.temperature))
        if "gbc" in metrics:
            res.baselines["gbc"] = bl.gbc(om)
        if "hscore" in metrics:
            res.baselines["hscore"] = bl.hscore(fs, rel_tol=config.pinv_rel_tol)
        if "logme" in metrics:
            res.baselines["logme"] = bl.logme(fs, flags=res.flags)
        if "etf" in metrics:
            try:
                # negated so that larger means closer to the ETF ideal,
                # matching the higher-is-better convention of every metric
                res.baselines["etf"] = -mt.etf_distance(
                    stats.class_means, stats.global_mean)
            except DegenerateInputError:
                res.flags.append("etf_degenerate")
        if ("leep" in metrics or "nce" in metrics):
            if entry.prediction_path is None:
                res.flags.append("no_predictions")
            else:
                preds = load_predictions(entry.prediction_path)
                if preds.n != fs.n:
                    raise FaceRankError(
                        f"prediction rows ({preds.n}) != feature rows ({fs.n})")
                if "leep" in metrics:
                    res.baselines["leep"] = bl.leep(preds, fs.labels)
                if "nce" in metrics:
                    hard = np.argmax(preds.probs, axis=1)
                    res.baselines["nce"] = bl.nce(hard, fs.labels)
    except Exception as exc:  # per-entry fault isolation
        res.error = f"{type(exc).__name__}: {exc}"
    return res


def _config_echo(manifest: ZooManifest, cfg: RunConfig) -> dict:
    # jobs is deliberately not echoed: the report must not depend on how
    # the work was parallelized
    return {
        "cov_mode": manifest.config.cov_mode,
        "temperature": manifest.config.temperature,
        "pinv_rel_tol": manifest.config.pinv_rel_tol,
        "logdet_floor": manifest.config.logdet_floor,
        "metrics": sorted(cfg.metrics),
    }


def run_score(cfg: RunConfig) -> int:
    manifest = load_manifest(cfg.manifest_path)
    if cfg.cov_mode is not None:
        manifest.config.cov_mode = cfg.cov_mode
    if cfg.temperature is not None:
        manifest.config.temperature = cfg.temperature

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(
                lambda e: _score_entry(e, cfg.metrics, manifest.config),
                manifest.entries))
    else:
        results = [_score_entry(e, cfg.metrics, manifest.config)
                   for e in manifest.entries]

    ok = [r for r in results if r.error is None]
    wants_c = "face" in cfg.metrics or "vc" in cfg.metrics
    wants_f = "face" in cfg.metrics or "cf" in cfg.metrics
    norm_c = dict(zip(
        [r.model_id for r in ok],
        mt.minmax_rescale([r.raw_c for r in ok]) if (wants_c and ok) else [],
    ))
    norm_f = dict(zip(
        [r.model_id for r in ok],
        mt.minmax_rescale([r.raw_f for r in ok]) if (wants_f and ok) else [],
    ))

    reports = []
    for r in results:
        rep = mt.ScoreReport(model_id=r.model_id, raw_c=r.raw_c, raw_f=r.raw_f,
                             baselines=r.baselines,
                             degenerate_flags=r.flags, error=r.error)
        if r.error is None:
            rep.norm_c = norm_c.get(r.model_id)
            rep.norm_f = norm_f.get(r.model_id)
            if "face" in cfg.metrics and rep.norm_c is not None \
                    and rep.norm_f is not None:
                rep.face = rep.norm_c + rep.norm_f
        reports.append(rep)

    payload = emit_report(reports, fmt=cfg.fmt,
                          target_name=manifest.target_name,
                          config=_config_echo(manifest, cfg))
    cfg.output_path.write_bytes(payload)

    failures = len(results) - len(ok)
    for r in results:
        if r.error is not None:
            print(f"face-rank: {r.model_id}: {r.error}", file=sys.stderr)
    if not ok:
        return 1
    return 2 if failures else 0


def _metric_columns(model: dict) -> dict:
    cols = {}
    if "face" in model:
        cols["face"] = model["face"]
    if "raw_c" in model:
        cols["vc"] = model["raw_c"]
    if "raw_f" in model:
        cols["cf"] = model["raw_f"]
    for name, value in model.get("baselines", {}).items():
        cols[name] = value
    return cols


def run_eval(cfg: RunConfig) -> int:
    manifest = load_manifest(cfg.manifest_path)
    accuracies = {e.model_id: e.accuracy for e in manifest.entries
                  if e.accuracy is not None}
    try:
        doc = json.loads(Path(cfg.scores_path).read_text())
        models = doc["models"]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise FaceRankError(f"cannot read score report: {exc}") from exc

    scored = [m for m in models if "error" not in m]
    usable = [m for m in scored if m["model_id"] in accuracies]
    excluded = len(scored) - len(usable)
    if len(usable) < 2:
        raise EvaluationError(
            f"need >= 2 scored models with accuracy, have {len(usable)}")
    acc_all = [accuracies[m["model_id"]] for m in usable]
    if min(acc_all) == max(acc_all):
        raise EvaluationError("accuracies are constant; correlation undefined")

    per_metric = {}
    metric_names = []
    for m in usable:
        for name in _metric_columns(m):
            if name not in metric_names:
                metric_names.append(name)
    for name in metric_names:
        rows = [(cols[name], accuracies[m["model_id"]])
                for m in usable
                if name in (cols := _metric_columns(m))]
        if len(rows) < 2:
            per_metric[name] = {"error": "fewer than 2 models with this metric"}
            continue
        scores = [r[0] for r in rows]
        accs = [r[1] for r in rows]
        entry = {"tau_w": weighted_kendall(scores, accs),
                 "model_count": len(rows)}
        try:
            entry["pearson"] = pearson(scores, accs)
        except EvaluationError as exc:
            entry["pearson"] = None
            entry["pearson_error"] = str(exc)
        per_metric[name] = entry

    headline = "face" if "face" in per_metric else metric_names[0]
    corr = CorrelationReport(
        tau_w=per_metric[headline]["tau_w"],
        pearson=per_metric[headline].get("pearson"),
        model_count=len(usable),
        per_metric=per_metric,
        excluded_missing_accuracy=excluded,
    )
    cfg.output_path.write_bytes(emit_correlation(corr, fmt=cfg.fmt))
    return 0


def run_gen(cfg: RunConfig) -> int:
    base = SynthSpec(k_count=cfg.gen_k, dim=cfg.gen_dim,
                     samples_per_class=cfg.gen_spc, seed=cfg.gen_seed)
    levels = default_quality_levels(cfg.gen_levels)
    manifest = gen_zoo(base, levels, cfg.out_dir)
    print(f"face-rank: wrote {len(manifest.entries)} levels to {cfg.out_dir}")
    return 0


def _env_int(name: str, fallback: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return fallback
    try:
        return int(raw)
    except ValueError:
        raise FaceRankError(f"{name} must be an integer, got {raw!r}")


def _env_float(name: str) -> float | None:
    raw = os.environ.get(name)
    if raw is None:
        return None
    try:
        return float(raw)
    except ValueError:
        raise FaceRankError(f"{name} must be a number, got {raw!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="face-rank",
        description="Rank pre-trained models from precomputed embeddings.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_score = sub.add_parser("score", help="score every model in a zoo manifest")
    p_score.add_argument("--manifest", required=True, type=Path)
    p_score.add_argument("--out", required=True, type=Path)
    p_score.add_argument("--format", choices=("json", "csv"), default="json")
    p_score.add_argument("--metrics", default=",".join(DEFAULT_METRICS),
                         help="comma-separated subset of "
                              + ",".join(ALL_METRICS))
    p_score.add_argument("--cov-mode", choices=("diagonal", "full"))
    p_score.add_argument("--temperature", type=float)
    p_score.add_argument("--jobs", type=int)

    p_eval = sub.add_parser("eval", help="correlate scores with accuracies")
    p_eval.add_argument("--manifest", required=True, type=Path)
    p_eval.add_argument("--scores", required=True, type=Path)
    p_eval.add_argument("--out", required=True, type=Path)
    p_eval.add_argument("--format", choices=("json", "csv"), default="json")

    p_gen = sub.add_parser("gen", help="generate a synthetic zoo")
    p_gen.add_argument("--levels", type=int, default=8)
    p_gen.add_argument("--k", type=int, default=3)
    p_gen.add_argument("--dim", type=int, default=2)
    p_gen.add_argument("--spc", type=int, default=2000,
                       help="samples per class")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out-dir", required=True, type=Path)
    return parser


def parse_config(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    if args.command == "score":
        jobs = args.jobs if args.jobs is not None else _env_int(ENV_JOBS, 1)
        temperature = args.temperature
        if temperature is None:
            temperature = _env_float(ENV_TEMPERATURE)
        return RunConfig(
            command="score",
            manifest_path=args.manifest,
            output_path=args.out,
            fmt=args.format,
            metrics=tuple(m.strip() for m in args.metrics.split(",") if m.strip()),
            jobs=max(1, jobs),
            cov_mode=args.cov_mode,
            temperature=temperature,
        )
    if args.command == "eval":
        return RunConfig(command="eval", manifest_path=args.manifest,
                         scores_path=args.scores, output_path=args.out,
                         fmt=args.format)
    return RunConfig(command="gen", gen_levels=args.levels, gen_k=args.k,
                     gen_dim=args.dim, gen_spc=args.spc, gen_seed=args.seed,
                     out_dir=args.out_dir)


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
        if cfg.command == "score":
            return run_score(cfg)
        if cfg.command == "eval":
            return run_eval(cfg)
        return run_gen(cfg)
    except FaceRankError as exc:
        print(f"face-rank: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
