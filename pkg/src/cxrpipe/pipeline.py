"""Experiment orchestration: preprocess cache, per-fold runs, reports.

The preprocessed cache holds one PGM per sample, named by a content
hash of the source bytes and the preprocessing parameters, so re-runs
skip up-to-date entries and parameter changes invalidate cleanly.
Augmented images are never written anywhere: augmentation happens
on the fly inside training only.

Every output byte is a function of (config, manifest, image bytes,
seed), with one documented exception: the timing section of run.json
records wall-clock durations.
"""

import concurrent.futures
import json
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .backend import backend_handshake, backend_predict, backend_train, launch_backend
from .classifier import TrainResult, predict_proba_batch, train
from .config import ExperimentConfig
from .dataset import ClassLabel, FoldPlan, Manifest, load_manifest, make_splits, stratified_kfold
from .errors import ConfigError, DataError, PipelineError
from .evaluation import (
    MetricsReport,
    RocCurve,
    aggregate_folds,
    confusion_matrix,
    fold_report,
    roc_curve,
)
from .imaging import GrayImage, clahe, load_pgm, resize_preserve_aspect, save_pgm

CACHE_MAXVAL = 65535
FEATURE_GRID = 32


@dataclass(frozen=True)
class CacheIndex:
    """Manifest plus the cache file backing each sample index."""

    manifest: Manifest
    cache_paths: tuple[Path, ...]
    written: int
    skipped: int


class ImageStore:
    """Lazy reader over the preprocessed cache with an access log.

    The log is how the pipeline proves that no test-fold image is read
    while training that fold.
    """

    def __init__(self, index: CacheIndex):
        self._index = index
        self._images: dict[int, GrayImage] = {}
        self.accessed: set[int] = set()

    def __len__(self) -> int:
        return len(self._index.manifest)

    def image(self, i: int) -> GrayImage:
        self.accessed.add(i)
        if i not in self._images:
            self._images[i] = load_pgm(self._index.cache_paths[i].read_bytes())
        return self._images[i]

    def label(self, i: int) -> ClassLabel:
        return self._index.manifest.samples[i][1]

    def path(self, i: int) -> Path:
        return self._index.cache_paths[i]


def _cache_name(source_bytes: bytes, config: ExperimentConfig) -> str:
    import hashlib

    params = (
        f"side={config.image_side};tiles={config.clahe.tile_rows}x{config.clahe.tile_cols};"
        f"clip={config.clahe.clip_factor!r};bins={config.clahe.n_bins};"
        f"maxval={CACHE_MAXVAL};v1"
    )
    digest = hashlib.sha256(source_bytes + params.encode("ascii")).hexdigest()
    return digest[:24] + ".pgm"


def _load_manifest_file(path: Path) -> Manifest:
    try:
        text = path.read_bytes().decode("utf-8")
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise DataError(f"manifest {path} is not UTF-8: {exc}") from exc
    return load_manifest(text)


def preprocess_corpus(config: ExperimentConfig) -> CacheIndex:
    """Resize + CLAHE every manifest image into the cache, idempotently.

    Failures are collected per path and raised together after the whole
    corpus is attempted, so one corrupt file cannot poison the cache
    entries of the others.
    """
    manifest = _load_manifest_file(config.manifest_path)
    manifest_dir = config.manifest_path.parent
    cache_dir = config.output_dir / "cache"
    cache_dir.mkdir(parents=True, exist_ok=True)

    cache_paths: list[Path] = []
    failures: list[str] = []
    written = skipped = 0
    index_rows = []
    for rel_path, label in manifest.samples:
        source_path = manifest_dir / rel_path
        try:
            source_bytes = source_path.read_bytes()
        except OSError as exc:
            failures.append(f"{source_path}: {exc}")
            cache_paths.append(cache_dir / "missing")
            continue
        target = cache_dir / _cache_name(source_bytes, config)
        cache_paths.append(target)
        index_rows.append((rel_path, label.csv_name, target.name))
        if target.exists():
            skipped += 1
            continue
        try:
            image = load_pgm(source_bytes)
            processed = clahe(resize_preserve_aspect(image, config.image_side), config.clahe)
        except PipelineError as exc:
            failures.append(f"{source_path}: {exc}")
            index_rows.pop()
            continue
        tmp = target.with_suffix(".tmp")
        tmp.write_bytes(save_pgm(processed, CACHE_MAXVAL))
        tmp.rename(target)
        written += 1

    if failures:
        raise DataError(
            f"preprocessing failed for {len(failures)} file(s); valid cache entries kept:\n  "
            + "\n  ".join(failures)
        )

    index_text = "path,label,cache_file\n" + "".join(
        f"{p},{lab},{name}\n" for p, lab, name in index_rows
    )
    index_path = cache_dir / "index.csv"
    if not index_path.exists() or index_path.read_text(encoding="utf-8") != index_text:
        index_path.write_text(index_text, encoding="utf-8", newline="\n")

    return CacheIndex(
        manifest=manifest, cache_paths=tuple(cache_paths), written=written, skipped=skipped
    )


@dataclass(frozen=True)
class FoldOutcome:
    fold_index: int
    report: MetricsReport
    duration_sec: float
    artifacts: tuple[str, ...]


@dataclass(frozen=True)
class RunRecord:
    tool_version: str
    config_digest: str
    manifest_digest: str
    k: int
    folds_run: tuple[int, ...]
    best_fold: int
    artifacts: tuple[str, ...]
    timing_sec: dict[str, float]


def _write_text(path: Path, text: str):
    path.write_text(text, encoding="utf-8", newline="\n")


def _format_pct(value: float) -> str:
    return f"{value * 100:.2f}"


def _write_confusion_csv(path: Path, counts: np.ndarray):
    names = [label.csv_name for label in ClassLabel]
    lines = ["true\\pred," + ",".join(names)]
    for c, name in enumerate(names):
        lines.append(name + "," + ",".join(str(int(v)) for v in counts[c]))
    _write_text(path, "\n".join(lines) + "\n")


def _write_roc_csv(path: Path, curve: RocCurve):
    lines = ["threshold,fpr,tpr"]
    for threshold, (fpr, tpr) in zip(curve.thresholds, curve.points):
        lines.append(f"{threshold:.10g},{fpr:.10g},{tpr:.10g}")
    _write_text(path, "\n".join(lines) + "\n")


def _write_train_log(path: Path, result: TrainResult):
    lines = ["epoch,train_loss,val_loss,val_accuracy"]
    for row in result.log:
        lines.append(
            f"{row.epoch},{row.train_loss:.12g},{row.val_loss:.12g},{row.val_accuracy:.12g}"
        )
    lines.append(f"# best_epoch={result.best_epoch}")
    _write_text(path, "\n".join(lines) + "\n")


def _write_metrics_csv(path: Path, fold_outcomes, aggregate):
    header = "fold,accuracy,macro_sensitivity,macro_specificity,macro_f1,macro_auc"
    lines = [header]
    for outcome in fold_outcomes:
        r = outcome.report
        lines.append(
            f"{outcome.fold_index},{_format_pct(r.accuracy)}%,{_format_pct(r.sensitivity)}%,"
            f"{_format_pct(r.specificity)}%,{_format_pct(r.f1)}%,{r.auc:.4f}"
        )
    cells = ["aggregate"]
    for name in ("accuracy", "sensitivity", "specificity", "f1"):
        stat = aggregate.stats[name]
        if stat.std is None:
            cells.append(f"{_format_pct(stat.mean)}%")
        else:
            cells.append(f"{_format_pct(stat.mean)}±{_format_pct(stat.std)}%")
    auc_stat = aggregate.stats["auc"]
    if auc_stat.std is None:
        cells.append(f"{auc_stat.mean:.4f}")
    else:
        cells.append(f"{auc_stat.mean:.4f}±{auc_stat.std:.4f}")
    lines.append(",".join(cells))
    _write_text(path, "\n".join(lines) + "\n")


def _run_fold(config: ExperimentConfig, index: CacheIndex, plan: FoldPlan, k: int) -> FoldOutcome:
    started = time.monotonic()
    splits = make_splits(plan, k)
    store = ImageStore(index)
    out_dir = config.output_dir
    artifacts = []

    if config.backend == "builtin":
        result = train(splits, store, config.train, config.augment, FEATURE_GRID)
        touched_test = store.accessed & set(splits.test)
        if touched_test:
            raise PipelineError(
                f"test-fold leak: indices {sorted(touched_test)} were read during training"
            )
        probs = predict_proba_batch(
            result.model, [store.image(i) for i in splits.test], FEATURE_GRID
        )
        log_path = out_dir / f"train_log_fold{k}.csv"
        _write_train_log(log_path, result)
        artifacts.append(log_path.name)
    else:
        with launch_backend(config.backend) as handle:
            backend_handshake(handle)
            backend_train(
                handle,
                [(str(store.path(i)), int(store.label(i))) for i in splits.train],
                [(str(store.path(i)), int(store.label(i))) for i in splits.validation],
            )
            rows = backend_predict(handle, [str(store.path(i)) for i in splits.test])
        probs = np.asarray(rows, dtype=np.float64)

    truth = [int(store.label(i)) for i in splits.test]
    predicted = probs.argmax(axis=1).tolist()
    cm = confusion_matrix(truth, predicted)
    report = fold_report(truth, predicted, probs)

    cm_path = out_dir / f"confusion_fold{k}.csv"
    _write_confusion_csv(cm_path, cm.counts)
    artifacts.append(cm_path.name)
    truth_arr = np.asarray(truth)
    for c in range(len(ClassLabel)):
        mask = truth_arr == c
        if not mask.any() or mask.all():
            warnings.warn(f"fold {k}: class {c} degenerate in test fold; ROC skipped")
            continue
        roc_path = out_dir / f"roc_fold{k}_class{c}.csv"
        _write_roc_csv(roc_path, roc_curve(probs[:, c], mask))
        artifacts.append(roc_path.name)

    return FoldOutcome(
        fold_index=k,
        report=report,
        duration_sec=time.monotonic() - started,
        artifacts=tuple(artifacts),
    )


def run_experiment(
    config: ExperimentConfig, jobs: int = 1, folds: list[int] | None = None
) -> RunRecord:
    """Run the full protocol: per-fold train/predict/evaluate, then aggregate.

    Folds run independently (optionally in parallel up to `jobs`); all
    randomness is keyed by (seed, fold, ...) so serial and parallel runs
    emit identical bytes.
    """
    total_start = time.monotonic()
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    index = preprocess_corpus(config)
    plan = stratified_kfold(index.manifest, config.k, config.global_seed)
    fold_list = list(range(config.k)) if folds is None else sorted(set(folds))
    for k in fold_list:
        if not 0 <= k < config.k:
            raise ConfigError(f"fold {k} out of range for K={config.k}")

    config.output_dir.mkdir(parents=True, exist_ok=True)
    outcomes: list[FoldOutcome] = []
    if jobs == 1:
        for k in fold_list:
            outcomes.append(_run_fold_wrapped(config, index, plan, k))
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_run_fold_wrapped, config, index, plan, k): k for k in fold_list}
            for future in concurrent.futures.as_completed(futures):
                outcomes.append(future.result())
    outcomes.sort(key=lambda o: o.fold_index)

    aggregate = aggregate_folds([o.report for o in outcomes])
    metrics_path = config.output_dir / "metrics.csv"
    _write_metrics_csv(metrics_path, outcomes, aggregate)

    best = max(outcomes, key=lambda o: (o.report.accuracy, -o.fold_index))
    artifacts = tuple(
        ["metrics.csv"] + [name for o in outcomes for name in o.artifacts]
    )
    record = RunRecord(
        tool_version=__version__,
        config_digest=config.config_digest,
        manifest_digest=index.manifest.source_digest,
        k=config.k,
        folds_run=tuple(fold_list),
        best_fold=best.fold_index,
        artifacts=artifacts,
        timing_sec={
            **{f"fold_{o.fold_index}": round(o.duration_sec, 3) for o in outcomes},
            "total": round(time.monotonic() - total_start, 3),
        },
    )
    run_payload = {
        "tool_version": record.tool_version,
        "config_digest": record.config_digest,
        "manifest_digest": record.manifest_digest,
        "k": record.k,
        "folds_run": list(record.folds_run),
        "best_fold": record.best_fold,
        "artifacts": list(record.artifacts),
        "timing_sec": record.timing_sec,
    }
    _write_text(config.output_dir / "run.json", json.dumps(run_payload, indent=2, sort_keys=True) + "\n")
    return record


def _run_fold_wrapped(config, index, plan, k) -> FoldOutcome:
    try:
        return _run_fold(config, index, plan, k)
    except PipelineError as exc:
        raise type(exc)(f"fold {k}: {exc}") from exc
