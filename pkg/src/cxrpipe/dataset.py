"""Manifest ingestion and stratified K-fold split construction.

The corpus is described by a CSV manifest (`path,label` header, one
sample per line, paths relative to the manifest's directory).  Folds are
built per class: indices are shuffled by a seeded stream and dealt
round-robin, which bounds every fold's per-class count between
floor(n_c/K) and ceil(n_c/K).
"""

import csv
import hashlib
import io
import warnings
from dataclasses import dataclass
from enum import IntEnum

from .errors import ConfigError, ManifestError
from .seeding import STREAM_KFOLD, keyed_rng


class ClassLabel(IntEnum):
    """The four pathology classes; the index order fixes matrix ordering."""

    COVID19 = 0
    NORMAL = 1
    VIRAL_PNEUMONIA = 2
    BACTERIAL_PNEUMONIA = 3

    @property
    def csv_name(self) -> str:
        return _LABEL_TO_NAME[self]


_NAME_TO_LABEL = {
    "covid19": ClassLabel.COVID19,
    "normal": ClassLabel.NORMAL,
    "viral": ClassLabel.VIRAL_PNEUMONIA,
    "bacterial": ClassLabel.BACTERIAL_PNEUMONIA,
}
_LABEL_TO_NAME = {label: name for name, label in _NAME_TO_LABEL.items()}


@dataclass(frozen=True)
class Manifest:
    """Ordered (path, label) samples plus a digest of the manifest bytes."""

    samples: tuple[tuple[str, ClassLabel], ...]
    source_digest: str

    def __len__(self) -> int:
        return len(self.samples)

    def class_counts(self) -> dict[ClassLabel, int]:
        counts = {label: 0 for label in ClassLabel}
        for _, label in self.samples:
            counts[label] += 1
        return counts


@dataclass(frozen=True)
class FoldPlan:
    """K disjoint index lists covering the manifest, plus the seed used."""

    k: int
    folds: tuple[tuple[int, ...], ...]
    seed: int


@dataclass(frozen=True)
class SplitAssignment:
    """Per-fold roles: held-out test fold, validation fold, training rest."""

    fold_index: int
    test: tuple[int, ...]
    validation: tuple[int, ...]
    train: tuple[int, ...]


def load_manifest(csv_content: str) -> Manifest:
    """Parse manifest CSV text; errors carry the offending line number."""
    digest = hashlib.sha256(csv_content.encode("utf-8")).hexdigest()
    reader = csv.reader(io.StringIO(csv_content))
    rows = list(reader)
    if not rows or [cell.strip() for cell in rows[0]] != ["path", "label"]:
        raise ManifestError("line 1: manifest header must be exactly 'path,label'")
    samples = []
    seen_paths = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 2:
            raise ManifestError(f"line {lineno}: expected 2 columns, found {len(row)}")
        path, raw_label = row[0].strip(), row[1].strip().lower()
        if not path:
            raise ManifestError(f"line {lineno}: empty path")
        if path in seen_paths:
            raise ManifestError(f"line {lineno}: duplicate path {path!r}")
        if raw_label not in _NAME_TO_LABEL:
            raise ManifestError(
                f"line {lineno}: unknown label {row[1].strip()!r} "
                f"(expected one of {sorted(_NAME_TO_LABEL)})"
            )
        seen_paths.add(path)
        samples.append((path, _NAME_TO_LABEL[raw_label]))
    return Manifest(samples=tuple(samples), source_digest=digest)


def stratified_kfold(manifest: Manifest, k: int, seed: int) -> FoldPlan:
    """Partition sample indices into K folds, stratified by class.

    Within each class the indices are shuffled by a stream keyed on
    (seed, class) and dealt round-robin, so every fold receives either
    floor(n_c/K) or ceil(n_c/K) samples of class c.  Classes with fewer
    than K samples are allowed but leave some folds without that class;
    a warning is emitted.
    """
    n = len(manifest)
    if k < 2 or k > n:
        raise ConfigError(f"fold count K={k} must satisfy 2 <= K <= {n} (sample count)")
    folds: list[list[int]] = [[] for _ in range(k)]
    for label in ClassLabel:
        class_indices = [i for i, (_, lab) in enumerate(manifest.samples) if lab == label]
        if not class_indices:
            continue
        if len(class_indices) < k:
            warnings.warn(
                f"class {label.csv_name} has {len(class_indices)} samples, fewer than "
                f"K={k}; some folds will not contain it",
                stacklevel=2,
            )
        rng = keyed_rng(STREAM_KFOLD, seed, int(label))
        order = rng.permutation(len(class_indices))
        for deal, pos in enumerate(order):
            folds[deal % k].append(class_indices[pos])
    return FoldPlan(k=k, folds=tuple(tuple(sorted(f)) for f in folds), seed=seed)


def make_splits(plan: FoldPlan, k: int) -> SplitAssignment:
    """Assign roles for fold k: test=fold k, validation=next fold cyclically."""
    if not 0 <= k < plan.k:
        raise ConfigError(f"fold index {k} out of range for K={plan.k}")
    val_index = (k + 1) % plan.k
    train = [
        i
        for j, fold in enumerate(plan.folds)
        if j not in (k, val_index)
        for i in fold
    ]
    return SplitAssignment(
        fold_index=k,
        test=plan.folds[k],
        validation=plan.folds[val_index],
        train=tuple(sorted(train)),
    )
