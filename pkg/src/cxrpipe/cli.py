"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 backend
error.
"""

import argparse
import csv
import sys

import numpy as np

from . import __version__
from .config import load_config
from .dataset import ClassLabel
from .errors import DataError, PipelineError
from .evaluation import confusion_matrix, fold_report
from .pipeline import preprocess_corpus, run_experiment

_LABEL_NAMES = {label.csv_name: int(label) for label in ClassLabel}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cxrpipe",
        description="Chest X-ray classification experiment pipeline",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_pre = sub.add_parser("preprocess", help="build the preprocessed image cache")
    p_pre.add_argument("--config", required=True, help="experiment config file")

    p_run = sub.add_parser("run", help="run the full cross-validated experiment")
    p_run.add_argument("--config", required=True, help="experiment config file")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel fold workers")
    p_run.add_argument("--folds", default=None, help="comma-separated fold subset, e.g. 0,3,7")

    p_eval = sub.add_parser(
        "evaluate", help="metrics over externally produced probability rows"
    )
    p_eval.add_argument("--pred", required=True, help="CSV with header p0,p1,p2,p3")
    p_eval.add_argument("--truth", required=True, help="CSV with header label")
    return parser


def _parse_folds(spec: str | None) -> list[int] | None:
    if spec is None:
        return None
    try:
        return [int(part) for part in spec.split(",") if part.strip() != ""]
    except ValueError:
        raise DataError(f"invalid --folds value {spec!r}") from None


def _read_csv(path: str, expected_header: list[str]) -> list[list[str]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows or [c.strip() for c in rows[0]] != expected_header:
        raise DataError(f"{path}: header must be exactly {','.join(expected_header)!r}")
    return [row for row in rows[1:] if any(cell.strip() for cell in row)]


def _cmd_evaluate(pred_path: str, truth_path: str) -> int:
    pred_rows = _read_csv(pred_path, ["p0", "p1", "p2", "p3"])
    truth_rows = _read_csv(truth_path, ["label"])
    if len(pred_rows) != len(truth_rows):
        raise DataError(
            f"{len(pred_rows)} prediction rows vs {len(truth_rows)} truth rows"
        )
    try:
        probs = np.array([[float(c) for c in row] for row in pred_rows])
    except ValueError as exc:
        raise DataError(f"{pred_path}: non-numeric probability: {exc}") from None
    truth = []
    for i, row in enumerate(truth_rows, start=2):
        name = row[0].strip().lower()
        if name in _LABEL_NAMES:
            truth.append(_LABEL_NAMES[name])
        elif name in {"0", "1", "2", "3"}:
            truth.append(int(name))
        else:
            raise DataError(f"{truth_path} line {i}: unknown label {row[0]!r}")

    predicted = probs.argmax(axis=1).tolist()
    report = fold_report(truth, predicted, probs)
    cm = confusion_matrix(truth, predicted)
    print(f"samples: {len(truth)}")
    print(f"accuracy: {report.accuracy:.4f}")
    print(f"macro_sensitivity: {report.sensitivity:.4f}")
    print(f"macro_specificity: {report.specificity:.4f}")
    print(f"macro_f1: {report.f1:.4f}")
    print(f"macro_auc: {report.auc:.4f}")
    names = [label.csv_name for label in ClassLabel]
    print("confusion (rows=true, cols=predicted): " + ",".join(names))
    for c, name in enumerate(names):
        print(f"  {name}: " + ",".join(str(int(v)) for v in cm.counts[c]))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "preprocess":
            index = preprocess_corpus(load_config(args.config))
            print(
                f"cache ready: {len(index.manifest)} samples "
                f"({index.written} written, {index.skipped} up to date)"
            )
        elif args.command == "run":
            config = load_config(args.config)
            record = run_experiment(config, jobs=args.jobs, folds=_parse_folds(args.folds))
            print(
                f"run complete: folds {list(record.folds_run)}, best fold "
                f"{record.best_fold}, outputs in {config.output_dir}"
            )
        elif args.command == "evaluate":
            return _cmd_evaluate(args.pred, args.truth)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
