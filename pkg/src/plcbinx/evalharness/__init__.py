"""Program-level ten-fold cross-validation for both prediction tasks."""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..forge.labels import LABELS
from ..funcrec import PLATFORMS, FunctionProgramRecord, family_of
from ..hashing import fnv1a64
from ..learn import (Hyperparams, fit_gnn, fit_stage1, fit_stage2, graph_sample, predict_stage1, stage1_features,
                     stage2_features)
from ..learn.models import FunctionalityModel, ToolchainModel
from ..metrics import EvalReport, LabelRow, LengthMismatch, metrics, report_from_confusion
from ..represent import build_fingerprint

log = logging.getLogger(__name__)

N_FOLDS = 10
TASKS = ("toolchain", "functionality")


class InvariantViolation(AssertionError):
    pass


def assign_folds(program_ids, n_folds: int = N_FOLDS, seed: int | None = None) -> dict[str, int]:
    """fold = FNV-1a-64(program_id) mod 10; a seed salts the hash for the seedable variant."""
    ids = list(program_ids)
    if not ids:
        raise ValueError("no program ids")
    salt = "" if seed is None else f"{seed}:"
    return {p: fnv1a64(salt + p) % n_folds for p in sorted(set(ids))}


# invariants -------------------------------------------------------------------

def check_no_leak(train: list[FunctionProgramRecord], test: list[FunctionProgramRecord]) -> None:
    shared = {r.program_id for r in train} & {r.program_id for r in test}
    if shared:
        raise InvariantViolation(f"programs in both train and test: {sorted(shared)[:5]}")


def check_coverage(predicted_ids: list[str], labeled_ids: list[str]) -> None:
    counts = Counter(predicted_ids)
    dup = [b for b, n in counts.items() if n > 1]
    if dup or set(counts) != set(labeled_ids):
        raise InvariantViolation(f"test folds do not cover each binary once (duplicates {dup[:5]}, "
                                 f"missing {sorted(set(labeled_ids) - set(counts))[:5]})")


def check_weighted_identity(report: EvalReport, tol: float = 1e-12) -> None:
    cm = report.confusion
    support = cm.sum(axis=1)
    if int(support.sum()) != report.total or [r.support for r in report.per_label] != support.tolist():
        raise InvariantViolation("support does not match the confusion matrix")
    recomputed = report_from_confusion(report.labels, cm)
    for attr in ("weighted_precision", "weighted_recall", "weighted_f1"):
        direct = float(sum(getattr(r, attr.split("_")[1]) * r.support for r in recomputed.per_label)
                       / max(1, support.sum()))
        if abs(getattr(report, attr) - direct) > tol:
            raise InvariantViolation(f"{attr} {getattr(report, attr)} != {direct}")


def check_hierarchical(rows: list[dict]) -> None:
    for row in rows:
        if row["family"] != "OpenPLC" and row["predicted"].startswith("OpenPLC"):
            raise InvariantViolation(f"{row['binary_id']}: stage 1 said {row['family']}, got {row['predicted']}")
        if family_of(row["predicted"]) != row["family"]:
            raise InvariantViolation(f"{row['binary_id']}: {row['predicted']} outside family {row['family']}")


# experiments ------------------------------------------------------------------

@dataclass
class ExperimentResult:
    task: str
    functions: str
    seed: int
    report: EvalReport
    baseline: EvalReport
    fold_reports: list[EvalReport]
    rows: list[dict] = field(repr=False)  # one per binary: binary_id, program_id, platform, fold, truth, predicted
    invariants: dict[str, bool] = field(default_factory=dict)


def _per_platform(rows: list[dict], labels: list[str]) -> list[dict]:
    out = []
    for platform in PLATFORMS:
        sub = [r for r in rows if r["platform"] == platform]
        if not sub:
            continue
        rep = metrics([r["predicted"] for r in sub], [r["truth"] for r in sub], labels)
        out.append({"platform": platform, "binaries": len(sub), "precision": rep.weighted_precision,
                    "recall": rep.weighted_recall, "f1": rep.weighted_f1})
    return out


def _folds_of(records, seed):
    folds = assign_folds([r.program_id for r in records], seed=seed)
    return np.array([folds[r.program_id] for r in records])


def run_experiment(records: list[FunctionProgramRecord], task: str, functions: str | None = None,
                   hp: Hyperparams = Hyperparams(), seed: int = 0, fold_seed: int | None = None,
                   folds: list[int] | None = None) -> ExperimentResult:
    """Ten-fold run; every invariant is asserted and a majority-label baseline is reported alongside.

    ``folds`` restricts the run to some test folds (coverage is then checked on those folds only).
    """
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}")
    functions = functions or ("runtime" if task == "toolchain" else "core")
    hp = hp.with_seed(seed)
    records = sorted(records, key=lambda r: r.binary_id)
    truth_of = (lambda r: r.platform_label) if task == "toolchain" else (lambda r: r.functionality_label)
    labels = list(PLATFORMS) if task == "toolchain" else list(LABELS)
    records = [r for r in records if truth_of(r) is not None]
    fold_ids = _folds_of(records, fold_seed)
    test_folds = sorted(set(fold_ids.tolist()) if folds is None else folds)
    predict = _toolchain_fold if task == "toolchain" else _functionality_fold
    cache = _toolchain_cache(records, hp, functions) if task == "toolchain" else \
        _functionality_cache(records, hp, functions)

    rows, base_rows, fold_reports = [], [], []
    for k in test_folds:
        test_idx = np.flatnonzero(fold_ids == k)
        train_idx = np.flatnonzero(fold_ids != k)
        if not len(test_idx):
            continue
        check_no_leak([records[i] for i in train_idx], [records[i] for i in test_idx])
        preds = predict(records, train_idx, test_idx, cache, hp)
        majority = Counter(truth_of(records[i]) for i in train_idx).most_common()
        majority = min(l for l, n in majority if n == majority[0][1])
        for i, p in zip(test_idx, preds):
            r = records[i]
            row = {"binary_id": r.binary_id, "program_id": r.program_id, "platform": r.platform_label,
                   "fold": int(k), "truth": truth_of(r)}
            row.update(p if isinstance(p, dict) else {"predicted": p})
            rows.append(row)
            base_rows.append({**row, "predicted": majority})
        fold_rows = rows[-len(test_idx):]
        fold_reports.append(metrics([r["predicted"] for r in fold_rows], [r["truth"] for r in fold_rows], labels))

    covered = [r.binary_id for r, f in zip(records, fold_ids) if f in test_folds]
    check_coverage([r["binary_id"] for r in rows], covered)
    report = metrics([r["predicted"] for r in rows], [r["truth"] for r in rows], labels)
    baseline = metrics([r["predicted"] for r in base_rows], [r["truth"] for r in base_rows], labels)
    check_weighted_identity(report)
    check_weighted_identity(baseline)
    invariants = {"no_leak": True, "coverage_once": True, "weighted_identity": True}
    if task == "toolchain":
        check_hierarchical(rows)
        invariants["hierarchical_consistency"] = True
    report.per_platform = _per_platform(rows, labels)
    baseline.per_platform = _per_platform(base_rows, labels)
    return ExperimentResult(task, functions, seed, report, baseline, fold_reports, rows, invariants)


def _toolchain_cache(records, hp, functions):
    c = hp.stage1
    X = np.stack([stage1_features(r, c.vocab, c.max_len, functions) for r in records])
    S2 = np.stack([stage2_features(build_fingerprint(r), hp.stage2.vocab) for r in records])
    return X, S2


def _toolchain_fold(records, train_idx, test_idx, cache, hp):
    X, S2 = cache
    train = [records[i] for i in train_idx]
    res = fit_stage1(X[train_idx], [family_of(r.platform_label) for r in train], [r.program_id for r in train],
                     hp.stage1, hp.stage1_train)
    opl = [i for i in train_idx if family_of(records[i].platform_label) == "OpenPLC"]
    stage2, versions = fit_stage2([records[i] for i in opl], hp.stage2, S2[opl] if opl else None)
    model = ToolchainModel(hp.stage1, res.params, res.seen, stage2, versions)
    fams = predict_stage1(res.params, res.seen, X[test_idx], hp.stage1, hp.stage1_train.batch)
    return [{"family": fam, "predicted": model.resolve_version(fam, S2[i])} for i, fam in zip(test_idx, fams)]


def _functionality_cache(records, hp, functions):
    return [graph_sample(r, functions, hp.gnn.bag_dim) for r in records]


def _functionality_fold(records, train_idx, test_idx, samples, hp):
    res = fit_gnn([samples[i] for i in train_idx], [records[i].functionality_label for i in train_idx],
                  [records[i].program_id for i in train_idx], hp.gnn, hp.gnn_train)
    model = FunctionalityModel(hp.gnn, res.params, res.seen, batch=hp.gnn_train.batch)
    return model.predict_samples([samples[i] for i in test_idx])


# reports ----------------------------------------------------------------------

REPORT_COLUMNS = ("label", "support", "precision", "recall", "f1")


def report_tsv(report: EvalReport, baseline: EvalReport | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in report.per_label:
        w.writerow([r.label, r.support, f"{100 * r.precision:.2f}", f"{100 * r.recall:.2f}", f"{100 * r.f1:.2f}"])
    w.writerow(["weighted", report.total, f"{100 * report.weighted_precision:.2f}",
                f"{100 * report.weighted_recall:.2f}", f"{100 * report.weighted_f1:.2f}"])
    if baseline is not None:
        w.writerow(["majority_baseline", baseline.total, f"{100 * baseline.weighted_precision:.2f}",
                    f"{100 * baseline.weighted_recall:.2f}", f"{100 * baseline.weighted_f1:.2f}"])
    return buf.getvalue()


def report_dict(report: EvalReport) -> dict:
    return {
        "labels": report.labels,
        "per_label": [vars(r) for r in report.per_label],
        "weighted": {"precision": report.weighted_precision, "recall": report.weighted_recall,
                     "f1": report.weighted_f1},
        "per_platform": report.per_platform,
        "confusion": report.confusion.tolist(),
    }


def result_json(result: ExperimentResult) -> str:
    return json.dumps({
        "task": result.task,
        "functions": result.functions,
        "seed": result.seed,
        "report": report_dict(result.report),
        "baseline": report_dict(result.baseline),
        "folds": [{"fold": i, "weighted_f1": r.weighted_f1, "support": r.total}
                  for i, r in zip(sorted({row["fold"] for row in result.rows}), result.fold_reports)],
        "invariants": result.invariants,
        "predictions": result.rows,
    }, indent=1)


__all__ = [
    "EvalReport", "ExperimentResult", "InvariantViolation", "LabelRow", "LengthMismatch", "N_FOLDS",
    "REPORT_COLUMNS", "TASKS", "assign_folds", "check_coverage", "check_hierarchical", "check_no_leak",
    "check_weighted_identity", "metrics", "report_dict", "report_from_confusion", "report_tsv", "result_json",
    "run_experiment",
]
