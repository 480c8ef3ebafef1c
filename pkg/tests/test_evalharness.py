import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from plcbinx.evalharness import (InvariantViolation, assign_folds, check_coverage, check_hierarchical,
                                 check_no_leak, check_weighted_identity, report_tsv, result_json, run_experiment)
from plcbinx.funcrec import FunctionProgramRecord
from plcbinx.hashing import fnv1a64
from plcbinx.metrics import LengthMismatch, metrics

from conftest import TINY


# metrics ------------------------------------------------------------------------------

def test_two_label_example():
    rep = metrics(["A", "A", "B"], ["A", "B", "B"])
    assert rep.weighted_f1 == pytest.approx(2 / 3, abs=1e-12)
    assert [(r.label, r.support) for r in rep.per_label] == [("A", 1), ("B", 2)]
    assert rep.per_label[0].precision == 0.5 and rep.per_label[0].recall == 1.0


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        metrics(["A"], ["A", "B"])


def test_degenerate_inputs():
    assert metrics(["A", "A"], ["A", "A"]).weighted_f1 == 1.0
    empty = metrics([], [], ["A", "B"])
    assert empty.total == 0 and empty.weighted_f1 == 0.0
    # a label that is never predicted nor present contributes nothing
    assert metrics(["A"], ["A"], ["A", "B"]).weighted_f1 == 1.0


def test_label_outside_set():
    with pytest.raises(ValueError):
        metrics(["C"], ["A"], ["A", "B"])


@given(st.lists(st.tuples(st.sampled_from("abcd"), st.sampled_from("abcd")), min_size=1, max_size=60))
def test_weighted_identity_holds(pairs):
    preds, truths = zip(*pairs)
    rep = metrics(list(preds), list(truths), list("abcd"))
    check_weighted_identity(rep)
    assert 0.0 <= rep.weighted_f1 <= 1.0
    # weighted recall is plain accuracy
    assert rep.weighted_recall == pytest.approx(np.mean([p == t for p, t in pairs]), abs=1e-12)


# folds and invariants ------------------------------------------------------------------

def test_folds_are_hash_based_and_stable():
    ids = [f"prog-{i:02d}" for i in range(40)]
    folds = assign_folds(ids)
    assert folds == {p: fnv1a64(p) % 10 for p in ids}
    assert assign_folds(reversed(ids)) == folds
    assert assign_folds(ids, seed=3) != folds
    with pytest.raises(ValueError):
        assign_folds([])


def _rec(bid, pid):
    return FunctionProgramRecord(bid, pid, "GEB", "a", [])


def test_leak_is_detected():
    check_no_leak([_rec("x", "p1")], [_rec("y", "p2")])
    with pytest.raises(InvariantViolation):
        check_no_leak([_rec("x", "p1")], [_rec("y", "p1")])


def test_coverage_is_checked():
    check_coverage(["a", "b"], ["b", "a"])
    with pytest.raises(InvariantViolation):
        check_coverage(["a", "a", "b"], ["a", "b"])
    with pytest.raises(InvariantViolation):
        check_coverage(["a"], ["a", "b"])


def test_tampered_report_is_detected():
    rep = metrics(["A", "A", "B"], ["A", "B", "B"])
    with pytest.raises(InvariantViolation):
        check_weighted_identity(replace(rep, weighted_f1=rep.weighted_f1 + 1e-6))


def test_hierarchical_consistency():
    check_hierarchical([{"binary_id": "x", "family": "OpenPLC", "predicted": "OpenPLCv3"},
                        {"binary_id": "y", "family": "GEB", "predicted": "GEB"}])
    with pytest.raises(InvariantViolation):
        check_hierarchical([{"binary_id": "x", "family": "GEB", "predicted": "OpenPLCv2"}])
    with pytest.raises(InvariantViolation):
        check_hierarchical([{"binary_id": "x", "family": "OpenPLC", "predicted": "CODESYSv3"}])


# experiments ------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_runs(small_records):
    return {task: run_experiment(small_records, task, hp=TINY, folds=[0, 1, 2]) for task in ("toolchain",
                                                                                              "functionality")}


def test_experiment_reports_invariants(small_runs):
    assert small_runs["toolchain"].invariants == {"no_leak": True, "coverage_once": True,
                                                  "weighted_identity": True, "hierarchical_consistency": True}
    assert small_runs["functionality"].functions == "core"
    for res in small_runs.values():
        assert {r["fold"] for r in res.rows} <= {0, 1, 2}
        assert len({r["binary_id"] for r in res.rows}) == len(res.rows)


def test_baseline_is_train_majority(small_records, small_runs):
    res = small_runs["functionality"]
    predicted = np.zeros(len(res.baseline.labels), dtype=int)
    for k in (0, 1, 2):
        fold_pids = {r["program_id"] for r in res.rows if r["fold"] == k}
        train = [r.functionality_label for r in small_records if r.program_id not in fold_pids]
        counts = {l: train.count(l) for l in set(train)}
        top = max(counts.values())
        want = min(l for l, n in counts.items() if n == top)  # ties go to the smallest label
        predicted[res.baseline.labels.index(want)] += sum(r["fold"] == k for r in res.rows)
    assert res.baseline.confusion.sum(axis=0).tolist() == predicted.tolist()


def test_fold_programs_are_disjoint(small_runs):
    res = small_runs["toolchain"]
    by_fold = {}
    for r in res.rows:
        by_fold.setdefault(r["fold"], set()).add(r["program_id"])
    folds = list(by_fold.values())
    for i in range(len(folds)):
        for j in range(i + 1, len(folds)):
            assert not folds[i] & folds[j]


def test_reports_render(small_runs):
    res = small_runs["toolchain"]
    tsv = report_tsv(res.report, res.baseline)
    assert tsv.splitlines()[0].split("\t") == ["label", "support", "precision", "recall", "f1"]
    assert tsv.splitlines()[-1].startswith("majority_baseline\t")
    data = json.loads(result_json(res))
    assert data["invariants"]["no_leak"] is True
    assert result_json(res) == result_json(res)


def test_experiment_is_deterministic(small_records, small_runs):
    again = run_experiment(small_records, "toolchain", hp=TINY, folds=[0, 1, 2])
    assert result_json(again) == result_json(small_runs["toolchain"])


def test_unknown_task(small_records):
    with pytest.raises(ValueError):
        run_experiment(small_records, "nope")
