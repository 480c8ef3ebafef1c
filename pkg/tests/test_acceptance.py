"""Acceptance criteria at their pinned tolerances.

Run alone with ``pytest -m acceptance -s``; the terminal summary prints one
pass/fail line per criterion.
"""

import itertools
import json
import time

import pytest

from plcbinx.cli import main
from plcbinx.corefn import distribution_stats, stats_tsv
from plcbinx.disasm import assemble, decode
from plcbinx.evalharness import run_experiment
from plcbinx.forge import LABELS, ForgeSpec, forge_corpus, forge_corpus_binaries
from plcbinx.forge.codegen import FunctionIR
from plcbinx.forge.oracle import APP_REGION_TOLERANCE, compare_regions, compare_structure
from plcbinx.funcrec import Category
from plcbinx.learn import load_hyperparams
from plcbinx.pipeline import load_corpus
from plcbinx.represent import build_acfg, normalize

from conftest import analyze_forged
from gradcheck import gnn_case, relative_errors, transformer_case
from test_cli import artifacts
from test_disasm import test_capstone_fixture_agreement as capstone_fixture_check
from test_represent import NAMES, TABLE, recover, table_iv_function

pytestmark = pytest.mark.acceptance


def criterion(number, title):
    return pytest.mark.criterion(str(number), title)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    index = forge_corpus(ForgeSpec(), tmp_path_factory.mktemp("corpus"))
    return load_corpus(index)


@pytest.fixture(scope="module")
def toolchain_run(corpus):
    t0 = time.perf_counter()
    res = run_experiment(corpus, "toolchain", hp=load_hyperparams())
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def functionality_runs(corpus):
    hp, runs = load_hyperparams(), {}
    t0 = time.perf_counter()
    for functions in ("core", "both", "runtime"):
        runs[functions] = run_experiment(corpus, "functionality", functions=functions, hp=hp)
        print(f"functionality/{functions}: F1 {100 * runs[functions].report.weighted_f1:.2f} "
              f"baseline {100 * runs[functions].baseline.weighted_f1:.2f}")
    return runs, time.perf_counter() - t0


@criterion(1, "normalization table, six rows, < 1 s")
def test_normalization_rows():
    t0 = time.perf_counter()
    assert len(TABLE) == 6
    for text, addr, want in TABLE:
        assert normalize(decode(assemble(text, addr), addr), NAMES.get) == want, text
    assert time.perf_counter() - t0 < 1.0


@criterion(2, "ACFG node golden and two-edge conditional, < 1 s")
def test_acfg_golden():
    t0 = time.perf_counter()
    _, fn = recover(table_iv_function())
    fn.category = Category.CORE
    (node,) = [n for n in build_acfg(fn).nodes if n.bb_len == 12]
    assert node.feature_tokens() == ["bb_len:9-16", "bb_in:1", "bb_out:2", "core_function"]
    cond = FunctionIR("f").ins("cmp r0, #0").br("eq", "z").ins("mov r0, #1").label("z").ret("bx lr")
    g = build_acfg(recover(cond)[1])
    assert sorted(d for s, d in g.edges if s == 0) == [1, 2]
    assert time.perf_counter() - t0 < 1.0


@criterion(3, "recovery oracle on 200 forged binaries, < 2 min")
def test_recovery_oracle():
    t0 = time.perf_counter()
    binaries = list(itertools.islice(forge_corpus_binaries(ForgeSpec()), 200))
    assert len(binaries) == 200
    bad, formats = {}, set()
    for b, image, rec in analyze_forged(binaries):
        fmt = b.manifest["format"]
        formats.add(fmt)
        miss = compare_structure(rec, b.manifest, names_only=fmt == "APP").mismatches
        if fmt == "APP":
            miss += compare_regions(image, b.manifest, APP_REGION_TOLERANCE)
        if miss:
            bad[b.binary_id] = miss[:3]
    elapsed = time.perf_counter() - t0
    print(f"oracle: {len(binaries)} binaries, formats {sorted(formats)}, {elapsed:.1f} s")
    assert bad == {}
    assert elapsed < 120


@criterion(4, "decoder agrees with capstone on >= 500 fixture instructions")
def test_reference_disassembler():
    capstone_fixture_check()


@criterion(5, "toolchain ten-fold weighted F1 = 100%, < 10 min")
def test_toolchain_ten_fold(toolchain_run):
    res, elapsed = toolchain_run
    print(f"toolchain: F1 {100 * res.report.weighted_f1:.2f} in {elapsed:.0f} s")
    assert sorted({r["fold"] for r in res.rows}) == list(range(10))
    assert res.report.weighted_f1 == 1.0
    assert elapsed < 600


@criterion(6, "functionality beats the baseline and core > both > runtime, < 30 min")
def test_functionality(functionality_runs):
    runs, elapsed = functionality_runs
    f1 = {k: r.report.weighted_f1 for k, r in runs.items()}
    print(f"functionality total {elapsed:.0f} s")
    assert f1["core"] - runs["core"].baseline.weighted_f1 >= 0.10
    assert f1["core"] > f1["both"] > f1["runtime"]
    assert elapsed < 1800


@criterion(7, "finite-difference gradients on every tensor, 3 seeds, < 1 min")
def test_gradients():
    t0 = time.perf_counter()
    for case in (transformer_case, gnn_case):
        for seed in (0, 1, 2):
            params, loss, rng = case(seed)
            worst = relative_errors(params, loss, rng)
            assert set(worst) == set(params)
            assert max(worst.values()) <= 1e-3, (case.__name__, seed, worst)
    assert time.perf_counter() - t0 < 60


@criterion(8, "protocol invariants hold on every evaluation run")
def test_invariants(toolchain_run, functionality_runs):
    tool, _ = toolchain_run
    assert tool.invariants == {"no_leak": True, "coverage_once": True, "weighted_identity": True,
                               "hierarchical_consistency": True}
    for res in functionality_runs[0].values():
        assert res.invariants and all(res.invariants.values())
        assert len(res.rows) == len({r["binary_id"] for r in res.rows})


@criterion(9, "CLI artifacts are byte-identical across two runs")
def test_cli_determinism(tmp_path):
    labels = ",".join(LABELS[:4])
    runs = []
    for k in ("a", "b"):
        root = tmp_path / k
        assert main(["forge", "--out", str(root / "corpus"), "--programs-per-label", "1", "--labels", labels]) == 0
        index = str(root / "corpus" / "index.tsv")
        assert main(["analyze", index, "--out", str(root / "flif")]) == 0
        assert main(["classify-core", str(root / "flif"), "--out", str(root / "flif")]) == 0
        assert main(["represent", str(root / "flif")]) == 0
        assert main(["train-toolchain", index, "--out", str(root / "models")]) == 0
        assert main(["train-functionality", index, "--out", str(root / "models")]) == 0
        runs.append(artifacts(root))
    assert runs[0].keys() == runs[1].keys()
    assert [n for n in runs[0] if runs[0][n] != runs[1][n]] == []
    for k in ("a", "b"):
        assert set(json.loads((tmp_path / k / "models" / "run.json").read_text())) == {"command", "version", "config"}


@criterion(10, "stats: core functions per binary in [2, 4] on every platform")
def test_core_per_binary(corpus):
    rows = stats_tsv(distribution_stats(corpus)).splitlines()
    header = rows[0].split("\t")
    per = {r.split("\t")[0]: float(r.split("\t")[header.index("core_per_binary")]) for r in rows[1:]}
    print("core per binary:", per)
    assert len(per) == 4
    assert all(2.0 <= v <= 4.0 for v in per.values()), per
