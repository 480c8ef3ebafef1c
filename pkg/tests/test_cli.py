import json
from pathlib import Path

import pytest

from plcbinx.cli import main
from plcbinx.forge import LABELS

from conftest import TINY

FEW_LABELS = ",".join(LABELS[:4])


def artifacts(root: Path) -> dict[str, bytes]:
    """All files under ``root`` except run.json, which echoes the output path."""
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file() and p.name != "run.json"}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "train.json").write_text(json.dumps(TINY.to_dict()))
    assert main(["forge", "--out", str(root / "corpus"), "--programs-per-label", "2", "--labels", FEW_LABELS]) == 0
    return root


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main([]) == 2
    assert main(["no-such-command"]) == 2
    assert main(["analyze", "--out", str(tmp_path), str(tmp_path / "missing*.elf")]) == 2
    assert main(["forge", "--out", str(tmp_path), "--labels", "Not_A_Label"]) == 2
    assert main(["predict", "--out", str(tmp_path), str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_help_exits_0():
    assert main(["--help"]) == 0


def test_schema_violation_exits_1(tmp_path):
    bad = tmp_path / "bad.flif.json"
    bad.write_text(json.dumps({"flif_version": 1}))
    assert main(["import-flif", "--out", str(tmp_path / "o"), str(bad)]) == 1
    assert main(["represent", "--out", str(tmp_path / "o"), str(bad)]) == 1


def test_forge_writes_index_and_run(workspace):
    corpus = workspace / "corpus"
    lines = (corpus / "index.tsv").read_text().splitlines()
    assert lines[0].split("\t") == ["binary_id", "program_id", "platform", "label", "path"]
    assert len(lines) - 1 == len(list((corpus / "manifests").iterdir()))
    run = json.loads((corpus / "run.json").read_text())
    assert set(run) == {"command", "version", "config"}  # no timestamps
    assert run["command"] == "forge" and run["config"]["seed"] == 7


def test_pipeline_end_to_end(workspace, capsys):
    corpus, index = workspace / "corpus", str(workspace / "corpus" / "index.tsv")
    flif = workspace / "flif"
    assert main(["analyze", index, "--out", str(flif)]) == 0
    n = len(list(flif.glob("*.flif.json")))
    assert n == len((corpus / "index.tsv").read_text().splitlines()) - 1
    assert main(["classify-core", str(flif), "--out", str(workspace / "classified")]) == 0
    assert main(["represent", str(workspace / "classified"), "--out", str(workspace / "repr")]) == 0
    assert len(list((workspace / "repr").glob("*.repr.json"))) == n

    assert main(["stats", index, "--out", str(workspace / "stats")]) == 0
    rows = (workspace / "stats" / "stats.tsv").read_text().splitlines()
    assert rows[0].startswith("platform\tbinaries\tcore_total\tcore_per_binary")
    assert len(rows) == 5

    train = str(workspace / "train.json")
    models = workspace / "models"
    assert main(["train-toolchain", index, "--out", str(models), "--train", train]) == 0
    assert main(["train-functionality", index, "--out", str(models), "--train", train]) == 0
    capsys.readouterr()
    assert main(["predict", str(workspace / "classified"), "--out", str(workspace / "pred"),
                 "--toolchain-model", str(models / "toolchain_model.json"),
                 "--functionality-model", str(models / "functionality_model.json")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].split("\t") == ["binary_id", "family", "platform", "functionality"]
    assert len(out) == n + 1

    assert main(["eval", index, "--out", str(workspace / "eval"), "--task", "toolchain", "--train", train,
                 "--folds", "0,1,2"]) == 0
    report = (workspace / "eval" / "toolchain_runtime_report.tsv").read_text()
    assert report.splitlines()[-1].startswith("majority_baseline")


def test_predict_from_raw_binaries(workspace):
    models = workspace / "models"
    if not (models / "toolchain_model.json").exists():
        pytest.skip("needs the end-to-end test")
    elf = sorted((workspace / "corpus" / "bin").glob("*.elf"))[:2]
    assert main(["predict", *map(str, elf), "--out", str(workspace / "pred_raw"),
                 "--toolchain-model", str(models / "toolchain_model.json")]) == 0
    rows = json.loads((workspace / "pred_raw" / "predictions.json").read_text())
    assert [r["binary_id"] for r in rows] == [p.name.split(".")[0] for p in elf]


def test_outputs_are_byte_identical(workspace):
    index = str(workspace / "corpus" / "index.tsv")
    train = str(workspace / "train.json")
    runs = []
    for k in ("a", "b"):
        root = workspace / f"det_{k}"
        assert main(["forge", "--out", str(root / "corpus"), "--programs-per-label", "1",
                     "--labels", FEW_LABELS]) == 0
        assert main(["analyze", index, "--out", str(root / "flif")]) == 0
        assert main(["classify-core", str(root / "flif"), "--out", str(root / "flif")]) == 0
        assert main(["represent", str(root / "flif")]) == 0
        assert main(["train-toolchain", index, "--out", str(root / "models"), "--train", train]) == 0
        assert main(["train-functionality", index, "--out", str(root / "models"), "--train", train]) == 0
        runs.append(artifacts(root))
    assert runs[0].keys() == runs[1].keys()
    for name in runs[0]:
        assert runs[0][name] == runs[1][name], name
