import collections

import pytest

from plcbinx.binloader import load_binary
from plcbinx.corefn import classify
from plcbinx.forge import ForgeSpec, forge_corpus_binaries
from plcbinx.funcrec import analyze_image
from plcbinx.learn import GnnConfig, Hyperparams, SeqClassifierConfig, Stage2Config, TrainConfig

SMALL_SPEC = ForgeSpec(programs_per_label=1)

# small models for fast unit tests
TINY = Hyperparams(
    stage1=SeqClassifierConfig(vocab=256, embed_dim=8, heads=2, ffn_dim=16, max_len=64),
    stage1_train=TrainConfig(lr=5e-3, epochs=2),
    stage2=Stage2Config(vocab=64, steps=50),
    gnn=GnnConfig(bag_dim=16, hidden=8, head_hidden=8),
    gnn_train=TrainConfig(lr=5e-3, epochs=2),
)

_acceptance: dict[str, tuple[str, str]] = {}


def peers_for(binary, pool, limit=4):
    """Raw bytes of up to ``limit`` other container files of the same platform."""
    if binary.manifest["format"] != "APP":
        return None
    return [b.data for b in pool[binary.platform] if b.binary_id != binary.binary_id][:limit]


def analyze_forged(binaries):
    pool = collections.defaultdict(list)
    for b in binaries:
        pool[b.platform].append(b)
    out = []
    for b in binaries:
        image = load_binary(b.data, b.binary_id, peers=peers_for(b, pool))
        rec = analyze_image(image, b.binary_id, b.program_id, b.platform, b.label)
        out.append((b, image, rec))
    return out


@pytest.fixture(scope="session")
def small_binaries():
    return list(forge_corpus_binaries(SMALL_SPEC))


@pytest.fixture(scope="session")
def small_analyzed(small_binaries):
    return analyze_forged(small_binaries)


@pytest.fixture(scope="session")
def small_records(small_analyzed):
    recs = []
    for _, _, rec in small_analyzed:
        classify(rec, rec.platform_label)
        recs.append(rec)
    return recs


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    key = str(marker.args[0])
    failed = call.excinfo is not None or _acceptance.get(key, ("PASS",))[0] == "FAIL"
    _acceptance[key] = ("FAIL" if failed else "PASS", marker.args[1])


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_acceptance, key=lambda k: int(k)):
        outcome, title = _acceptance[key]
        terminalreporter.write_line(f"criterion {key:>2}: {outcome}  {title}")
