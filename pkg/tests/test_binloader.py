import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plcbinx.binloader import (BinaryFormat, MalformedHeader, NoCodeFound, NoPeers, ProbeConfig, UnsupportedClass,
                               UnsupportedMachine, detect_format, load_binary, load_elf, load_pe, probe_container,
                               scan_metadata_records)
from plcbinx.disasm import assemble
from plcbinx.forge.containers import APP_CODE, AppRecord, elf_code_base, write_app, write_elf, write_pe

from conftest import peers_for


def code(n_words, seed=0):
    rng = np.random.default_rng(seed)
    body = ["push {r4, lr}"]
    for i in range(n_words - 3):
        if i % 16 == 15:
            body.append("blne #0x0")
        else:
            body.append(f"add r{int(rng.integers(4))}, r{int(rng.integers(4))}, #{int(rng.integers(10))}")
    body += ["cmp r0, #1", "pop {r4, pc}"]
    return b"".join(struct.pack("<I", assemble(t)) for t in body)


# ELF -----------------------------------------------------------------------------

def test_elf_single_text_and_symbol():
    text = code(16)
    assert len(text) == 64
    img = load_elf(write_elf(text, [("dt_PR_program0_exec", elf_code_base(), 64)]))
    assert img.format is BinaryFormat.ELF
    assert [(r.length, r.vaddr) for r in img.code_regions] == [(64, elf_code_base())]
    assert [(s.name, s.address) for s in img.symbols] == [("dt_PR_program0_exec", elf_code_base())]


def test_elf_truncated_header():
    with pytest.raises(MalformedHeader):
        load_elf(b"\x7fELF\x01\x01\x01" + bytes(10))


def test_elf_without_executable_sections():
    img = load_elf(write_elf(code(8), [], exec_sections=False))
    assert img.code_regions == []


def test_elf_rejects_64bit_and_big_endian():
    data = bytearray(write_elf(code(8), []))
    data[4] = 2
    with pytest.raises(UnsupportedClass):
        load_elf(bytes(data))
    data[4], data[5] = 1, 2
    with pytest.raises(UnsupportedClass):
        load_elf(bytes(data))


def test_elf_rejects_other_machines():
    data = bytearray(write_elf(code(8), []))
    struct.pack_into("<H", data, 18, 3)
    with pytest.raises(UnsupportedMachine):
        load_elf(bytes(data))


def test_elf_data_symbol_is_dropped():
    img = load_elf(write_elf(code(8), [("f", elf_code_base(), 32)], b"\0" * 64, [("g_data", 0)]))
    assert [s.name for s in img.symbols] == ["f"]


# PE ------------------------------------------------------------------------------

@pytest.mark.parametrize("use_coff", [False, True])
def test_pe_single_section(use_coff):
    from plcbinx.forge.containers import PE_IMAGE_BASE, PE_TEXT_RVA
    entry = PE_IMAGE_BASE + PE_TEXT_RVA
    img = load_pe(write_pe([code(12)], [("PROGRAM0_body__", entry)], use_coff))
    assert len(img.code_regions) == 1
    assert ("PROGRAM0_body__", entry) in [(s.name, s.address) for s in img.symbols]


def test_pe_two_sections_sorted():
    img = load_pe(write_pe([code(12), code(20, 1)], [], False))
    regions = img.code_regions
    assert len(regions) == 2
    assert regions[0].end <= regions[1].offset


def test_pe_mz_only():
    with pytest.raises(MalformedHeader):
        load_pe(b"MZ")


def test_pe_rejects_other_machines():
    data = bytearray(write_pe([code(8)], [], False))
    pe = struct.unpack_from("<I", data, 0x3C)[0]
    struct.pack_into("<H", data, pe + 4, 0x14C)
    with pytest.raises(UnsupportedMachine):
        load_pe(bytes(data))


def test_detect_format():
    assert detect_format(b"\x7fELF....") is BinaryFormat.ELF
    assert detect_format(b"MZ......") is BinaryFormat.PE
    assert detect_format(b"PLCAPPv3") is BinaryFormat.APP


# container probing ---------------------------------------------------------------

def _app(seed, records):
    return write_app(code(96, seed), records, "CODESYSv3", seed)[0]


def test_probe_recovers_code_region_and_records():
    recs = [AppRecord("PLC_PRG", APP_CODE), AppRecord("_ARRAY_ABS", APP_CODE + 0x40)]
    target = _app(0, recs)
    peers = [_app(s, recs) for s in (1, 2, 3, 4)]
    img = load_binary(target, peers=peers)
    (region,) = img.code_regions
    # window granularity: the code is 384 bytes, the tail window is padding
    assert region.offset == APP_CODE and 384 <= region.length < 384 + 256
    assert [(m.name, m.code_pointer) for m in img.metadata_records] == [("PLC_PRG", APP_CODE),
                                                                       ("_ARRAY_ABS", APP_CODE + 0x40)]


def test_duplicate_pointer_keeps_first_record():
    recs = [AppRecord("PLC_PRG", APP_CODE), AppRecord("PLC_PRG_TASK", APP_CODE)]
    img = load_binary(_app(0, recs), peers=[_app(s, recs) for s in (1, 2)])
    assert [m.name for m in img.metadata_records] == ["PLC_PRG"]


def test_probe_identical_peers_has_no_code():
    target = _app(0, [AppRecord("PLC_PRG", APP_CODE)])
    with pytest.raises(NoCodeFound):
        probe_container(target, [target, target])


def test_probe_without_peers():
    with pytest.raises(NoPeers):
        probe_container(_app(0, []), [])


def test_probe_falls_back_to_whole_file():
    target = _app(0, [AppRecord("PLC_PRG", APP_CODE)])
    img = load_binary(target, peers=[])
    assert [(r.offset, r.length) for r in img.code_regions] == [(0, len(target))]


def test_no_plausible_records():
    recs = []
    img = load_binary(_app(0, recs), peers=[_app(1, recs)])
    assert scan_metadata_records(img) == []


def test_probe_config_is_exposed():
    cfg = ProbeConfig()
    assert (cfg.window, cfg.stable_threshold, cfg.decode_validity, cfg.words_per_transfer) == (256, 0.90, 0.60, 64)


@settings(max_examples=15, deadline=None)
@given(st.permutations(range(4)))
def test_probe_is_peer_order_insensitive(small_binaries, order):
    apps = [b for b in small_binaries if b.platform == "CODESYSv3"][:5]
    target, peers = apps[0], [apps[i + 1].data for i in range(4)]
    base = probe_container(target.data, peers).code_regions
    assert probe_container(target.data, [peers[i] for i in order]).code_regions == base


# forge oracle ----------------------------------------------------------------------

def test_regions_cover_manifest_code(small_binaries):
    pool = {}
    for b in small_binaries:
        pool.setdefault(b.platform, []).append(b)
    for b in small_binaries:
        img = load_binary(b.data, peers=peers_for(b, pool))
        got = sorted((r.offset, r.length) for r in img.code_regions)
        want = sorted((o, n) for o, n, _ in b.manifest["code_regions"])
        if b.manifest["format"] == "APP":
            assert len(got) == len(want)
            for (go, gl), (wo, wl) in zip(got, want):
                assert go <= wo and go + gl >= wo + wl  # covers the code
                assert wo - go < 256 and (go + gl) - (wo + wl) < 256
        else:
            assert got == want


def test_loading_is_deterministic(small_binaries):
    b = small_binaries[0]
    assert load_binary(b.data) == load_binary(b.data)
