import json
import struct
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from plcbinx.disasm import (AsmError, Kind, OperandClass, UnalignedRegion, assemble, decode, linear_sweep)
from plcbinx.disasm.arm32 import CONDITIONS, REGISTERS

FIXTURE = Path(__file__).parent / "fixtures" / "decoder_oracle.json"

# Rendered by capstone 5 (ARM mode) and frozen here.
REFERENCE = [
    (0xE1A03000, 0x0, "mov r3, r0", Kind.DATAPROC),
    (0xE12FFF1E, 0x0, "bx lr", Kind.RETURN),
    (0xEB0000FE, 0x100, "bl #0x500", Kind.BRANCHLINK),
    (0xE1A0F006, 0x0, "mov pc, r6", Kind.INDIRECT),
    (0xE59D0008, 0x0, "ldr r0, [sp, #8]", Kind.LOADSTORE),
    (0xE3530002, 0x0, "cmp r3, #2", Kind.DATAPROC),
]


@pytest.mark.parametrize("word,addr,text,kind", REFERENCE)
def test_reference_examples(word, addr, text, kind):
    ins = decode(word, addr)
    assert ins.text == text
    assert ins.kind is kind


def test_bl_target_formula():
    ins = decode(0xEB0000FE, 0x100)
    assert ins.branch_target == 0x100 + 8 + 0xFE * 4 == 0x500


def test_return_and_indirect_forms():
    assert decode(assemble("mov pc, lr"), 0).kind is Kind.RETURN
    assert decode(assemble("pop {r4, pc}"), 0).kind is Kind.RETURN
    assert decode(assemble("bx r3"), 0).kind is Kind.INDIRECT
    assert decode(assemble("push {r4, lr}"), 0).saves_lr


def test_unsupported_words_are_undefined():
    assert decode(0xF57FF01F, 0) is None  # unconditional space (dmb)
    assert decode(0xE0000291, 0) is None  # mul
    assert decode(0xEE070F9A, 0) is None  # coprocessor


def test_operand_classes():
    ins = decode(assemble("ldr r0, [sp, #8]"), 0)
    assert [o.cls for o in ins.operands] == [OperandClass.REG, OperandClass.MEM]
    ins = decode(assemble("bne #0x40", 0x10), 0x10)
    assert [o.cls for o in ins.operands] == [OperandClass.LABEL]


@pytest.mark.parametrize("cond", [c for c in CONDITIONS])
def test_every_condition(cond):
    addr = 0x2000
    target = 0x1F00
    ins = decode(assemble(f"b{cond} #{target:#x}", addr), addr)
    assert ins.mnemonic == "b" + cond
    assert ins.branch_target == target
    assert ins.kind is Kind.BRANCH
    assert ins.conditional == (cond != "")


def test_fifteen_conditions():
    assert len(CONDITIONS) == 15


def test_linear_sweep_contract():
    words = [assemble("mov r3, r0"), 0xE0000291, assemble("bx lr")]
    out = linear_sweep(struct.pack("<3I", *words), 0x100)
    assert [i.address for i in out] == [0x100, 0x104, 0x108]
    assert out[1].mnemonic == "undef" and out[1].kind is Kind.OTHER
    assert linear_sweep(b"", 0) == []
    with pytest.raises(UnalignedRegion):
        linear_sweep(b"\0" * 6, 0)


def test_assembler_rejects_unknown():
    with pytest.raises(AsmError):
        assemble("mul r0, r1, r2")


# property tests -----------------------------------------------------------------

regs = st.sampled_from([r for r in REGISTERS if r != "pc"])
low_regs = st.sampled_from(REGISTERS[:13])
conds = st.sampled_from(CONDITIONS)


def imm(v):
    return f"#{v}" if v <= 9 else f"#{v:#x}"


imms = st.one_of(st.integers(0, 255), st.integers(0, 255).map(lambda v: (v << 8)), st.just(0xFF000000))


@st.composite
def instruction_text(draw):
    kind = draw(st.sampled_from(["dp_reg", "dp_imm", "mov", "cmp", "mem", "block", "branch"]))
    c = draw(conds)
    if kind == "dp_reg":
        op = draw(st.sampled_from(["add", "sub", "and", "orr", "eor"]))
        return f"{op}{c} {draw(regs)}, {draw(regs)}, {draw(regs)}"
    if kind == "dp_imm":
        op = draw(st.sampled_from(["add", "sub", "and", "orr", "eor"]))
        v = draw(imms)
        return f"{op}{c} {draw(regs)}, {draw(regs)}, {imm(v)}"
    if kind == "mov":
        return f"mov{c} {draw(regs)}, {draw(regs)}"
    if kind == "cmp":
        v = draw(imms)
        return f"cmp{c} {draw(regs)}, {imm(v)}"
    if kind == "mem":
        off = draw(st.integers(-4095, 4095).filter(lambda x: x != 0))
        text = f"#{off}" if abs(off) <= 9 else ("#-" if off < 0 else "#") + hex(abs(off))
        return f"{draw(st.sampled_from(['ldr', 'str']))}{c} {draw(low_regs)}, [{draw(regs)}, {text}]"
    if kind == "block":
        mask = draw(st.sets(st.sampled_from(REGISTERS[:13] + ("lr",)), min_size=2))
        ordered = [r for r in REGISTERS if r in mask]
        return f"push{c} {{{', '.join(ordered)}}}"
    return f"b{draw(st.sampled_from(['', 'l']))}{c} {imm(draw(st.integers(0, 0x3FFFF)) * 4)}"


@given(instruction_text(), st.integers(0, 0x3FFFF).map(lambda a: a * 4))
def test_assemble_decode_round_trip(text, addr):
    word = assemble(text, addr)
    ins = decode(word, addr)
    assert ins is not None
    assert ins.text == text
    assert assemble(ins.text, addr) == word
    if ins.kind in (Kind.BRANCH, Kind.BRANCHLINK):
        assert ins.branch_target is not None
    if ins.kind in (Kind.RETURN, Kind.INDIRECT):
        assert ins.branch_target is None


@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 2 ** 20).map(lambda a: a * 4))
def test_decode_is_total(word, addr):
    ins = decode(word, addr)
    if ins is not None:
        assert ins.raw == word and ins.address == addr
        # anything decoded re-assembles to the same word
        assert assemble(ins.text, addr) == word


# reference-disassembler fixture --------------------------------------------------

def test_capstone_fixture_agreement():
    rows = json.loads(FIXTURE.read_text())["rows"]
    inside = [r for r in rows if not r.get("outside_subset")]
    mismatches = [r for r in inside if decode(r["word"], r["address"]).text != r["capstone"]]
    assert len(inside) >= 500
    assert mismatches == []
    for r in rows:
        if r.get("outside_subset"):
            assert decode(r["word"], r["address"]) is None
