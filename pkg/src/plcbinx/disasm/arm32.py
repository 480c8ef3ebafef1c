"""ARM32 (ARM state, little-endian) decoder for a fixed instruction subset.

Covered: MOV/ADD/SUB/CMP/AND/ORR/EOR with an unshifted register or a
canonically rotated immediate, word LDR/STR with an immediate offset (no
writeback), STMDB/LDMIA with writeback (PUSH/POP when the base is SP and the
list has two or more registers), B/BL with condition codes, BX and
``mov pc, <reg>``. Anything else decodes to ``None``.

Rendering follows the UAL conventions of common disassemblers: register
aliases ``sb sl fp ip``, immediates in decimal up to 9 and hex above,
branch targets as absolute ``#0x...`` values.
"""

from __future__ import annotations

from .instr import AL, Instr, Kind, Operand, OperandClass

CONDITIONS = ("eq", "ne", "hs", "lo", "mi", "pl", "vs", "vc", "hi", "ls", "ge", "lt", "gt", "le", "")
REGISTERS = ("r0", "r1", "r2", "r3", "r4", "r5", "r6", "r7", "r8", "sb", "sl", "fp", "ip", "sp", "lr", "pc")
SP, LR, PC = 13, 14, 15

DP_OPCODES = {0x0: "and", 0x1: "eor", 0x2: "sub", 0x4: "add", 0xA: "cmp", 0xC: "orr", 0xD: "mov"}


def ror32(value: int, amount: int) -> int:
    amount %= 32
    if amount == 0:
        return value & 0xFFFFFFFF
    return ((value >> amount) | (value << (32 - amount))) & 0xFFFFFFFF


def canonical_rotation(value: int) -> tuple[int, int] | None:
    """Smallest (rot, imm8) with ror(imm8, 2*rot) == value, or None."""
    value &= 0xFFFFFFFF
    for rot in range(16):
        imm8 = ror32(value, 32 - 2 * rot)
        if imm8 < 256:
            return rot, imm8
    return None


def format_imm(value: int) -> str:
    if value < 0:
        return "#-" + (str(-value) if -value <= 9 else hex(-value))
    return "#" + (str(value) if value <= 9 else hex(value))


def format_reglist(mask: int) -> str:
    return "{" + ", ".join(REGISTERS[i] for i in range(16) if mask >> i & 1) + "}"


def _reg(n: int) -> Operand:
    return Operand(OperandClass.REG, REGISTERS[n])


def decode(word: int, address: int) -> Instr | None:
    if address % 4:
        raise ValueError(f"unaligned address {address:#x}")
    word &= 0xFFFFFFFF
    cond = word >> 28
    if cond == 0xF:
        return None
    group = (word >> 25) & 0b111
    if group in (0b000, 0b001):
        if word & 0x0FFFFFF0 == 0x012FFF10:
            return _decode_bx(word, address, cond)
        return _decode_dataproc(word, address, cond)
    if group == 0b010:
        return _decode_loadstore(word, address, cond)
    if group == 0b100:
        return _decode_block(word, address, cond)
    if group == 0b101:
        return _decode_branch(word, address, cond)
    return None


def _decode_bx(word: int, address: int, cond: int) -> Instr | None:
    rm = word & 0xF
    if cond != AL or rm == PC:
        return None
    kind = Kind.RETURN if rm == LR else Kind.INDIRECT
    return Instr(address, word, "bx", (_reg(rm),), kind)


def _decode_dataproc(word: int, address: int, cond: int) -> Instr | None:
    opcode = (word >> 21) & 0xF
    name = DP_OPCODES.get(opcode)
    if name is None:
        return None
    s_bit = (word >> 20) & 1
    rn = (word >> 16) & 0xF
    rd = (word >> 12) & 0xF
    immediate = (word >> 25) & 1

    if name == "cmp":
        if not s_bit or rd != 0:
            return None
    elif s_bit:
        return None
    if name == "mov" and rn != 0:
        return None

    if immediate:
        rot, imm8 = (word >> 8) & 0xF, word & 0xFF
        value = ror32(imm8, 2 * rot)
        if canonical_rotation(value) != (rot, imm8):
            return None
        op2 = Operand(OperandClass.IMM, format_imm(value))
    else:
        if (word >> 4) & 0xFF:
            return None
        op2 = _reg(word & 0xF)

    mnemonic = name + CONDITIONS[cond]
    kind = Kind.DATAPROC
    if rd == PC and name != "cmp":
        # only `mov pc, <reg>` is a supported PC write
        if name != "mov" or immediate or cond != AL:
            return None
        rm = word & 0xF
        if rm == PC:
            return None
        kind = Kind.RETURN if rm == LR else Kind.INDIRECT

    if name == "cmp":
        operands = (_reg(rn), op2)
    elif name == "mov":
        operands = (_reg(rd), op2)
    else:
        operands = (_reg(rd), _reg(rn), op2)
    return Instr(address, word, mnemonic, operands, kind, cond=cond)


def _decode_loadstore(word: int, address: int, cond: int) -> Instr | None:
    pre = (word >> 24) & 1
    up = (word >> 23) & 1
    byte = (word >> 22) & 1
    writeback = (word >> 21) & 1
    load = (word >> 20) & 1
    rn = (word >> 16) & 0xF
    rd = (word >> 12) & 0xF
    offset = word & 0xFFF
    if not pre or writeback or byte or rd == PC:
        return None
    if not up and offset == 0:
        return None
    if offset == 0:
        mem = f"[{REGISTERS[rn]}]"
    else:
        mem = f"[{REGISTERS[rn]}, {format_imm(offset if up else -offset)}]"
    mnemonic = ("ldr" if load else "str") + CONDITIONS[cond]
    return Instr(address, word, mnemonic, (_reg(rd), Operand(OperandClass.MEM, mem)), Kind.LOADSTORE, cond=cond)


def _decode_block(word: int, address: int, cond: int) -> Instr | None:
    pre = (word >> 24) & 1
    up = (word >> 23) & 1
    psr = (word >> 22) & 1
    writeback = (word >> 21) & 1
    load = (word >> 20) & 1
    rn = (word >> 16) & 0xF
    mask = word & 0xFFFF
    if psr or not writeback or mask == 0 or rn == PC:
        return None
    if load and (pre, up) != (0, 1):
        return None
    if not load and (pre, up) != (1, 0):
        return None

    has_pc = bool(mask >> PC & 1)
    if has_pc and (not load or cond != AL):
        return None
    suffix = CONDITIONS[cond]
    reglist = Operand(OperandClass.REG, format_reglist(mask))
    if rn == SP and bin(mask).count("1") >= 2:
        mnemonic = ("pop" if load else "push") + suffix
        operands: tuple[Operand, ...] = (reglist,)
    else:
        mnemonic = ("ldm" if load else "stmdb") + suffix
        operands = (Operand(OperandClass.REG, REGISTERS[rn] + "!"), reglist)
    kind = Kind.RETURN if has_pc else Kind.PUSHPOP
    saves_lr = not load and bool(mask >> LR & 1)
    return Instr(address, word, mnemonic, operands, kind, cond=cond, saves_lr=saves_lr)


def _decode_branch(word: int, address: int, cond: int) -> Instr | None:
    link = (word >> 24) & 1
    offset = word & 0xFFFFFF
    if offset & 0x800000:
        offset -= 1 << 24
    target = (address + 8 + offset * 4) & 0xFFFFFFFF
    mnemonic = ("bl" if link else "b") + CONDITIONS[cond]
    kind = Kind.BRANCHLINK if link else Kind.BRANCH
    return Instr(address, word, mnemonic, (Operand(OperandClass.LABEL, format_imm(target)),), kind,
                 branch_target=target, cond=cond)
