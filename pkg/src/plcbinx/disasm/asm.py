"""Assembler for the decoder's instruction subset (its exact inverse).

Accepts the same text the decoder renders, e.g. ``push {r4, lr}``,
``ldr r0, [sp, #8]``, ``bne #0x1040``. Branch operands are absolute targets.
"""

from __future__ import annotations

import re

from .arm32 import CONDITIONS, DP_OPCODES, LR, PC, REGISTERS, SP, canonical_rotation

_DP_BY_NAME = {name: code for code, name in DP_OPCODES.items()}
_REG_BY_NAME = {name: i for i, name in enumerate(REGISTERS)}
_REG_BY_NAME.update({f"r{i}": i for i in range(16)})
_COND_BY_NAME = {c: i for i, c in enumerate(CONDITIONS) if c}
_BASES = sorted(list(_DP_BY_NAME) + ["ldr", "str", "push", "pop", "stmdb", "ldm", "b", "bl", "bx"],
                key=len, reverse=True)


class AsmError(ValueError):
    pass


def split_mnemonic(mnemonic: str) -> tuple[str, int]:
    for base in _BASES:
        if mnemonic.startswith(base):
            rest = mnemonic[len(base):]
            if rest == "":
                return base, 14
            if rest in _COND_BY_NAME:
                return base, _COND_BY_NAME[rest]
    raise AsmError(f"unknown mnemonic {mnemonic!r}")


def split_operands(op_str: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in op_str:
        if ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if cur and "".join(cur).strip():
        parts.append("".join(cur).strip())
    return parts


def _reg(text: str) -> int:
    try:
        return _REG_BY_NAME[text.strip()]
    except KeyError:
        raise AsmError(f"bad register {text!r}") from None


def _imm(text: str) -> int:
    text = text.strip()
    if not text.startswith("#"):
        raise AsmError(f"bad immediate {text!r}")
    return int(text[1:], 0)


def _reglist(text: str) -> int:
    text = text.strip()
    if not (text.startswith("{") and text.endswith("}")):
        raise AsmError(f"bad register list {text!r}")
    mask = 0
    for name in text[1:-1].split(","):
        mask |= 1 << _reg(name)
    if not mask:
        raise AsmError("empty register list")
    return mask


_MEM_RE = re.compile(r"^\[(\w+)(?:,\s*(#-?(?:0x[0-9a-f]+|\d+)))?\]$")


def assemble(text: str, address: int = 0) -> int:
    """Encode one instruction; ``address`` is needed for branch offsets."""
    text = text.strip().lower()
    mnemonic, _, op_str = text.partition(" ")
    base, cond = split_mnemonic(mnemonic)
    ops = split_operands(op_str)
    c = cond << 28

    if base in _DP_BY_NAME:
        opcode = _DP_BY_NAME[base]
        if base == "cmp":
            rd, rn, op2 = 0, _reg(ops[0]), ops[1]
            s = 1
        elif base == "mov":
            rd, rn, op2 = _reg(ops[0]), 0, ops[1]
            s = 0
        else:
            rd, rn, op2 = _reg(ops[0]), _reg(ops[1]), ops[2]
            s = 0
        if op2.startswith("#"):
            enc = canonical_rotation(_imm(op2))
            if enc is None:
                raise AsmError(f"immediate not encodable: {op2}")
            rot, imm8 = enc
            operand = (1 << 25) | (rot << 8) | imm8
        else:
            operand = _reg(op2)
        return c | (opcode << 21) | (s << 20) | (rn << 16) | (rd << 12) | operand

    if base in ("ldr", "str"):
        rd = _reg(ops[0])
        m = _MEM_RE.match(ops[1].replace(" ", ""))
        if m is None:
            raise AsmError(f"bad memory operand {ops[1]!r}")
        rn = _reg(m.group(1))
        offset = _imm(m.group(2)) if m.group(2) else 0
        up = 0 if (m.group(2) or "").startswith("#-") else 1
        mag = abs(offset)
        if mag > 0xFFF:
            raise AsmError("offset out of range")
        load = 1 if base == "ldr" else 0
        return c | (0b010 << 25) | (1 << 24) | (up << 23) | (load << 20) | (rn << 16) | (rd << 12) | mag

    if base in ("push", "pop", "stmdb", "ldm"):
        if base in ("push", "pop"):
            rn, mask = SP, _reglist(ops[0])
        else:
            rn_text = ops[0].rstrip("!")
            rn, mask = _reg(rn_text), _reglist(ops[1])
        if base in ("push", "stmdb"):
            return c | (0b100 << 25) | (1 << 24) | (1 << 21) | (rn << 16) | mask
        return c | (0b100 << 25) | (1 << 23) | (1 << 21) | (1 << 20) | (rn << 16) | mask

    if base in ("b", "bl"):
        target = _imm(ops[0])
        delta = (target - (address + 8)) & 0xFFFFFFFF
        if delta & 0x80000000:
            delta -= 1 << 32
        if delta % 4:
            raise AsmError("misaligned branch target")
        offset = delta >> 2
        if not -(1 << 23) <= offset < (1 << 23):
            raise AsmError("branch offset out of range")
        link = 1 if base == "bl" else 0
        return c | (0b101 << 25) | (link << 24) | (offset & 0xFFFFFF)

    if base == "bx":
        return c | 0x012FFF10 | _reg(ops[0])

    raise AsmError(f"unsupported instruction {text!r}")


__all__ = ["AsmError", "assemble", "split_mnemonic", "split_operands", "LR", "PC", "SP"]
