"""Instruction decoding behind a small ISA interface.

Only ARM32 is registered; other ISAs plug in by providing a decoder with the
same ``decode(word, address) -> Instr | None`` contract.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable

from . import arm32
from .asm import AsmError, assemble
from .instr import Instr, Kind, Operand, OperandClass, placeholder


class UnalignedRegion(ValueError):
    pass


@dataclass(frozen=True)
class Isa:
    name: str
    word_size: int
    decode: Callable[[int, int], Instr | None]
    assemble: Callable[[str, int], int]


ARM32 = Isa("arm32", 4, arm32.decode, assemble)
ISAS = {ARM32.name: ARM32}


def decode(word: int, address: int) -> Instr | None:
    return arm32.decode(word, address)


def linear_sweep(region: bytes, base: int, isa: Isa = ARM32) -> list[Instr]:
    """Decode every aligned word; undecodable words become ``undef`` placeholders."""
    if len(region) % isa.word_size or base % isa.word_size:
        raise UnalignedRegion(f"region at {base:#x} of length {len(region)} is not word aligned")
    out = []
    for i, (word,) in enumerate(struct.iter_unpack("<I", region)):
        addr = base + 4 * i
        ins = isa.decode(word, addr)
        out.append(ins if ins is not None else placeholder(word, addr))
    return out


__all__ = [
    "ARM32", "ISAS", "AsmError", "Instr", "Isa", "Kind", "Operand", "OperandClass",
    "UnalignedRegion", "assemble", "decode", "linear_sweep", "placeholder",
]
