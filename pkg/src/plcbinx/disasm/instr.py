from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple


class Kind(str, Enum):
    DATAPROC = "DataProc"
    LOADSTORE = "LoadStore"
    BRANCH = "Branch"
    BRANCHLINK = "BranchLink"
    INDIRECT = "IndirectTransfer"
    RETURN = "Return"
    PUSHPOP = "PushPop"
    OTHER = "Other"


class OperandClass(str, Enum):
    REG = "Reg"
    IMM = "Imm"
    MEM = "Mem"
    LABEL = "Label"


class Operand(NamedTuple):
    cls: OperandClass
    text: str


AL = 14

# Control transfers end a basic block.
TRANSFER_KINDS = frozenset({Kind.BRANCH, Kind.BRANCHLINK, Kind.INDIRECT, Kind.RETURN})


@dataclass(frozen=True)
class Instr:
    address: int
    raw: int
    mnemonic: str
    operands: tuple[Operand, ...] = ()
    kind: Kind = Kind.OTHER
    branch_target: int | None = None
    cond: int = AL
    # push/stmdb register lists containing LR; used for prologue detection
    saves_lr: bool = field(default=False, compare=False)

    @property
    def text(self) -> str:
        if not self.operands:
            return self.mnemonic
        return self.mnemonic + " " + ", ".join(op.text for op in self.operands)

    @property
    def conditional(self) -> bool:
        return self.cond != AL

    @property
    def is_undef(self) -> bool:
        return self.mnemonic == "undef"

    def __str__(self) -> str:
        return f"{self.address:08x}: {self.text}"


def placeholder(word: int, address: int) -> Instr:
    """Stand-in for a word outside the supported subset."""
    return Instr(address=address, raw=word, mnemonic="undef", kind=Kind.OTHER)
