from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from ..disasm import Instr, Kind


class EdgeKind(str, Enum):
    FALLTHROUGH = "fallthrough"
    TAKEN = "taken"
    UNCOND = "uncond"


class Terminator(str, Enum):
    COND = "Cond"
    UNCOND = "Uncond"
    RETURN = "Return"
    CALL = "Call-fallthrough"
    STRAIGHT = "Straight"


class Category(str, Enum):
    UNASSIGNED = "unassigned"
    CORE = "core"
    RUNTIME = "runtime"


class CallKind(str, Enum):
    RESOLVED = "resolved"
    UNRESOLVED = "unresolved"
    INDIRECT = "indirect"


PLATFORMS = ("CODESYSv3", "GEB", "OpenPLCv2", "OpenPLCv3")
FAMILIES = ("CODESYS", "GEB", "OpenPLC")


def family_of(platform: str) -> str:
    return "OpenPLC" if platform.startswith("OpenPLC") else platform.removesuffix("v3")


@dataclass(frozen=True)
class CallSite:
    at: int
    kind: CallKind
    target: str | int | None = None


@dataclass(frozen=True)
class BasicBlock:
    start: int
    lo: int  # half-open index range into the function's instruction list
    hi: int
    terminator: Terminator

    def __len__(self) -> int:
        return self.hi - self.lo


Edge = tuple[int, int, EdgeKind]


@dataclass
class RecoveredFunction:
    id: str
    entry: int
    size_bytes: int
    instructions: list[Instr]
    blocks: list[BasicBlock]
    edges: list[Edge]
    calls: list[CallSite]
    category: Category = Category.UNASSIGNED

    def block_instructions(self, idx: int) -> list[Instr]:
        b = self.blocks[idx]
        return self.instructions[b.lo:b.hi]

    def out_degree(self, idx: int) -> int:
        return sum(1 for s, _, _ in self.edges if s == idx)

    def in_degree(self, idx: int) -> int:
        return sum(1 for _, d, _ in self.edges if d == idx)

    def resolved_callees(self) -> list[str]:
        return [c.target for c in self.calls if c.kind is CallKind.RESOLVED]


@dataclass
class FunctionProgramRecord:
    binary_id: str
    program_id: str
    platform_label: str | None = None
    functionality_label: str | None = None
    functions: list[RecoveredFunction] = field(default_factory=list)

    def by_id(self) -> dict[str, RecoveredFunction]:
        return {f.id: f for f in self.functions}

    def of_category(self, *cats: Category) -> list[RecoveredFunction]:
        return [f for f in self.functions if f.category in cats]


def derive_terminator(last: Instr, internal_target: bool) -> Terminator:
    """Terminator class of a block from its last instruction."""
    if last.kind in (Kind.RETURN, Kind.INDIRECT):
        return Terminator.RETURN
    if last.kind is Kind.BRANCHLINK:
        return Terminator.CALL
    if last.kind is Kind.BRANCH:
        if internal_target:
            return Terminator.COND if last.conditional else Terminator.UNCOND
        # jump out of the function: a tail call
        return Terminator.CALL if last.conditional else Terminator.RETURN
    return Terminator.STRAIGHT
