"""Normalized token sequences, attributed CFGs, function hashes and runtime fingerprints."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

from ..disasm import Instr, Kind, OperandClass
from ..funcrec import CallKind, Category, FunctionProgramRecord, RecoveredFunction
from ..hashing import fnv1a64

OPERAND_TOKENS = {OperandClass.REG: "reg", OperandClass.IMM: "imm", OperandClass.MEM: "mem"}
BB_LEN_BUCKETS = ((2, "1-2"), (8, "3-8"), (16, "9-16"), (32, "17-32"))
BB_LEN_LABELS = tuple(label for _, label in BB_LEN_BUCKETS) + ("33+",)
SIZE_BOUNDS = (16, 32, 64, 128, 256, 512, 1024)

NameResolver = Callable[[int], "str | None"]


def normalize(instr: Instr, name_resolver: NameResolver | None = None, is_call: bool = False) -> list[str]:
    """Tokens for one instruction.

    ``name_resolver`` maps a call-site address to the callee name when known.
    ``is_call`` marks a plain branch leaving the function (a tail call).
    """
    if instr.is_undef:
        return ["undef"]
    m = instr.mnemonic
    if instr.kind is Kind.INDIRECT:
        return [m, "call_indirect"]
    if instr.kind is Kind.BRANCHLINK or (instr.kind is Kind.BRANCH and is_call):
        name = name_resolver(instr.address) if name_resolver else None
        return [m, f"call_name:{name}" if name else "call_addr"]
    if instr.kind in (Kind.BRANCH, Kind.RETURN):
        return [m]
    return [m] + [OPERAND_TOKENS[op.cls] for op in instr.operands if op.cls in OPERAND_TOKENS]


def _call_context(fn: RecoveredFunction) -> tuple[NameResolver, set[int]]:
    names = {c.at: c.target for c in fn.calls if c.kind is CallKind.RESOLVED}
    return names.get, {c.at for c in fn.calls}


def _tokens(fn: RecoveredFunction, instrs: list[Instr]) -> list[str]:
    resolve, call_sites = _call_context(fn)
    out: list[str] = []
    for ins in instrs:
        out += normalize(ins, resolve, ins.address in call_sites)
    return out


@dataclass
class TokenSeq:
    function_id: str
    tokens: list[str]


def build_token_seq(fn: RecoveredFunction) -> TokenSeq:
    return TokenSeq(fn.id, _tokens(fn, fn.instructions))


def hash_function(seq: TokenSeq | list[str]) -> int:
    tokens = seq.tokens if isinstance(seq, TokenSeq) else seq
    return fnv1a64("\n".join(tokens))


def bb_len_bucket(n: int) -> str:
    for bound, label in BB_LEN_BUCKETS:
        if n <= bound:
            return label
    return "33+"


@dataclass
class AcfgNode:
    tokens: list[str]
    bb_len: int
    in_degree: int
    out_degree: int
    category: str  # core_function | runtime_function

    @property
    def bb_len_bucket(self) -> str:
        return bb_len_bucket(self.bb_len)

    def feature_tokens(self) -> list[str]:
        return [f"bb_len:{self.bb_len_bucket}", f"bb_in:{self.in_degree}", f"bb_out:{self.out_degree}", self.category]


@dataclass
class Acfg:
    function_id: str
    nodes: list[AcfgNode]
    edges: list[tuple[int, int]]


def category_token(cat: Category) -> str:
    return "core_function" if cat is Category.CORE else "runtime_function"


def build_acfg(fn: RecoveredFunction) -> Acfg:
    edges = [(s, d) for s, d, _ in fn.edges]
    indeg, outdeg = Counter(d for _, d in edges), Counter(s for s, _ in edges)
    cat = category_token(fn.category)
    nodes = [AcfgNode(_tokens(fn, fn.block_instructions(i)), len(b), indeg[i], outdeg[i], cat)
             for i, b in enumerate(fn.blocks)]
    return Acfg(fn.id, nodes, edges)


def name_tokens(fid: str) -> list[str]:
    """Split on underscores and lower-to-upper case boundaries."""
    out = []
    for part in fid.split("_"):
        out += re.sub(r"(?<=[a-z0-9])(?=[A-Z])", " ", part).split()
    return out


def size_bucket(size: int) -> int:
    for i, bound in enumerate(SIZE_BOUNDS):
        if size <= bound:
            return i
    return len(SIZE_BOUNDS)


@dataclass
class Fingerprint:
    binary_id: str
    function_hashes: set[int] = field(default_factory=set)
    runtime_count: int = 0
    size_histogram: list[int] = field(default_factory=lambda: [0] * (len(SIZE_BOUNDS) + 1))
    name_tokens: Counter = field(default_factory=Counter)


def build_fingerprint(record: FunctionProgramRecord) -> Fingerprint:
    fp = Fingerprint(record.binary_id)
    for fn in record.of_category(Category.RUNTIME):
        fp.function_hashes.add(hash_function(build_token_seq(fn)))
        fp.runtime_count += 1
        fp.size_histogram[size_bucket(fn.size_bytes)] += 1
        if not fn.id.startswith("sub_"):
            fp.name_tokens.update(name_tokens(fn.id.split("#")[0]))
    return fp


def representation_dict(record: FunctionProgramRecord) -> dict:
    fp = build_fingerprint(record)
    return {
        "binary_id": record.binary_id,
        "token_seqs": [{"function_id": s.function_id, "tokens": s.tokens, "hash": hash_function(s)}
                       for s in map(build_token_seq, record.functions)],
        "acfgs": [{"function_id": g.function_id,
                   "nodes": [{"tokens": n.tokens, "features": n.feature_tokens()} for n in g.nodes],
                   "edges": [list(e) for e in g.edges]}
                  for g in map(build_acfg, record.functions)],
        "fingerprint": {
            "binary_id": fp.binary_id,
            "function_hashes": sorted(fp.function_hashes),
            "runtime_count": fp.runtime_count,
            "size_histogram": fp.size_histogram,
            "name_tokens": dict(sorted(fp.name_tokens.items())),
        },
    }


def export_representation(record: FunctionProgramRecord) -> bytes:
    return json.dumps(representation_dict(record), separators=(",", ":")).encode("utf-8")


__all__ = [
    "Acfg", "AcfgNode", "BB_LEN_LABELS", "Fingerprint", "SIZE_BOUNDS", "TokenSeq", "bb_len_bucket", "build_acfg",
    "build_fingerprint", "build_token_seq", "category_token", "export_representation", "hash_function",
    "name_tokens", "normalize", "representation_dict", "size_bucket",
]
