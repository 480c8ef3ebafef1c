"""FLIF: the per-binary JSON interchange format for recovered functions.

Export writes fields in a fixed order with compact separators so identical
records give identical bytes. Import re-decodes every raw word and checks the
structural invariants, reporting the first problem with a JSON-pointer path.
"""

from __future__ import annotations

import json

from ..disasm import ARM32, Isa, Kind, placeholder
from .types import (PLATFORMS, BasicBlock, CallKind, CallSite, Category, EdgeKind, FunctionProgramRecord,
                    RecoveredFunction, Terminator, derive_terminator)

FLIF_VERSION = 1


class SchemaViolation(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def record_to_dict(record: FunctionProgramRecord) -> dict:
    return {
        "flif_version": FLIF_VERSION,
        "binary_id": record.binary_id,
        "program_id": record.program_id,
        "platform_label": record.platform_label,
        "functionality_label": record.functionality_label,
        "functions": [_function_to_dict(f) for f in record.functions],
    }


def _function_to_dict(f: RecoveredFunction) -> dict:
    return {
        "id": f.id,
        "entry": f.entry,
        "size_bytes": f.size_bytes,
        "category": f.category.value,
        "instructions": [{"addr": i.address, "raw": i.raw, "text": i.text} for i in f.instructions],
        "blocks": [{"start": b.start, "lo": b.lo, "hi": b.hi} for b in f.blocks],
        "edges": [[s, d, k.value] for s, d, k in f.edges],
        "calls": [{"at": c.at, "kind": c.kind.value, "target": c.target} for c in f.calls],
    }


def export_flif(record: FunctionProgramRecord) -> bytes:
    return json.dumps(record_to_dict(record), separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def import_flif(data: bytes | str, isa: Isa = ARM32) -> FunctionProgramRecord:
    try:
        obj = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaViolation("", f"not JSON: {exc}") from None
    return record_from_dict(obj, isa)


def _expect(obj, key: str, types, path: str, nullable: bool = False):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaViolation(f"{path}/{key}", "missing field")
    v = obj[key]
    if v is None and nullable:
        return None
    # bool is an int subclass; reject it where integers are expected
    if not isinstance(v, types) or (types is int and isinstance(v, bool)):
        raise SchemaViolation(f"{path}/{key}", f"expected {getattr(types, '__name__', types)}")
    if types is int and v < 0:
        raise SchemaViolation(f"{path}/{key}", "negative integer")
    return v


def record_from_dict(obj: dict, isa: Isa = ARM32) -> FunctionProgramRecord:
    if not isinstance(obj, dict):
        raise SchemaViolation("", "top level must be an object")
    if _expect(obj, "flif_version", int, "") != FLIF_VERSION:
        raise SchemaViolation("/flif_version", f"unsupported version {obj['flif_version']}")
    platform = _expect(obj, "platform_label", str, "", nullable=True)
    if platform is not None and platform not in PLATFORMS:
        raise SchemaViolation("/platform_label", f"unknown platform {platform!r}")
    record = FunctionProgramRecord(
        _expect(obj, "binary_id", str, ""),
        _expect(obj, "program_id", str, ""),
        platform,
        _expect(obj, "functionality_label", str, "", nullable=True),
    )
    funcs = _expect(obj, "functions", list, "")
    ids = set()
    for n, fobj in enumerate(funcs):
        path = f"/functions/{n}"
        f = _function_from_dict(fobj, path, isa)
        if f.id in ids:
            raise SchemaViolation(f"{path}/id", f"duplicate function id {f.id!r}")
        ids.add(f.id)
        record.functions.append(f)
    return record


def _function_from_dict(fobj: dict, path: str, isa: Isa) -> RecoveredFunction:
    fid = _expect(fobj, "id", str, path)
    entry = _expect(fobj, "entry", int, path)
    size = _expect(fobj, "size_bytes", int, path)
    try:
        category = Category(_expect(fobj, "category", str, path))
    except ValueError:
        raise SchemaViolation(f"{path}/category", "unknown category") from None

    instructions = []
    for k, iobj in enumerate(_expect(fobj, "instructions", list, path)):
        ip = f"{path}/instructions/{k}"
        addr = _expect(iobj, "addr", int, ip)
        raw = _expect(iobj, "raw", int, ip)
        text = _expect(iobj, "text", str, ip)
        if addr % isa.word_size:
            raise SchemaViolation(f"{ip}/addr", "unaligned address")
        if raw > 0xFFFFFFFF:
            raise SchemaViolation(f"{ip}/raw", "not a 32-bit word")
        ins = isa.decode(raw, addr)
        if ins is None:
            ins = placeholder(raw, addr)
        if ins.text != text:
            raise SchemaViolation(f"{ip}/text", f"{text!r} does not match decoded {ins.text!r}")
        instructions.append(ins)

    blocks = []
    body = {i.address for i in instructions}
    for k, bobj in enumerate(_expect(fobj, "blocks", list, path)):
        bp = f"{path}/blocks/{k}"
        start = _expect(bobj, "start", int, bp)
        lo = _expect(bobj, "lo", int, bp)
        hi = _expect(bobj, "hi", int, bp)
        if not lo < hi <= len(instructions):
            raise SchemaViolation(f"{bp}/hi", f"bad instruction range [{lo}, {hi})")
        if instructions[lo].address != start:
            raise SchemaViolation(f"{bp}/start", "start does not match first instruction")
        last = instructions[hi - 1]
        blocks.append(BasicBlock(start, lo, hi, derive_terminator(last, last.branch_target in body)))

    edges = []
    for k, e in enumerate(_expect(fobj, "edges", list, path)):
        ep = f"{path}/edges/{k}"
        if not (isinstance(e, list) and len(e) == 3):
            raise SchemaViolation(ep, "edge must be [src, dst, kind]")
        for j in (0, 1):
            if not isinstance(e[j], int) or isinstance(e[j], bool) or not 0 <= e[j] < len(blocks):
                raise SchemaViolation(f"{ep}/{j}", f"block index {e[j]!r} out of range (have {len(blocks)})")
        try:
            edges.append((e[0], e[1], EdgeKind(e[2])))
        except ValueError:
            raise SchemaViolation(f"{ep}/2", f"unknown edge kind {e[2]!r}") from None

    calls = []
    for k, cobj in enumerate(_expect(fobj, "calls", list, path)):
        cp = f"{path}/calls/{k}"
        at = _expect(cobj, "at", int, cp)
        try:
            kind = CallKind(_expect(cobj, "kind", str, cp))
        except ValueError:
            raise SchemaViolation(f"{cp}/kind", "unknown call kind") from None
        want = {CallKind.RESOLVED: str, CallKind.UNRESOLVED: int}.get(kind)
        target = _expect(cobj, "target", want or str, cp, nullable=want is None)
        if want is None and target is not None:
            raise SchemaViolation(f"{cp}/target", "indirect call carries no target")
        calls.append(CallSite(at, kind, target))

    f = RecoveredFunction(fid, entry, size, instructions, blocks, edges, calls, category)
    problem = validate_function(f)
    if problem:
        sub, msg = problem
        raise SchemaViolation(path + sub, msg)
    return f


def validate_function(f: RecoveredFunction) -> tuple[str, str] | None:
    """First violated structural invariant as (pointer suffix, message), or None."""
    if f.size_bytes != 4 * len(f.instructions):
        return "/size_bytes", "size_bytes must equal 4 * instruction count"
    if not f.instructions:
        return "/instructions", "function has no instructions"
    if f.instructions[0].address != f.entry:
        return "/entry", "entry does not match first instruction"
    for k in range(1, len(f.instructions)):
        if f.instructions[k].address <= f.instructions[k - 1].address:
            return f"/instructions/{k}/addr", "addresses must increase"
    pos = 0
    for k, b in enumerate(f.blocks):
        if b.lo != pos:
            return f"/blocks/{k}/lo", "blocks must partition the instruction list"
        for j in range(b.lo, b.hi - 1):
            if f.instructions[j].kind in (Kind.BRANCH, Kind.BRANCHLINK, Kind.RETURN, Kind.INDIRECT):
                return f"/blocks/{k}", "control transfer before the end of a block"
        pos = b.hi
    if pos != len(f.instructions):
        return "/blocks", "blocks do not cover every instruction"
    limits = {Terminator.COND: 2, Terminator.UNCOND: 1, Terminator.RETURN: 0}
    for k, b in enumerate(f.blocks):
        out = f.out_degree(k)
        cap = limits.get(b.terminator, 1)
        if out > cap or (b.terminator is Terminator.UNCOND and out != 1):
            return f"/blocks/{k}", f"{b.terminator.value} block has out-degree {out}"
    return None
