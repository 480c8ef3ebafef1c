"""Entry discovery, body traversal, block/edge construction and naming."""

from __future__ import annotations

import bisect
import logging

from ..binloader import LoadedImage
from ..disasm import ARM32, Instr, Isa, Kind, linear_sweep
from .types import (BasicBlock, CallKind, CallSite, Category, EdgeKind, FunctionProgramRecord,
                    RecoveredFunction, derive_terminator)

log = logging.getLogger(__name__)


class DanglingEntry(ValueError):
    pass


def sweep_image(image: LoadedImage, isa: Isa = ARM32) -> list[Instr]:
    out: list[Instr] = []
    for region in image.code_regions:
        out += linear_sweep(image.region_bytes(region), region.vaddr, isa)
    return out


def find_entries(instrs: list[Instr], image: LoadedImage) -> list[int]:
    """Prologues saving LR, direct call targets, and symbol/record pointers."""
    addrs = {i.address for i in instrs}
    entries = set()
    for ins in instrs:
        if ins.saves_lr:
            entries.add(ins.address)
        elif ins.kind is Kind.BRANCHLINK and ins.branch_target in addrs:
            entries.add(ins.branch_target)
    for _name, addr, _raw in image.named_addresses():
        if addr in addrs:
            entries.add(addr)
    return sorted(entries)


def recover_function(entry: int, entries: list[int], by_addr: dict[int, Instr]) -> RecoveredFunction:
    first = by_addr.get(entry)
    if first is None or first.is_undef:
        raise DanglingEntry(f"entry {entry:#x} does not hold a decodable instruction")
    k = bisect.bisect_right(entries, entry)
    limit = entries[k] if k < len(entries) else float("inf")

    def internal(addr: int | None) -> bool:
        return addr is not None and entry <= addr < limit and addr in by_addr

    body: set[int] = set()
    calls: list[CallSite] = []
    work = [entry]
    while work:
        a = work.pop()
        while internal(a) and a not in body:
            ins = by_addr[a]
            body.add(a)
            if ins.kind is Kind.RETURN:
                break
            if ins.kind is Kind.INDIRECT:
                calls.append(CallSite(a, CallKind.INDIRECT))
                break
            if ins.kind is Kind.BRANCHLINK:
                calls.append(CallSite(a, CallKind.UNRESOLVED, ins.branch_target))
            elif ins.kind is Kind.BRANCH:
                t = ins.branch_target
                if not internal(t):
                    calls.append(CallSite(a, CallKind.UNRESOLVED, t))
                    if not ins.conditional:
                        break
                elif ins.conditional:
                    work.append(t)
                else:
                    a = t
                    continue
            a += 4

    instructions = [by_addr[a] for a in sorted(body)]
    blocks, edges = build_cfg(instructions)
    calls.sort(key=lambda c: c.at)
    return RecoveredFunction(f"sub_{entry:08X}", entry, 4 * len(instructions), instructions, blocks, edges, calls)


def build_cfg(instructions: list[Instr]) -> tuple[list[BasicBlock], list[tuple[int, int, EdgeKind]]]:
    """Split a body into blocks and connect them. Branches leaving the body are calls."""
    body = {i.address for i in instructions}
    leaders = set()
    prev = None
    for ins in instructions:
        a = ins.address
        if prev is None or prev != a - 4:
            leaders.add(a)
        if ins.kind is Kind.BRANCH and ins.branch_target in body:
            leaders.add(ins.branch_target)
        if ins.kind in (Kind.BRANCH, Kind.BRANCHLINK, Kind.RETURN, Kind.INDIRECT):
            leaders.add(a + 4)
        prev = a
    leaders &= body

    blocks: list[BasicBlock] = []
    index_of: dict[int, int] = {}
    lo = 0
    for i, ins in enumerate(instructions):
        if i > 0 and ins.address in leaders:
            blocks.append(_block(instructions, lo, i, body))
            lo = i
        index_of[ins.address] = len(blocks)
    if instructions:
        blocks.append(_block(instructions, lo, len(instructions), body))

    edges = []
    for bi, blk in enumerate(blocks):
        last = instructions[blk.hi - 1]
        nxt = last.address + 4
        t = last.branch_target
        if last.kind is Kind.BRANCH and t in body:
            if last.conditional:
                edges.append((bi, index_of[t], EdgeKind.TAKEN))
                if nxt in body:
                    edges.append((bi, index_of[nxt], EdgeKind.FALLTHROUGH))
            else:
                edges.append((bi, index_of[t], EdgeKind.UNCOND))
        elif last.kind in (Kind.RETURN, Kind.INDIRECT):
            pass
        elif last.kind is Kind.BRANCH and not last.conditional:
            pass
        elif nxt in body:
            edges.append((bi, index_of[nxt], EdgeKind.FALLTHROUGH))
    return blocks, edges


def _block(instructions: list[Instr], lo: int, hi: int, body: set[int]) -> BasicBlock:
    last = instructions[hi - 1]
    return BasicBlock(instructions[lo].address, lo, hi, derive_terminator(last, last.branch_target in body))


def assign_names(functions: list[RecoveredFunction], image: LoadedImage) -> list[RecoveredFunction]:
    """Symbol / record names for matching entries; upgrade calls to named targets."""
    names: dict[int, str] = {}
    for name, addr, raw in sorted(image.named_addresses(), key=lambda t: t[2]):
        if addr in names:
            if names[addr] != name:
                log.warning("NameCollision at %#x: keeping %r, dropping %r", addr, names[addr], name)
            continue
        names[addr] = name
    for f in functions:
        f.id = names.get(f.entry, f"sub_{f.entry:08X}")
        f.calls = [CallSite(c.at, CallKind.RESOLVED, names[c.target])
                   if c.kind is CallKind.UNRESOLVED and c.target in names else c
                   for c in f.calls]
    return functions


def recover_functions(image: LoadedImage, isa: Isa = ARM32) -> list[RecoveredFunction]:
    instrs = sweep_image(image, isa)
    by_addr = {i.address: i for i in instrs}
    entries = find_entries(instrs, image)
    functions = []
    for e in entries:
        try:
            functions.append(recover_function(e, entries, by_addr))
        except DanglingEntry as exc:
            log.warning("%s: %s; skipped", image.source_path or "<image>", exc)
    return assign_names(functions, image)


def build_record(image: LoadedImage | None, functions: list[RecoveredFunction], binary_id: str,
                 program_id: str, platform_label: str | None = None,
                 functionality_label: str | None = None) -> FunctionProgramRecord:
    functions = sorted(functions, key=lambda f: f.entry)
    seen: dict[str, int] = {}
    for f in functions:
        if f.id in seen:
            seen[f.id] += 1
            new_id = f"{f.id}#{seen[f.id]}"
            log.warning("DuplicateFunctionId %r at %#x renamed to %r", f.id, f.entry, new_id)
            f.id = new_id
        else:
            seen[f.id] = 1
    return FunctionProgramRecord(binary_id, program_id, platform_label, functionality_label, functions)


def reset_categories(record: FunctionProgramRecord) -> None:
    for f in record.functions:
        f.category = Category.UNASSIGNED
