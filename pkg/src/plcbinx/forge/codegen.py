"""A tiny function-level IR, its layout/encoding, and the CFG it implies.

Branch targets stay symbolic until layout. The expected blocks, edges and
calls are read off the IR, which is the ground truth the forge writes into
its manifests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..disasm import assemble

# IR item tags
INS, RAW, LABEL, BR, CALL, TAIL, RET, IND = "ins", "raw", "label", "br", "call", "tail", "ret", "ind"
_ENDS_PATH = (RET, IND)


class EncodingOverflow(ValueError):
    pass


@dataclass
class FunctionIR:
    name: str
    items: list[tuple] = field(default_factory=list)
    category: str = "runtime"  # core | runtime
    visible: bool = True  # has a symbol or metadata record
    pool_index: int | None = None
    _labels: int = 0

    # builder helpers
    def ins(self, text: str) -> "FunctionIR":
        self.items.append((INS, text))
        return self

    def raw(self, word: int) -> "FunctionIR":
        self.items.append((RAW, word))
        return self

    def new_label(self) -> str:
        self._labels += 1
        return f"L{self._labels}"

    def label(self, name: str) -> "FunctionIR":
        self.items.append((LABEL, name))
        return self

    def br(self, cond: str, label: str) -> "FunctionIR":
        self.items.append((BR, cond, label))
        return self

    def call(self, func: str) -> "FunctionIR":
        self.items.append((CALL, func))
        return self

    def tail(self, cond: str, func: str) -> "FunctionIR":
        self.items.append((TAIL, cond, func))
        return self

    def ret(self, text: str) -> "FunctionIR":
        self.items.append((RET, text))
        return self

    def ind(self, text: str) -> "FunctionIR":
        self.items.append((IND, text))
        return self

    @property
    def instructions(self) -> list[tuple]:
        return [it for it in self.items if it[0] != LABEL]

    def __len__(self) -> int:
        return len(self.instructions)

    def callees(self) -> list[str]:
        return [it[-1] for it in self.items if it[0] in (CALL, TAIL)]

    def check(self) -> None:
        """Every instruction must be reachable and the last one must end the path."""
        referenced = {it[2] for it in self.items if it[0] == BR}
        defined = [it[1] for it in self.items if it[0] == LABEL]
        missing = referenced - set(defined)
        if missing:
            raise ValueError(f"{self.name}: undefined labels {sorted(missing)}")
        prev_ends = False
        for it in self.items:
            if it[0] == LABEL:
                if it[1] in referenced:
                    prev_ends = False
                continue
            if prev_ends:
                raise ValueError(f"{self.name}: unreachable instruction {it}")
            prev_ends = (it[0] in _ENDS_PATH or (it[0] in (BR, TAIL) and it[1] == ""))
        last = self.instructions[-1] if self.items else None
        if last is None or not (last[0] in _ENDS_PATH or (last[0] in (BR, TAIL) and last[1] == "")):
            raise ValueError(f"{self.name}: function may fall off its end")


@dataclass
class Placed:
    """A function after layout: addresses, encoded words and expected structure."""

    ir: FunctionIR
    entry: int
    words: list[int]
    texts: list[str]
    blocks: list[tuple[int, int]]  # (start address, instruction count)
    edges: list[tuple[int, int, str]]
    calls: list[tuple[int, str, str | None]]  # (at, kind, callee name or None)

    @property
    def size(self) -> int:
        return 4 * len(self.words)


def layout(functions: list[FunctionIR], base: int) -> dict[str, int]:
    addrs, pos = {}, base
    for f in functions:
        addrs[f.name] = pos
        pos += 4 * len(f)
    return addrs


def place(f: FunctionIR, entry: int, func_addrs: dict[str, int]) -> Placed:
    f.check()
    label_idx: dict[str, int] = {}
    n = 0
    for it in f.items:
        if it[0] == LABEL:
            label_idx[it[1]] = n
        else:
            n += 1
    instrs = f.instructions
    words, texts = [], []
    for i, it in enumerate(instrs):
        addr = entry + 4 * i
        tag = it[0]
        if tag == RAW:
            words.append(it[1])
            texts.append("undef")
            continue
        if tag == BR:
            text = f"b{it[1]} #{entry + 4 * label_idx[it[2]]:#x}"
        elif tag == CALL:
            text = f"bl #{func_addrs[it[1]]:#x}"
        elif tag == TAIL:
            text = f"b{it[1]} #{func_addrs[it[2]]:#x}"
        else:
            text = it[1]
        try:
            words.append(assemble(text, addr))
        except ValueError as exc:
            if "out of range" in str(exc):
                raise EncodingOverflow(f"{f.name}: {text}") from exc
            raise
        texts.append(text)

    # block structure implied by the IR
    referenced = {it[2] for it in instrs if it[0] == BR}
    leaders = {0} | {label_idx[name] for name in referenced}
    for i, it in enumerate(instrs):
        if it[0] in (BR, CALL, TAIL, RET, IND) and i + 1 < len(instrs):
            leaders.add(i + 1)
    starts = sorted(leaders)
    block_of = {}
    blocks = []
    for b, lo in enumerate(starts):
        hi = starts[b + 1] if b + 1 < len(starts) else len(instrs)
        blocks.append((entry + 4 * lo, hi - lo))
        for i in range(lo, hi):
            block_of[i] = b
    edges, calls = [], []
    for b, lo in enumerate(starts):
        hi = starts[b + 1] if b + 1 < len(starts) else len(instrs)
        last = instrs[hi - 1]
        tag = last[0]
        has_next = hi < len(instrs)
        if tag == BR:
            dst = block_of[label_idx[last[2]]]
            if last[1]:
                edges.append((b, dst, "taken"))
                if has_next:
                    edges.append((b, b + 1, "fallthrough"))
            else:
                edges.append((b, dst, "uncond"))
        elif tag in _ENDS_PATH or (tag == TAIL and not last[1]):
            pass
        elif has_next:
            edges.append((b, b + 1, "fallthrough"))
    for i, it in enumerate(instrs):
        if it[0] in (CALL, TAIL):
            calls.append((entry + 4 * i, "direct", it[-1]))
        elif it[0] == IND:
            calls.append((entry + 4 * i, "indirect", None))
    return Placed(f, entry, words, texts, blocks, edges, calls)


def place_all(functions: list[FunctionIR], base: int) -> list[Placed]:
    addrs = layout(functions, base)
    return [place(f, addrs[f.name], addrs) for f in functions]
