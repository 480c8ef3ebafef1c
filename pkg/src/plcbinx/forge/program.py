"""Abstract PLC programs and their lowering to per-platform core functions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..hashing import fnv1a64
from .codegen import FunctionIR
from .labels import MOTIFS, PROFILES
from .pools import CORE_HELPERS, STYLES, fill

_NAME_HEADS = ("CALC", "CHECK", "UPDATE", "SCALE", "FILTER", "LIMIT", "STEP", "TOGGLE", "COUNT", "CONVERT",
               "MONITOR", "SELECT", "MERGE", "SPLIT", "SHIFT", "TRACK", "ARRAY")
_NAME_TAILS = ("VAL", "IN", "OUT", "BLK", "X", "CTRL", "DATA", "UNIT", "ABS")

MAIN_NAMES = {"CODESYSv3": "PLC_PRG", "GEB": "dt_PR_program0_exec", "OpenPLCv2": "PROGRAM0_body__",
              "OpenPLCv3": "PROGRAM0_body__"}


@dataclass
class Routine:
    logical: str
    kind: str  # FN | FB | PRG
    motifs: list[tuple]
    callees: list[int] = field(default_factory=list)  # indices of other routines
    helpers: list[int] = field(default_factory=list)  # indices into the platform helper list
    seed: int = 0


@dataclass
class AbstractProgram:
    program_id: str
    label: str
    seed: int
    routines: list[Routine]  # routines[0] is the program body
    mix: tuple[float, ...]
    imm_ratio: float

    def motif_counts(self) -> dict[str, int]:
        counts = dict.fromkeys(MOTIFS, 0)
        for r in self.routines:
            for m in r.motifs:
                counts[m[0]] += 1
        return counts


def _motif(kind: str, rng: np.random.Generator, block_len: float) -> tuple:
    n = lambda: max(1, int(rng.poisson(block_len)))  # noqa: E731
    if kind == "loop":
        return ("loop", n(), int(rng.integers(2, 64)))
    if kind == "diamond":
        return ("diamond", n(), n(), int(rng.integers(0, 32)))
    if kind == "straight":
        return ("straight", n() + int(rng.integers(6, 18)))
    if kind == "chain":
        return ("chain", int(rng.integers(2, 5)), n())
    return ("select", int(rng.integers(2, 6)), int(rng.integers(0, 32)))


def forge_program(label: str, program_seed: int, program_id: str | None = None,
                  names: list[str] | None = None) -> AbstractProgram:
    """Sample a program whose motifs follow the label's distribution.

    ``names`` overrides the logical names of the non-main routines.
    """
    prof = PROFILES[label]
    rng = np.random.default_rng(program_seed)
    jitter = rng.uniform(0.5, 1.5, len(MOTIFS))
    noise = rng.dirichlet(np.ones(len(prof.mix)))
    mix = tuple(float(x) for x in 0.6 * np.asarray(prof.mix) + 0.4 * noise)
    imm_ratio = float(np.clip(prof.imm_ratio + rng.normal(0, 0.1), 0.05, 0.95))
    extra = 1 + int(rng.choice(3, p=np.asarray(prof.routines) / sum(prof.routines)))
    if names is not None:
        extra = len(names)
    else:
        pool = [f"{h}_{t}" for h in _NAME_HEADS for t in _NAME_TAILS]
        names = [pool[int(i)] for i in rng.choice(len(pool), size=extra, replace=False)]

    routines = []
    for i in range(extra + 1):
        motifs = []
        for k, kind in enumerate(MOTIFS):
            motifs += [_motif(kind, rng, prof.block_len)
                       for _ in range(int(rng.poisson(prof.motif_rates[k] * jitter[k] * 0.8)))]
        if not motifs:
            motifs.append(_motif(MOTIFS[int(np.argmax(prof.motif_rates))], rng, prof.block_len))
        rng.shuffle(motifs)
        helpers = [int(h) for h in rng.integers(0, 4, int(rng.integers(0, 3)))]
        kind = "PRG" if i == 0 else ("FB" if rng.random() < 0.5 else "FN")
        routines.append(Routine("MAIN" if i == 0 else names[i - 1], kind, motifs, [], helpers,
                                int(rng.integers(1 << 62))))
    # call DAG: every routine is reached from the body, directly or through a lower-index routine
    for j in range(1, len(routines)):
        callers = [i for i in range(1, j) if rng.random() < 0.3]
        for i in callers or [0]:
            routines[i].callees.append(j)
    return AbstractProgram(program_id or f"{label}-{program_seed % 10000:04d}", label, program_seed, routines,
                           mix, imm_ratio)


def routine_name(program: AbstractProgram, index: int, platform: str) -> str:
    r = program.routines[index]
    if index == 0:
        return MAIN_NAMES[platform]
    if platform == "GEB":
        return f"dt_{r.kind}_{r.logical.lower()}" + ("_exec" if r.kind == "FB" else "")
    if platform.startswith("OpenPLC"):
        return r.logical + ("_body__" if r.kind == "FB" else "")
    # CODESYS library-style functions carry a leading underscore, e.g. _ARRAY_ABS
    return ("_" if r.kind == "FN" else "") + r.logical


def lower_routine(program: AbstractProgram, index: int, platform: str) -> FunctionIR:
    """Emit one routine in the platform's idiom. Instruction choices depend only on the program."""
    style = STYLES[platform]
    r = program.routines[index]
    rng = np.random.default_rng(r.seed)
    f = FunctionIR(routine_name(program, index, platform), category="core")
    for text in style.prologue:
        f.ins(text)
    helpers = CORE_HELPERS[platform]
    events: list[tuple] = [("motif", m) for m in r.motifs]
    events += [("call", routine_name(program, j, platform)) for j in r.callees]
    events += [("call", helpers[h % len(helpers)]) for h in r.helpers]
    order = rng.permutation(len(events))
    mix, imm = program.mix, program.imm_ratio
    for k in order:
        kind, arg = events[int(k)]
        if kind == "call":
            fill(f, rng, 1, style, mix, imm)
            f.call(arg)
            continue
        m = arg
        if m[0] == "loop":
            head = f.new_label()
            f.ins("mov r2, #0").label(head)
            fill(f, rng, m[1], style, mix, imm)
            f.ins("add r2, r2, #1").ins(f"cmp r2, #{m[2]}").br("lt", head)
        elif m[0] == "diamond":
            other, join = f.new_label(), f.new_label()
            f.ins(f"cmp r0, #{m[3]}").br("ne", other)
            fill(f, rng, m[1], style, mix, imm)
            f.br("", join).label(other)
            fill(f, rng, m[2], style, mix, imm)
            f.label(join)
        elif m[0] == "straight":
            fill(f, rng, m[1], style, mix, imm)
        elif m[0] == "chain":
            cases = [f.new_label() for _ in range(m[1])]
            end = f.new_label()
            for c, lab in enumerate(cases):
                f.ins(f"cmp r1, #{c}").br("eq", lab)
            fill(f, rng, 1, style, mix, imm)
            f.br("", end)
            for c, lab in enumerate(cases):
                f.label(lab)
                fill(f, rng, max(1, m[2] // 2), style, mix, imm)
                if c + 1 < len(cases):
                    f.br("", end)
            f.label(end)
        else:  # select: conditional execution without branches
            f.ins(f"cmp r0, #{m[2]}")
            for c in range(m[1]):
                cond = ("eq", "ne", "gt", "le", "lt", "ge")[c % 6]
                f.ins(f"mov{cond} r{c % 4}, #{int(rng.integers(0, 256))}")
    fill(f, rng, 1, style, mix, imm)
    for text in style.before_ret:
        f.ins(text)
    f.ret(style.ret)
    return f


def core_functions(program: AbstractProgram, platform: str) -> list[FunctionIR]:
    return [lower_routine(program, i, platform) for i in range(len(program.routines))]


def program_seed(spec_seed: int, label: str, k: int) -> int:
    return fnv1a64(f"program:{spec_seed}:{label}:{k}") & ((1 << 63) - 1)
