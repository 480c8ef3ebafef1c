"""Ground-truthed synthetic corpus of PLC-style binaries.

Every binary comes with a manifest describing its code regions and the
functions recovery is expected to find, so each analysis stage can be checked
against an oracle.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..funcrec import PLATFORMS
from ..hashing import fnv1a64
from .codegen import EncodingOverflow, FunctionIR, Placed, place
from .containers import (APP_CODE, PE_IMAGE_BASE, AppRecord, elf_code_base, pe_section_rvas, write_app,
                         write_elf, write_pe)
from .labels import LABELS, MOTIFS, PROFILES, LabelProfile
from .pools import CORE_HELPERS, POOL_NAMES, STYLES, runtime_function, select_runtime
from .program import AbstractProgram, core_functions, forge_program, program_seed, routine_name

log = logging.getLogger(__name__)

EXTENSIONS = {"ELF": ".elf", "PE": ".exe", "APP": ".app"}
INDEX_COLUMNS = ("binary_id", "program_id", "platform", "label", "path")


@dataclass(frozen=True)
class ForgeSpec:
    programs_per_label: int = 8
    labels: tuple[str, ...] = LABELS
    platforms: tuple[str, ...] = PLATFORMS
    skip_prob: float = 0.25
    seed: int = 7
    unnamed_runtime: float = 0.10  # share of ELF/PE runtime functions without a symbol


@dataclass
class ForgedBinary:
    binary_id: str
    program_id: str
    platform: str
    label: str
    data: bytes
    manifest: dict = field(repr=False)

    @property
    def filename(self) -> str:
        return self.binary_id + EXTENSIONS[STYLES[self.platform].fmt]


def binary_id_for(program_id: str, platform: str) -> str:
    return f"{program_id}__{platform}"


def _place_segments(segments: list[tuple[list[FunctionIR], int]]) -> list[list[Placed]]:
    addrs = {}
    for funcs, base in segments:
        pos = base
        for f in funcs:
            addrs[f.name] = pos
            pos += 4 * len(f)
    return [[place(f, addrs[f.name], addrs) for f in funcs] for funcs, _ in segments]


def _code_bytes(placed: list[Placed]) -> bytes:
    words = [w for p in placed for w in p.words]
    return np.asarray(words, dtype="<u4").tobytes()


def forge_binary(program: AbstractProgram, platform: str, seed: int, spec: ForgeSpec = ForgeSpec()) -> ForgedBinary:
    style = STYLES[platform]
    rng = np.random.default_rng(seed)
    core = core_functions(program, platform)
    helpers = sorted({c for f in core for c in f.callees() if c in POOL_NAMES[platform]})
    names = select_runtime(platform, rng, helpers)
    index = {n: i for i, n in enumerate(POOL_NAMES[platform])}
    runtime = [runtime_function(platform, index[n]) for n in names]
    runtime = [runtime[int(i)] for i in rng.permutation(len(runtime))]
    for f in runtime:
        f.visible = style.fmt != "APP" and rng.random() >= spec.unnamed_runtime
    functions = core + runtime
    binary_id = binary_id_for(program.program_id, platform)

    if style.fmt == "ELF":
        (placed,) = _place_segments([(functions, elf_code_base())])
        code = _code_bytes(placed)
        symbols = [(p.ir.name, p.entry, p.size) for p in placed if p.ir.visible]
        rodata = b"".join(int(x).to_bytes(4, "little") for x in rng.integers(0, 1 << 32, 32, dtype=np.uint64))
        data = write_elf(code, symbols, rodata, [("g_retain_area", 0), ("g_io_image", 64)])
        regions = [[elf_code_base() - 0x10000, len(code), elf_code_base()]]
        all_placed = placed
    elif style.fmt == "PE":
        split = len(functions) // 2 if rng.random() < 0.3 else len(functions)
        parts = [functions[:split]] + ([functions[split:]] if split < len(functions) else [])
        sizes = [4 * sum(len(f) for f in part) for part in parts]
        rvas = pe_section_rvas(sizes)
        placed_parts = _place_segments([(part, PE_IMAGE_BASE + rva) for part, rva in zip(parts, rvas)])
        codes = [_code_bytes(pp) for pp in placed_parts]
        all_placed = [p for pp in placed_parts for p in pp]
        symbols = [(p.ir.name, p.entry) for p in all_placed if p.ir.visible]
        use_coff = bool(rng.random() < 0.5)
        data = write_pe(codes, symbols, use_coff, ["g_config"])
        regions, ptr = [], 0x400
        for c, rva in zip(codes, rvas):
            regions.append([ptr, len(c), PE_IMAGE_BASE + rva])
            ptr += (len(c) + 0x1FF) // 0x200 * 0x200
    else:
        (placed,) = _place_segments([(functions, APP_CODE)])
        code = _code_bytes(placed)
        records = [AppRecord(p.ir.name, p.entry) for p in placed if p.ir.category == "core"]
        if rng.random() < 0.2:
            records.append(AppRecord(records[0].name + "_TASK", records[0].pointer))
        records += [AppRecord(n, 0x100 + 0x40 * i) for i, n in enumerate(("GVL_IO", "GVL_RETAIN"))]
        data, code_len = write_app(code, records, platform, seed)
        for p in placed:
            p.ir.visible = p.ir.category == "core"
        regions = [[APP_CODE, code_len, APP_CODE]]
        all_placed = placed

    return ForgedBinary(binary_id, program.program_id, platform, program.label, data,
                        build_manifest(binary_id, program, platform, style.fmt, regions, all_placed))


def expected_id(p: Placed) -> str:
    return p.ir.name if p.ir.visible else f"sub_{p.entry:08X}"


def build_manifest(binary_id: str, program: AbstractProgram, platform: str, fmt: str, regions: list,
                   placed: list[Placed]) -> dict:
    by_name = {p.ir.name: p for p in placed}
    functions = []
    for p in sorted(placed, key=lambda q: q.entry):
        calls = []
        for at, kind, callee in p.calls:
            if kind == "indirect":
                calls.append({"at": at, "kind": "indirect", "target": None})
            elif by_name[callee].ir.visible:
                calls.append({"at": at, "kind": "resolved", "target": callee})
            else:
                calls.append({"at": at, "kind": "unresolved", "target": by_name[callee].entry})
        functions.append({
            "id": expected_id(p),
            "name": p.ir.name,
            "entry": p.entry,
            "size": p.size,
            "category": p.ir.category,
            "blocks": [list(b) for b in p.blocks],
            "edges": [list(e) for e in p.edges],
            "calls": calls,
            "asm": p.texts,
        })
    return {
        "binary_id": binary_id,
        "program_id": program.program_id,
        "platform": platform,
        "label": program.label,
        "format": fmt,
        "code_regions": regions,
        "motif_counts": program.motif_counts(),
        "functions": functions,
    }


def iter_programs(spec: ForgeSpec):
    """(program, platforms) pairs; a program may skip one platform, except each label's last program."""
    for label in spec.labels:
        for k in range(spec.programs_per_label):
            seed = program_seed(spec.seed, label, k)
            rng = np.random.default_rng(seed ^ 0x5EED)
            platforms = list(spec.platforms)
            if k < spec.programs_per_label - 1 and len(platforms) > 1 and rng.random() < spec.skip_prob:
                platforms.pop(int(rng.integers(len(platforms))))
            yield forge_program(label, seed, program_id=f"{label}-{k:02d}"), platforms


def forge_corpus_binaries(spec: ForgeSpec = ForgeSpec()):
    for program, platforms in iter_programs(spec):
        for platform in platforms:
            seed = fnv1a64(f"binary:{program.seed}:{platform}") & ((1 << 63) - 1)
            for attempt in range(4):
                try:
                    yield forge_binary(program, platform, seed + attempt, spec)
                    break
                except EncodingOverflow as exc:
                    log.warning("%s: %s; relayout", program.program_id, exc)
            else:
                raise RuntimeError(f"could not lay out {program.program_id} for {platform}")


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def forge_corpus(spec: ForgeSpec, out_dir: str | Path) -> Path:
    """Write binaries, manifests and ``index.tsv`` under ``out_dir``; returns the index path."""
    out = Path(out_dir)
    (out / "bin").mkdir(parents=True, exist_ok=True)
    (out / "manifests").mkdir(parents=True, exist_ok=True)
    rows = []
    for fb in forge_corpus_binaries(spec):
        _atomic_write(out / "bin" / fb.filename, fb.data)
        _atomic_write(out / "manifests" / f"{fb.binary_id}.json",
                      json.dumps(fb.manifest, separators=(",", ":")).encode())
        rows.append((fb.binary_id, fb.program_id, fb.platform, fb.label, f"bin/{fb.filename}"))
    index = out / "index.tsv"
    _atomic_write(index, format_index(rows).encode())
    _atomic_write(out / "forge_spec.json", json.dumps(asdict(spec), indent=1).encode())
    return index


def format_index(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(INDEX_COLUMNS)
    w.writerows(rows)
    return buf.getvalue()


@dataclass
class IndexEntry:
    binary_id: str
    program_id: str
    platform: str
    label: str
    path: Path


def read_index(path: str | Path) -> list[IndexEntry]:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh, delimiter="\t"))
    return [IndexEntry(r["binary_id"], r["program_id"], r["platform"], r["label"], path.parent / r["path"])
            for r in rows]


__all__ = [
    "EXTENSIONS", "EncodingOverflow", "ForgeSpec", "ForgedBinary", "INDEX_COLUMNS", "IndexEntry", "LABELS",
    "LabelProfile", "MOTIFS", "PROFILES", "AbstractProgram", "CORE_HELPERS", "POOL_NAMES", "STYLES",
    "binary_id_for", "build_manifest", "forge_binary", "forge_corpus", "forge_corpus_binaries", "forge_program",
    "iter_programs", "read_index", "routine_name",
]
