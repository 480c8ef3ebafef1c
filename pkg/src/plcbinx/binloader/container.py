"""Heuristic code-region discovery for opaque application containers.

No header field of the container is read. Bytes that stay put across peer
files of the same platform are taken as container structure; windows that
vary are candidate code, kept only if they decode as plausible ARM32.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..disasm import ARM32, Isa, Kind
from .image import BinaryFormat, LoadedImage, MetadataRecord, NoCodeFound, NoPeers, Region

TRANSFERS = frozenset({Kind.BRANCH, Kind.BRANCHLINK, Kind.RETURN, Kind.INDIRECT})


@dataclass(frozen=True)
class ProbeConfig:
    window: int = 256
    stride: int = 256
    stable_threshold: float = 0.90
    decode_validity: float = 0.60
    words_per_transfer: int = 64
    max_name_len: int = 255


def window_equality(target: bytes, peers: list[bytes], cfg: ProbeConfig = ProbeConfig()) -> list[tuple[int, int, int]]:
    """Per window: (offset, equal-byte count summed over peers, compared bytes per peer)."""
    t = np.frombuffer(target, dtype=np.uint8)
    equal = np.zeros(len(t), dtype=np.int64)
    for p in peers:
        pa = np.frombuffer(p, dtype=np.uint8)[:len(t)]
        equal[:len(pa)] += (t[:len(pa)] == pa)
    out = []
    for lo in range(0, len(t), cfg.stride):
        hi = min(lo + cfg.window, len(t))
        out.append((lo, int(equal[lo:hi].sum()), hi - lo))
    return out


def candidate_runs(target: bytes, peers: list[bytes], cfg: ProbeConfig = ProbeConfig()) -> list[tuple[int, int]]:
    """Maximal runs of unstable windows as (start, end) byte offsets."""
    runs: list[tuple[int, int]] = []
    start = None
    n = len(peers)
    for lo, eq, length in window_equality(target, peers, cfg):
        # integer totals keep the test independent of peer order
        stable = eq / (length * n) >= cfg.stable_threshold
        if not stable and start is None:
            start = lo
        elif stable and start is not None:
            runs.append((start, lo))
            start = None
    if start is not None:
        runs.append((start, len(target)))
    return runs


def looks_like_code(data: bytes, offset: int, length: int, cfg: ProbeConfig = ProbeConfig(),
                    isa: Isa = ARM32) -> bool:
    length -= length % 4
    if length <= 0:
        return False
    decoded = transfers = 0
    for i, (word,) in enumerate(struct.iter_unpack("<I", data[offset:offset + length])):
        ins = isa.decode(word, offset + 4 * i)
        if ins is None:
            continue
        decoded += 1
        if ins.kind in TRANSFERS:
            transfers += 1
    total = length // 4
    return (decoded >= cfg.decode_validity * total
            and transfers >= 1
            and transfers * cfg.words_per_transfer >= decoded)


def probe_container(target: bytes, peers: list[bytes], cfg: ProbeConfig = ProbeConfig(),
                    source_path: str = "") -> LoadedImage:
    if not peers:
        raise NoPeers("container probing needs at least one peer file")
    regions = []
    for start, end in candidate_runs(target, peers, cfg):
        start -= start % 4
        length = (end - start) - (end - start) % 4
        if looks_like_code(target, start, length, cfg):
            regions.append(Region(start, length, start))
    if not regions:
        raise NoCodeFound("no variable region decodes as code")
    return LoadedImage(BinaryFormat.APP, target, regions, 0, [], [], source_path)


def whole_file_image(target: bytes, source_path: str = "") -> LoadedImage:
    """Fallback when probing is impossible: the whole file is one code region."""
    length = len(target) - len(target) % 4
    regions = [Region(0, length, 0)] if length else []
    return LoadedImage(BinaryFormat.APP, target, regions, 0, [], [], source_path)


def _printable_cstring(data: bytes, off: int, max_len: int) -> str | None:
    if not 0 <= off < len(data):
        return None
    end = data.find(b"\0", off, off + max_len + 1)
    if end <= off:
        return None
    raw = data[off:end]
    if all(0x20 <= b <= 0x7E for b in raw):
        return raw.decode("ascii")
    return None


def scan_metadata_records(image: LoadedImage, cfg: ProbeConfig = ProbeConfig()) -> list[MetadataRecord]:
    """(name offset, code pointer) pairs found in the non-code parts of the file."""
    data = image.data
    code = sorted((r.offset, r.end) for r in image.code_regions)
    gaps, pos = [], 0
    for lo, hi in code:
        if lo > pos:
            gaps.append((pos, lo))
        pos = max(pos, hi)
    if pos < len(data):
        gaps.append((pos, len(data)))

    seen: dict[int, MetadataRecord] = {}
    for lo, hi in gaps:
        lo += -lo % 4
        for off in range(lo, hi - 7, 4):
            name_off, ptr = struct.unpack_from("<II", data, off)
            if ptr % 4 or not image.in_code(ptr):
                continue
            name = _printable_cstring(data, name_off, cfg.max_name_len)
            if name is None:
                continue
            if ptr not in seen:
                seen[ptr] = MetadataRecord(name, ptr, off)
    return sorted(seen.values(), key=lambda r: r.code_pointer)
