"""Compare a recovered record against a forge manifest."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..binloader import LoadedImage
from ..funcrec import FunctionProgramRecord

APP_REGION_TOLERANCE = 256


@dataclass
class OracleReport:
    binary_id: str
    mismatches: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def compare_structure(record: FunctionProgramRecord, manifest: dict, names_only: bool = False) -> OracleReport:
    """Entry, size, id, blocks, edges and calls per function.

    With ``names_only`` (opaque containers) only entry/name pairs of named functions are compared.
    """
    rep = OracleReport(record.binary_id)
    got = {f.entry: f for f in record.functions}
    want = {m["entry"]: m for m in manifest["functions"]}
    if names_only:
        got_pairs = {(f.entry, f.id) for f in record.functions if not f.id.startswith("sub_")}
        want_pairs = {(m["entry"], m["name"]) for m in manifest["functions"] if m["category"] == "core"}
        for e, n in sorted(want_pairs - got_pairs):
            rep.mismatches.append(f"missing name {n}@{e:#x}")
        for e, n in sorted(got_pairs - want_pairs):
            rep.mismatches.append(f"unexpected name {n}@{e:#x}")
        return rep
    for e in sorted(set(want) - set(got)):
        rep.mismatches.append(f"missing function at {e:#x}")
    for e in sorted(set(got) - set(want)):
        rep.mismatches.append(f"spurious function at {e:#x}")
    for e in sorted(set(want) & set(got)):
        f, m = got[e], want[e]
        tag = f"{m['id']}@{e:#x}"
        if f.id != m["id"]:
            rep.mismatches.append(f"{tag}: id {f.id}")
        if f.size_bytes != m["size"]:
            rep.mismatches.append(f"{tag}: size {f.size_bytes} != {m['size']}")
        blocks = [[b.start, len(b)] for b in f.blocks]
        if blocks != m["blocks"]:
            rep.mismatches.append(f"{tag}: blocks differ")
        edges = sorted([s, d, k.value] for s, d, k in f.edges)
        if edges != sorted(m["edges"]):
            rep.mismatches.append(f"{tag}: edges differ")
        calls = sorted((c.at, c.kind.value, c.target) for c in f.calls)
        if calls != sorted((c["at"], c["kind"], c["target"]) for c in m["calls"]):
            rep.mismatches.append(f"{tag}: calls differ")
    return rep


def compare_regions(image: LoadedImage, manifest: dict, tolerance: int = APP_REGION_TOLERANCE) -> list[str]:
    """Recovered code region offsets must sit within ``tolerance`` bytes of the truth."""
    out = []
    got = sorted((r.offset, r.end) for r in image.code_regions)
    want = sorted((o, o + n) for o, n, _ in manifest["code_regions"])
    if len(got) != len(want):
        return [f"region count {len(got)} != {len(want)}"]
    for (gs, ge), (ws, we) in zip(got, want):
        if abs(gs - ws) > tolerance or abs(ge - we) > tolerance:
            out.append(f"region [{gs:#x},{ge:#x}) vs [{ws:#x},{we:#x})")
    return out
