"""Decode forge-emitted words with capstone and freeze the results as a test fixture.

Needs the ``reference`` extra. The test suite only reads the JSON, so capstone
is not a runtime or test dependency.

    python3 scripts/gen_decoder_fixture.py --out tests/fixtures/decoder_oracle.json
"""

from __future__ import annotations

import argparse
import json
import struct
from pathlib import Path

import capstone

from plcbinx.forge import ForgeSpec, forge_corpus_binaries
from plcbinx.forge.pools import UNSUPPORTED_WORDS

LABELS = ("Mathematics", "Logic_Mods", "Array_Buffer_Mem_List", "Network_1", "Pulse_Gen")


def word_at(data: bytes, regions: list, addr: int) -> int:
    for off, length, vaddr in regions:
        if vaddr <= addr < vaddr + length:
            return struct.unpack_from("<I", data, off + addr - vaddr)[0]
    raise KeyError(hex(addr))


def forge_words(per_shape: int = 2) -> list[tuple[int, int]]:
    """(word, address) pairs read from forged files, at most ``per_shape`` per instruction shape."""
    seen: dict[str, int] = {}
    out = []
    for fb in forge_corpus_binaries(ForgeSpec(programs_per_label=1, labels=LABELS)):
        regions = fb.manifest["code_regions"]
        for fn in fb.manifest["functions"]:
            for i, text in enumerate(fn["asm"]):
                shape = text.split(" #")[0] if text.startswith("b") else text
                if text == "undef" or seen.get(shape, 0) >= per_shape:
                    continue
                seen[shape] = seen.get(shape, 0) + 1
                addr = fn["entry"] + 4 * i
                out.append((word_at(fb.data, regions, addr), addr))
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="tests/fixtures/decoder_oracle.json")
    args = ap.parse_args()
    md = capstone.Cs(capstone.CS_ARCH_ARM, capstone.CS_MODE_ARM)

    def ref(word: int, addr: int) -> str | None:
        insns = list(md.disasm(struct.pack("<I", word), addr))
        return f"{insns[0].mnemonic} {insns[0].op_str}".strip() if insns else None

    rows = [{"word": w, "address": a, "capstone": ref(w, a)} for w, a in forge_words()]
    rows += [{"word": w, "address": 0x1000, "capstone": ref(w, 0x1000), "outside_subset": True}
             for w in UNSUPPORTED_WORDS]
    Path(args.out).write_text(json.dumps({"reference": f"capstone {capstone.__version__}", "mode": "arm",
                                          "rows": rows}, indent=1) + "\n")
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
