"""Run the recovery oracle over forged binaries and list every mismatch.

    python3 scripts/oracle_check.py --limit 200
"""

from __future__ import annotations

import argparse
import collections
import itertools
import time

from plcbinx.binloader import load_binary
from plcbinx.forge import ForgeSpec, forge_corpus_binaries
from plcbinx.forge.oracle import compare_regions, compare_structure
from plcbinx.funcrec import analyze_image


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--limit", type=int, default=200, help="number of binaries (0 for the whole corpus)")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    binaries = forge_corpus_binaries(ForgeSpec(seed=args.seed))
    binaries = list(itertools.islice(binaries, args.limit) if args.limit else binaries)
    pool = collections.defaultdict(list)
    for b in binaries:
        pool[b.platform].append(b)
    t0, failed, by_format = time.perf_counter(), 0, collections.Counter()
    for b in binaries:
        fmt = b.manifest["format"]
        peers = [p.data for p in pool[b.platform] if p.binary_id != b.binary_id][:4] if fmt == "APP" else None
        image = load_binary(b.data, b.binary_id, peers=peers)
        rec = analyze_image(image, b.binary_id, b.program_id, b.platform, b.label)
        miss = compare_structure(rec, b.manifest, names_only=fmt == "APP").mismatches
        if fmt == "APP":
            miss += compare_regions(image, b.manifest)
        by_format[fmt] += 1
        if miss:
            failed += 1
            print(b.binary_id, *miss[:5], sep="\n  ")
    print(f"{len(binaries)} binaries {dict(by_format)}: {failed} with mismatches, {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
