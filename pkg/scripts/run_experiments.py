"""Forge the default corpus and run the ten-fold experiments with their ablations.

    python3 scripts/run_experiments.py --out runs/
    python3 scripts/run_experiments.py --out runs/ --task functionality --functions core,both,runtime

Each run writes ``{task}_{functions}_report.tsv`` and ``.json`` under ``--out``
and prints a one-line summary. The corpus is forged once into ``--out/corpus``.
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from plcbinx.evalharness import report_tsv, result_json, run_experiment
from plcbinx.forge import ForgeSpec, forge_corpus
from plcbinx.learn import load_hyperparams
from plcbinx.pipeline import load_corpus

DEFAULT_FUNCTIONS = {"toolchain": "runtime,core", "functionality": "core,both,runtime"}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--task", choices=["toolchain", "functionality", "all"], default="all")
    ap.add_argument("--functions", help="comma-separated function sets (default depends on the task)")
    ap.add_argument("--train", help="hyperparameter JSON (defaults to the packaged one)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--forge-seed", type=int, default=7)
    args = ap.parse_args()

    index = args.out / "corpus" / "index.tsv"
    if not index.exists():
        forge_corpus(ForgeSpec(seed=args.forge_seed), args.out / "corpus")
    t0 = time.perf_counter()
    records = load_corpus(index)
    print(f"analyzed {len(records)} binaries in {time.perf_counter() - t0:.0f} s")

    hp = load_hyperparams(args.train)
    tasks = ["toolchain", "functionality"] if args.task == "all" else [args.task]
    for task in tasks:
        for functions in (args.functions or DEFAULT_FUNCTIONS[task]).split(","):
            t0 = time.perf_counter()
            res = run_experiment(records, task, functions=functions, hp=hp, seed=args.seed)
            stem = args.out / f"{task}_{functions}_report"
            stem.with_suffix(".tsv").write_text(report_tsv(res.report, res.baseline))
            stem.with_suffix(".json").write_text(result_json(res))
            print(f"{task:13s} {functions:8s} F1 {100 * res.report.weighted_f1:6.2f}  "
                  f"baseline {100 * res.baseline.weighted_f1:6.2f}  {time.perf_counter() - t0:5.0f} s")


if __name__ == "__main__":
    main()
