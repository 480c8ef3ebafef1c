"""Command-line entry point: ``plc-binx <subcommand> ...``.

Exit codes: 0 success, 1 invariant or validation failure, 2 usage error.
Every subcommand that writes files echoes its configuration as ``run.json``
into the output directory, and all files are written via temp file + rename.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .corefn import classify, distribution_stats, load_rules, stats_tsv
from .forge import ForgeSpec, LABELS, forge_corpus, read_index
from .funcrec import PLATFORMS, FunctionProgramRecord, SchemaViolation, export_flif, import_flif
from .learn import (SELECTIONS, FunctionalityModel, ToolchainModel, load_hyperparams, model_from_json,
                    model_to_json, train_functionality, train_toolchain)
from .pipeline import AnalyzeJob, analyze_many, classify_records, index_jobs, pick_peers
from .represent import export_representation

log = logging.getLogger("plcbinx")

FLIF_SUFFIX = ".flif.json"
REPR_SUFFIX = ".repr.json"


class UsageError(Exception):
    pass


# io helpers -------------------------------------------------------------------

def write_atomic(path: Path, data: bytes | str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def echo_run(out: Path, command: str, args: argparse.Namespace) -> None:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}
    cfg = json.loads(json.dumps(cfg, default=str))
    write_atomic(out / "run.json", json.dumps({"command": command, "version": __version__, "config": cfg},
                                               indent=1, sort_keys=True) + "\n")


def expand_inputs(patterns: list[str], suffixes: tuple[str, ...] | None = None) -> list[Path]:
    """Files, directories (searched recursively) and glob patterns, sorted and deduplicated."""
    found: set[Path] = set()
    for pat in patterns:
        p = Path(pat)
        if p.is_dir():
            found |= {q for q in p.rglob("*") if q.is_file()}
        elif p.is_file():
            found.add(p)
        else:
            found |= {Path(q) for q in glob.glob(pat, recursive=True) if Path(q).is_file()}
    if suffixes:
        found = {p for p in found if p.name.endswith(suffixes)}
    if not found:
        raise UsageError(f"no input files match {patterns}")
    return sorted(found)


def read_flifs(patterns: list[str]) -> list[FunctionProgramRecord]:
    return [import_flif(p.read_bytes()) for p in expand_inputs(patterns, (FLIF_SUFFIX,))]


def load_labeled(inputs: list[str], peers: str | None, jobs: int, rules_path: str | None) -> list[FunctionProgramRecord]:
    """Records from a corpus index (analyzed and classified now) or from FLIF files."""
    rules = load_rules(rules_path)
    if len(inputs) == 1 and inputs[0].endswith(".tsv"):
        recs = [r for r in analyze_many(index_jobs(read_index(inputs[0]), peers), jobs) if r is not None]
        return classify_records(recs, rules)
    recs = read_flifs(inputs)
    classify_records([r for r in recs if all(f.category.value == "unassigned" for f in r.functions)], rules)
    return recs


# subcommands ------------------------------------------------------------------

def cmd_forge(args) -> int:
    labels = tuple(args.labels.split(",")) if args.labels else LABELS
    unknown = set(labels) - set(LABELS)
    if unknown:
        raise UsageError(f"unknown labels {sorted(unknown)}")
    spec = ForgeSpec(programs_per_label=args.programs_per_label, labels=labels, seed=args.seed)
    out = Path(args.out)
    index = forge_corpus(spec, out)
    echo_run(out, "forge", args)
    print(f"wrote {sum(1 for _ in read_index(index))} binaries, index {index}")
    return 0


def _jobs_for_files(paths: list[Path], peers_dir: str | None) -> list[AnalyzeJob]:
    jobs = []
    for p in paths:
        candidates = sorted(Path(peers_dir).iterdir()) if peers_dir else sorted(p.parent.iterdir())
        peers = tuple(str(q) for q in pick_peers(p, candidates))
        stem = p.name.split(".")[0]
        jobs.append(AnalyzeJob(str(p), stem, stem, peers=peers))
    return jobs


def cmd_analyze(args) -> int:
    out = Path(args.out)
    if len(args.inputs) == 1 and args.inputs[0].endswith(".tsv"):
        jobs = index_jobs(read_index(args.inputs[0]), args.peers)
    else:
        jobs = _jobs_for_files(expand_inputs(args.inputs), args.peers)
    written = 0
    for rec in analyze_many(jobs, args.jobs):
        if rec is None:
            continue
        write_atomic(out / f"{rec.binary_id}{FLIF_SUFFIX}", export_flif(rec))
        written += 1
    echo_run(out, "analyze", args)
    print(f"analyzed {written}/{len(jobs)} binaries into {out}")
    return 0


def cmd_classify_core(args) -> int:
    rules = load_rules(args.rules)
    out = Path(args.out)
    for rec in read_flifs(args.inputs):
        platform = rec.platform_label if args.platform == "auto" else args.platform
        classify(rec, platform, rules)
        write_atomic(out / f"{rec.binary_id}{FLIF_SUFFIX}", export_flif(rec))
    echo_run(out, "classify-core", args)
    return 0


def cmd_represent(args) -> int:
    paths = expand_inputs(args.inputs, (FLIF_SUFFIX,))
    outs = set()
    for p in paths:
        rec = import_flif(p.read_bytes())
        out = Path(args.out) if args.out else p.parent
        write_atomic(out / f"{rec.binary_id}{REPR_SUFFIX}", export_representation(rec))
        outs.add(out)
    for out in sorted(outs):
        echo_run(out, "represent", args)
    return 0


def cmd_stats(args) -> int:
    recs = load_labeled(args.inputs, args.peers, args.jobs, args.rules)
    missing = [r.binary_id for r in recs if r.platform_label is None]
    if missing:
        raise UsageError(f"records without platform labels: {missing[:3]}")
    text = stats_tsv(distribution_stats(recs))
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        write_atomic(out / "stats.tsv", text)
        echo_run(out, "stats", args)
    return 0


def _hyperparams(args):
    hp = load_hyperparams(args.train)
    return hp.with_seed(args.seed)


def cmd_train_toolchain(args) -> int:
    recs = [r for r in load_labeled(args.inputs, args.peers, args.jobs, args.rules) if r.platform_label]
    if not recs:
        raise UsageError("no records with platform labels")
    model = train_toolchain(recs, _hyperparams(args), args.functions or "runtime")
    out = Path(args.out)
    write_atomic(out / "toolchain_model.json", model_to_json(model))
    echo_run(out, "train-toolchain", args)
    print(f"trained toolchain model on {len(recs)} binaries")
    return 0


def cmd_train_functionality(args) -> int:
    recs = [r for r in load_labeled(args.inputs, args.peers, args.jobs, args.rules) if r.functionality_label]
    if not recs:
        raise UsageError("no records with functionality labels")
    model = train_functionality(recs, _hyperparams(args), args.functions or "core")
    out = Path(args.out)
    write_atomic(out / "functionality_model.json", model_to_json(model))
    echo_run(out, "train-functionality", args)
    print(f"trained functionality model on {len(recs)} binaries")
    return 0


def cmd_predict(args) -> int:
    if not args.toolchain_model and not args.functionality_model:
        raise UsageError("give --toolchain-model and/or --functionality-model")
    rules = load_rules(args.rules)
    flifs: list[Path] = []
    if len(args.inputs) == 1 and args.inputs[0].endswith(".tsv"):
        jobs = index_jobs(read_index(args.inputs[0]), args.peers)
    else:
        paths = expand_inputs(args.inputs)
        flifs = [p for p in paths if p.name.endswith(FLIF_SUFFIX)]
        jobs = _jobs_for_files([p for p in paths if not p.name.endswith((FLIF_SUFFIX, REPR_SUFFIX, ".json"))],
                               args.peers)
    recs = [r for r in analyze_many(jobs, args.jobs) if r is not None]
    recs += [import_flif(p.read_bytes()) for p in flifs]
    recs.sort(key=lambda r: r.binary_id)
    rows = [{"binary_id": r.binary_id} for r in recs]
    # before the platform is known, categories come from the union of all rule sets
    for r in recs:
        classify(r, None, rules)
    if args.toolchain_model:
        tm = model_from_json(Path(args.toolchain_model).read_text())
        if not isinstance(tm, ToolchainModel):
            raise UsageError("--toolchain-model is not a toolchain model")
        for row, rec, (fam, plat) in zip(rows, recs, tm.predict_records(recs)):
            row.update(family=fam, platform=plat)
            classify(rec, plat, rules)
    if args.functionality_model:
        fm = model_from_json(Path(args.functionality_model).read_text())
        if not isinstance(fm, FunctionalityModel):
            raise UsageError("--functionality-model is not a functionality model")
        for row, rec in zip(rows, recs):
            try:
                row["functionality"] = fm.predict_records([rec])[0]
            except ValueError as exc:
                log.warning("%s: %s", rec.binary_id, exc)
                row["functionality"] = None
    out = Path(args.out)
    cols = ["binary_id"] + [c for c in ("family", "platform", "functionality") if rows and c in rows[0]]
    tsv = "\t".join(cols) + "\n" + "".join("\t".join(str(r.get(c) or "") for c in cols) + "\n" for r in rows)
    write_atomic(out / "predictions.tsv", tsv)
    write_atomic(out / "predictions.json", json.dumps(rows, indent=1) + "\n")
    echo_run(out, "predict", args)
    sys.stdout.write(tsv)
    return 0


def cmd_eval(args) -> int:
    from .evalharness import InvariantViolation, report_tsv, result_json, run_experiment
    recs = load_labeled(args.inputs, args.peers, args.jobs, args.rules)
    hp = load_hyperparams(args.train)
    folds = [int(x) for x in args.folds.split(",")] if args.folds else None
    out = Path(args.out)
    try:
        res = run_experiment(recs, args.task, args.functions, hp, seed=args.seed, fold_seed=args.fold_seed,
                             folds=folds)
    except InvariantViolation as exc:
        log.error("invariant violated: %s", exc)
        return 1
    tsv = report_tsv(res.report, res.baseline)
    write_atomic(out / f"{args.task}_{res.functions}_report.tsv", tsv)
    write_atomic(out / f"{args.task}_{res.functions}_report.json", result_json(res) + "\n")
    platforms = "platform\tbinaries\tprecision\trecall\tf1\n" + "".join(
        f"{p['platform']}\t{p['binaries']}\t{100 * p['precision']:.2f}\t{100 * p['recall']:.2f}\t"
        f"{100 * p['f1']:.2f}\n" for p in res.report.per_platform)
    write_atomic(out / f"{args.task}_{res.functions}_platforms.tsv", platforms)
    echo_run(out, "eval", args)
    sys.stdout.write(tsv)
    return 0


def cmd_import_flif(args) -> int:
    out = Path(args.out)
    bad = 0
    for p in expand_inputs(args.inputs):
        try:
            rec = import_flif(p.read_bytes())
        except SchemaViolation as exc:
            log.error("%s: schema violation at %s: %s", p, exc.path, exc)
            bad += 1
            continue
        except json.JSONDecodeError as exc:
            log.error("%s: not JSON: %s", p, exc)
            bad += 1
            continue
        write_atomic(out / f"{rec.binary_id}{FLIF_SUFFIX}", export_flif(rec))
    echo_run(out, "import-flif", args)
    return 1 if bad else 0


# parser -----------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, out_required: bool = True, corpus: bool = False) -> None:
    p.add_argument("--out", required=out_required, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for per-binary stages (default 1)")
    p.add_argument("--peers", default=None,
                   help="directory of peer container files for probing (default: the target's own directory)")
    if corpus:
        p.add_argument("--rules", default=None, help="rules.json (default: packaged rules)")
        p.add_argument("--train", default=None, help="train.json (default: packaged hyperparameters)")
        p.add_argument("--functions", choices=SELECTIONS, default=None,
                       help="function selection (default: runtime for toolchain, core for functionality)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plc-binx", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = sub.choices

    p = sub.add_parser("forge", help="generate a synthetic labeled corpus")
    _common(p)
    p.add_argument("--programs-per-label", type=int, default=8)
    p.add_argument("--labels", default=None, help="comma-separated subset of labels")
    p.set_defaults(func=cmd_forge, seed=7)

    p = sub.add_parser("analyze", help="load and recover functions into FLIF files")
    p.add_argument("inputs", nargs="+", help="binaries, directories, globs, or a corpus index.tsv")
    _common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("classify-core", help="assign core/runtime categories to FLIF files")
    p.add_argument("inputs", nargs="+")
    _common(p)
    p.add_argument("--rules", default=None, help="rules.json (default: packaged rules)")
    p.add_argument("--platform", choices=("auto",) + PLATFORMS, default="auto",
                   help="rule set to apply; auto uses the record's label, else the union of all rules")
    p.set_defaults(func=cmd_classify_core)

    p = sub.add_parser("represent", help="write token sequences, ACFGs and fingerprints")
    p.add_argument("inputs", nargs="+", help="FLIF files or directories")
    _common(p, out_required=False)
    p.set_defaults(func=cmd_represent)

    p = sub.add_parser("stats", help="per-platform core/runtime distribution table (TSV)")
    p.add_argument("inputs", nargs="+", help="corpus index.tsv or labeled FLIF files")
    _common(p, out_required=False, corpus=True)
    p.set_defaults(func=cmd_stats)

    for name, fn in (("train-toolchain", cmd_train_toolchain), ("train-functionality", cmd_train_functionality)):
        p = sub.add_parser(name, help=f"train the {name.split('-')[1]} model")
        p.add_argument("inputs", nargs="+", help="corpus index.tsv or labeled FLIF files")
        _common(p, corpus=True)
        p.set_defaults(func=fn)

    p = sub.add_parser("predict", help="predict toolchain and/or functionality")
    p.add_argument("inputs", nargs="+", help="binaries, FLIF files, or a corpus index.tsv")
    _common(p, corpus=True)
    p.add_argument("--toolchain-model", default=None)
    p.add_argument("--functionality-model", default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="ten-fold program-level cross-validation")
    p.add_argument("inputs", nargs="+", help="corpus index.tsv or labeled FLIF files")
    _common(p, corpus=True)
    p.add_argument("--task", choices=("toolchain", "functionality"), required=True)
    p.add_argument("--folds", default=None, help="comma-separated subset of test folds")
    p.add_argument("--fold-seed", type=int, default=None, help="salt the fold hash (default: unsalted)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("import-flif", help="validate externally produced FLIF files")
    p.add_argument("inputs", nargs="+")
    _common(p)
    p.set_defaults(func=cmd_import_flif)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(parser.subcommands[args.command].format_help(), file=sys.stderr)
        print(f"plc-binx {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except SchemaViolation as exc:
        log.error("schema violation at %s: %s", exc.path, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
