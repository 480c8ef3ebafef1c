"""Batch helpers shared by the CLI, scripts and acceptance tests: load, recover and classify a corpus."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .binloader import BinaryFormat, LoaderError, detect_format, load_binary
from .corefn import CoreRuleSet, classify, load_rules
from .funcrec import FunctionProgramRecord, analyze_image

log = logging.getLogger(__name__)

MAX_PEERS = 4


def pick_peers(target: Path, candidates: list[Path], limit: int = MAX_PEERS) -> list[Path]:
    """Other container files next to the target (or in the peers directory), in name order."""
    same = sorted(p for p in candidates if p.suffix == target.suffix and p.resolve() != target.resolve())
    return same[:limit]


@dataclass(frozen=True)
class AnalyzeJob:
    path: str
    binary_id: str
    program_id: str
    platform_label: str | None = None
    functionality_label: str | None = None
    peers: tuple[str, ...] = ()


def analyze_file(job: AnalyzeJob) -> FunctionProgramRecord | None:
    """Load and recover one file; returns None (with a diagnostic) when the file cannot be loaded."""
    data = Path(job.path).read_bytes()
    peers = [Path(p).read_bytes() for p in job.peers] if detect_format(data) is BinaryFormat.APP else None
    try:
        image = load_binary(data, job.path, peers=peers)
    except LoaderError as exc:
        log.warning("skipping %s: %s: %s", job.path, type(exc).__name__, exc)
        return None
    return analyze_image(image, job.binary_id, job.program_id, job.platform_label, job.functionality_label)


def analyze_many(jobs: list[AnalyzeJob], workers: int = 1) -> list[FunctionProgramRecord | None]:
    if workers <= 1:
        return [analyze_file(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(analyze_file, jobs, chunksize=8))


def index_jobs(entries, peers_dir: str | Path | None = None) -> list[AnalyzeJob]:
    jobs = []
    cache: dict[Path, list[Path]] = {}
    for e in entries:
        path = Path(e.path)
        pool_dir = Path(peers_dir) if peers_dir else path.parent
        if pool_dir not in cache:
            cache[pool_dir] = sorted(pool_dir.iterdir()) if pool_dir.is_dir() else []
        peers = tuple(str(p) for p in pick_peers(path, cache[pool_dir])) if path.suffix == ".app" else ()
        jobs.append(AnalyzeJob(str(path), e.binary_id, e.program_id, e.platform, e.label, peers))
    return jobs


def classify_records(records: list[FunctionProgramRecord], rules: dict[str, CoreRuleSet] | None = None,
                     use_truth: bool = True) -> list[FunctionProgramRecord]:
    """Assign categories with each record's labeled platform, or with the union of all rules."""
    rules = rules or load_rules()
    for r in records:
        classify(r, r.platform_label if use_truth else None, rules)
    return records


def load_corpus(index_path: str | Path, peers_dir: str | Path | None = None, workers: int = 1,
                rules: dict[str, CoreRuleSet] | None = None) -> list[FunctionProgramRecord]:
    """Index → classified records (files that fail to load are skipped)."""
    from .forge import read_index
    jobs = index_jobs(read_index(index_path), peers_dir)
    records = [r for r in analyze_many(jobs, workers) if r is not None]
    return classify_records(records, rules)
