"""Name-rule based split of recovered functions into core and runtime."""

from __future__ import annotations

import json
import logging
import statistics
from collections import deque
from dataclasses import dataclass, field
from fnmatch import fnmatchcase
from importlib import resources
from pathlib import Path

from ..funcrec import PLATFORMS, Category, FunctionProgramRecord

log = logging.getLogger(__name__)


class NoSeedFound(LookupError):
    pass


@dataclass(frozen=True)
class CoreRuleSet:
    platform: str
    seed_patterns: tuple[str, ...]
    include_patterns: tuple[str, ...] = ("*",)
    exclude_patterns: tuple[str, ...] = ()
    # follow resolved calls from the seeds; otherwise every eligible name is core
    traverse: bool = True

    def is_seed(self, fid: str) -> bool:
        return any(fnmatchcase(fid, p) for p in self.seed_patterns)

    def eligible(self, fid: str) -> bool:
        return (any(fnmatchcase(fid, p) for p in self.include_patterns)
                and not any(fnmatchcase(fid, p) for p in self.exclude_patterns))


def load_rules(path: str | Path | None = None) -> dict[str, CoreRuleSet]:
    if path is None:
        text = resources.files(__package__).joinpath("default_rules.json").read_text()
    else:
        text = Path(path).read_text()
    raw = json.loads(text)
    rules = {}
    for platform, r in raw.items():
        if platform not in PLATFORMS:
            raise ValueError(f"rules for unknown platform {platform!r}")
        rules[platform] = CoreRuleSet(platform, tuple(r["seed_patterns"]), tuple(r.get("include_patterns", ["*"])),
                                      tuple(r.get("exclude_patterns", [])), bool(r.get("traverse", True)))
    return rules


DEFAULT_RULES = load_rules()


def core_ids(record: FunctionProgramRecord, rule: CoreRuleSet) -> set[str]:
    """Ids the rule marks core; raises NoSeedFound when no seed is present."""
    funcs = record.by_id()
    seeds = sorted(fid for fid in funcs if rule.is_seed(fid))
    if not seeds:
        raise NoSeedFound(f"{record.binary_id}: no seed matching {list(rule.seed_patterns)}")
    if not rule.traverse:
        return set(seeds) | {fid for fid in funcs if rule.eligible(fid)}
    core = set(seeds)
    queue = deque(seeds)
    while queue:
        for callee in funcs[queue.popleft()].resolved_callees():
            if callee in core or callee not in funcs or not rule.eligible(callee):
                continue
            core.add(callee)
            queue.append(callee)
    return core


def classify(record: FunctionProgramRecord, platform: str | None,
             rules: dict[str, CoreRuleSet] | None = None) -> FunctionProgramRecord:
    """Assign categories in place using one platform's rule.

    ``platform=None`` applies every rule and takes the union of their core
    sets, for use before the platform is known.
    """
    rules = rules or DEFAULT_RULES
    chosen = list(rules.values()) if platform is None else [rules[platform]]
    core: set[str] = set()
    found = False
    for rule in chosen:
        try:
            core |= core_ids(record, rule)
            found = True
        except NoSeedFound:
            continue
    if not found:
        log.warning("NoSeedFound in %s (platform %s); all functions runtime", record.binary_id, platform)
    for f in record.functions:
        f.category = Category.CORE if f.id in core else Category.RUNTIME
    return record


def _lower_median(values: list[int]) -> float:
    return float(statistics.median_low(values)) if values else 0.0


@dataclass
class PlatformStats:
    platform: str
    binaries: int
    core_total: int
    core_sizes: list[int] = field(repr=False, default_factory=list)
    runtime_total: int = 0
    runtime_sizes: list[int] = field(repr=False, default_factory=list)

    @property
    def core_per_binary(self) -> float:
        return self.core_total / self.binaries

    @property
    def runtime_per_binary(self) -> float:
        return self.runtime_total / self.binaries

    def row(self) -> dict:
        mean = lambda xs: sum(xs) / len(xs) if xs else 0.0  # noqa: E731
        return {
            "platform": self.platform,
            "binaries": self.binaries,
            "core_total": self.core_total,
            "core_per_binary": round(self.core_per_binary, 2),
            "core_size_mean": round(mean(self.core_sizes), 2),
            "core_size_median": _lower_median(self.core_sizes),
            "runtime_total": self.runtime_total,
            "runtime_per_binary": round(self.runtime_per_binary, 2),
            "runtime_size_mean": round(mean(self.runtime_sizes), 2),
            "runtime_size_median": _lower_median(self.runtime_sizes),
        }


STATS_COLUMNS = ["platform", "binaries", "core_total", "core_per_binary", "core_size_mean", "core_size_median",
                 "runtime_total", "runtime_per_binary", "runtime_size_mean", "runtime_size_median"]


def distribution_stats(records: list[FunctionProgramRecord]) -> list[PlatformStats]:
    """Per-platform core/runtime counts and sizes; platforms without binaries are omitted."""
    rows = []
    for platform in PLATFORMS:
        recs = [r for r in records if r.platform_label == platform]
        if not recs:
            continue
        st = PlatformStats(platform, len(recs), 0)
        for r in recs:
            for f in r.functions:
                if f.category is Category.CORE:
                    st.core_total += 1
                    st.core_sizes.append(f.size_bytes)
                else:
                    st.runtime_total += 1
                    st.runtime_sizes.append(f.size_bytes)
        rows.append(st)
    return rows


def stats_tsv(stats: list[PlatformStats]) -> str:
    lines = ["\t".join(STATS_COLUMNS)]
    for st in stats:
        row = st.row()
        lines.append("\t".join(f"{row[c]:.2f}" if isinstance(row[c], float) else str(row[c]) for c in STATS_COLUMNS))
    return "\n".join(lines) + "\n"


__all__ = ["CoreRuleSet", "DEFAULT_RULES", "NoSeedFound", "PlatformStats", "STATS_COLUMNS", "classify", "core_ids",
           "distribution_stats", "load_rules", "stats_tsv"]
