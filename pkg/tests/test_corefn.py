import json
import logging
import statistics

import pytest
from hypothesis import given, strategies as st

from plcbinx.corefn import DEFAULT_RULES, classify, distribution_stats, load_rules, stats_tsv
from plcbinx.disasm import assemble, decode
from plcbinx.funcrec import (BasicBlock, CallKind, CallSite, Category, FunctionProgramRecord, RecoveredFunction,
                             Terminator)


def fn(fid, entry, callees=(), size=4):
    ins = [decode(assemble("bx lr"), entry + 4 * k) for k in range(size // 4)]
    calls = [CallSite(entry, CallKind.RESOLVED, c) for c in callees]
    return RecoveredFunction(fid, entry, size, ins, [BasicBlock(entry, 0, len(ins), Terminator.RETURN)], [], calls)


def record(platform, funcs):
    return FunctionProgramRecord("b", "p", platform, None, funcs)


def cats(rec):
    return {f.id: f.category.value for f in rec.functions}


def test_geb_traversal_stops_at_runtime_callee():
    rec = record("GEB", [fn("dt_PR_program0_exec", 0x100, ["dt_FN_abs"]),
                         fn("dt_FN_abs", 0x200, ["memcpy"]),
                         fn("memcpy", 0x300),
                         fn("dt_FN_unused", 0x400)])
    classify(rec, "GEB")
    assert cats(rec) == {"dt_PR_program0_exec": "core", "dt_FN_abs": "core", "memcpy": "runtime",
                         "dt_FN_unused": "runtime"}


def test_codesys_named_records_are_core():
    funcs = [fn("PLC_PRG", 0x1000), fn("_ARRAY_ABS", 0x1100)]
    funcs += [fn(f"sub_{0x2000 + 0x10 * k:08X}", 0x2000 + 0x10 * k) for k in range(5)]
    rec = classify(record("CODESYSv3", funcs), "CODESYSv3")
    assert sum(f.category is Category.CORE for f in rec.functions) == 2
    assert sum(f.category is Category.RUNTIME for f in rec.functions) == 5


def test_openplc_without_seed(caplog):
    rec = record("OpenPLCv3", [fn("main", 0x100, ["glueVars"]), fn("glueVars", 0x200)])
    with caplog.at_level(logging.WARNING):
        classify(rec, "OpenPLCv3")
    assert all(f.category is Category.RUNTIME for f in rec.functions)
    assert "NoSeedFound" in caplog.text


def test_openplc_excludes_runtime_names():
    rec = record("OpenPLCv2", [fn("PROGRAM0_body__", 0x100, ["CALC_VAL", "__init_io", "digitalWrite"]),
                               fn("CALC_VAL", 0x200, ["strcpy"]), fn("__init_io", 0x300),
                               fn("digitalWrite", 0x400), fn("strcpy", 0x500)])
    classify(rec, "OpenPLCv2")
    assert {k for k, v in cats(rec).items() if v == "core"} == {"PROGRAM0_body__", "CALC_VAL"}


def test_same_rule_for_both_openplc_versions():
    assert DEFAULT_RULES["OpenPLCv2"].exclude_patterns == DEFAULT_RULES["OpenPLCv3"].exclude_patterns
    assert DEFAULT_RULES["OpenPLCv2"].seed_patterns == DEFAULT_RULES["OpenPLCv3"].seed_patterns


def test_cycles_terminate():
    rec = record("GEB", [fn("dt_PR_program0_exec", 0x100, ["dt_FB_a"]), fn("dt_FB_a", 0x200, ["dt_FB_b"]),
                         fn("dt_FB_b", 0x300, ["dt_FB_a", "dt_PR_program0_exec"])])
    classify(rec, "GEB")
    assert set(cats(rec).values()) == {"core"}


def test_custom_rules_file(tmp_path):
    path = tmp_path / "rules.json"
    path.write_text(json.dumps({"GEB": {"seed_patterns": ["main"], "include_patterns": ["app_*"]}}))
    rules = load_rules(path)
    rec = classify(record("GEB", [fn("main", 0, ["app_x", "lib_y"]), fn("app_x", 4), fn("lib_y", 8)]), "GEB", rules)
    assert cats(rec) == {"main": "core", "app_x": "core", "lib_y": "runtime"}


def test_unknown_platform_in_rules(tmp_path):
    path = tmp_path / "rules.json"
    path.write_text(json.dumps({"S7": {"seed_patterns": ["OB1"]}}))
    with pytest.raises(ValueError):
        load_rules(path)


RUNTIME_NAMES = st.sampled_from(["memcpy", "strlen", "digitalRead", "__libc_init", "_ZN3foo3barEv", "mb_poll",
                                 "sub_00009000", "Vc_Init", "handleEnip"])


@given(RUNTIME_NAMES, st.sampled_from(["GEB", "OpenPLCv2", "OpenPLCv3", "CODESYSv3"]))
def test_adding_runtime_function_keeps_core(name, platform):
    seeds = {"GEB": "dt_PR_program0_exec", "CODESYSv3": "PLC_PRG"}
    seed = seeds.get(platform, "PROGRAM0_body__")
    helper = {"GEB": "dt_FN_abs"}.get(platform, "CALC_VAL")
    base = [fn(seed, 0x100, [helper, name]), fn(helper, 0x200)]
    before = cats(classify(record(platform, [fn(f.id, f.entry, f.resolved_callees()) for f in base]), platform))
    after = cats(classify(record(platform, base + [fn(name, 0x900)]), platform))
    if platform == "CODESYSv3" and not name.startswith("sub_"):
        # a recovered name on CODESYS is a record name, i.e. core by definition
        return
    assert {k: v for k, v in after.items() if k in before} == before
    assert after[name] == "runtime"


def test_union_rules_match_platform_rules_on_forge(small_records):
    for rec in small_records:
        want = cats(rec)
        union = cats(classify(rec, None))
        classify(rec, rec.platform_label)
        assert union == want, rec.binary_id


def test_categories_match_manifest(small_analyzed, small_records):
    for b, _, rec in small_analyzed:
        truth = {m["entry"]: m["category"] for m in b.manifest["functions"]}
        assert {f.entry: f.category.value for f in rec.functions} == truth


def test_core_closed_under_traversal(small_records):
    for rec in small_records:
        if rec.platform_label == "CODESYSv3":
            continue
        rule = DEFAULT_RULES[rec.platform_label]
        by_id = rec.by_id()
        core = {f.id for f in rec.functions if f.category is Category.CORE}
        reached = {f for f in core if rule.is_seed(f)}
        frontier = list(reached)
        while frontier:
            for c in by_id[frontier.pop()].resolved_callees():
                if c in core and c not in reached:
                    reached.add(c)
                    frontier.append(c)
        assert reached == core


# statistics ---------------------------------------------------------------------------

def test_per_binary_mean():
    r1 = classify(record("GEB", [fn("dt_PR_program0_exec", 0, ["dt_FN_a"]), fn("dt_FN_a", 4)]), "GEB")
    r2 = classify(record("GEB", [fn("dt_PR_program0_exec", 0, ["dt_FN_a", "dt_FN_b"]), fn("dt_FN_a", 4),
                                 fn("dt_FN_b", 8)]), "GEB")
    (row,) = distribution_stats([r1, r2])
    assert row.core_per_binary == 2.5
    assert "2.50" in stats_tsv([row])


def test_empty_platforms_are_omitted():
    rec = classify(record("GEB", [fn("dt_PR_program0_exec", 0)]), "GEB")
    assert [s.platform for s in distribution_stats([rec])] == ["GEB"]


def test_stats_match_manifest_aggregation(small_analyzed, small_records):
    got = {s.platform: s.row() for s in distribution_stats(small_records)}
    for platform, row in got.items():
        mans = [b.manifest for b, _, _ in small_analyzed if b.platform == platform]
        core = [m["size"] for man in mans for m in man["functions"] if m["category"] == "core"]
        runtime = [m["size"] for man in mans for m in man["functions"] if m["category"] == "runtime"]
        assert row["binaries"] == len(mans)
        assert row["core_total"] == len(core)
        assert row["runtime_total"] == len(runtime)
        assert row["core_size_median"] == statistics.median_low(core)
        assert row["runtime_size_mean"] == round(sum(runtime) / len(runtime), 2)
