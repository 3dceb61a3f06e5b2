from __future__ import annotations

import random

import pytest

import tribound as tb
from tribound.errors import CorpusTooSmall, EmptyCorpus, GranularityMismatch
from tribound.fingerprint import BASIC_BLOCK, WINDOWED, WindowConfig
from tribound.patterndb import (
    Project,
    build_db,
    coverage_csv,
    coverage_report,
    db_to_json_dict,
    leave_one_out,
    load_db,
    match_digests,
    match_project,
    save_db,
)

BB = WindowConfig(BASIC_BLOCK)
W42 = WindowConfig(WINDOWED, 4, 2)


def prog(src: str, name: str = "p") -> tb.Program:
    return tb.parse_program(src, name=name)


SHARED_BLOCK = """
Lshared: mflr r0
        stwu r1, -32(r1)
        stw r0, 36(r1)
        lwz r3, 0(r1)
        blr
"""

UNIQUE_A = """
        add r1, r2, r3
        sub r4, r5, r6
        li r7, 9
        blr
"""

UNIQUE_B = """
        lwz r2, 4(r9)
        stw r2, 8(r9)
        cmpwi r2, 1
        bc Lout
Lout:   blr
"""


# --- build_db -----------------------------------------------------------------

def test_db_of_single_one_block_program():
    p = prog("add r1, r2, r3\nadd r4, r5, r6\nadd r0, r1, r2\nblr\n")
    db = build_db([p], W42)
    # one 4-instruction block -> windows at offsets 0 and 2
    assert len(db) == 2


def test_two_identical_programs_double_occurrences():
    a = prog(SHARED_BLOCK, "a")
    b = prog(SHARED_BLOCK, "b")
    one = build_db([a], BB)
    two = build_db([a, b], BB)
    assert set(one.entries) == set(two.entries)
    assert all(e.occurrences == 2 for e in two.entries.values())


def test_identical_programs_within_one_project_count_once():
    a1 = prog(SHARED_BLOCK, "a1")
    a2 = prog(SHARED_BLOCK, "a2")
    db = build_db([Project("proj", (a1, a2))], BB)
    assert all(e.occurrences == 1 for e in db.entries.values())


def test_shared_block_occurrences_at_least_two():
    a = prog(SHARED_BLOCK + UNIQUE_A, "a")
    b = prog(SHARED_BLOCK.replace("Lshared", "Lsh2") + UNIQUE_B, "b")
    db = build_db([a, b], BB)
    shared_ops = ("mflr", "stwu", "stw", "lwz", "blr")  # blr belongs to the block
    shared_hash = tb.digest(shared_ops)
    assert db.entries[shared_hash].occurrences >= 2
    assert db.entries[shared_hash].exemplar == shared_ops


def test_empty_corpus_rejected():
    with pytest.raises(EmptyCorpus):
        build_db([], BB)


def test_exemplar_rehashes_to_key():
    db = build_db([prog(SHARED_BLOCK + UNIQUE_A)], W42)
    for h, entry in db.entries.items():
        assert tb.digest(entry.exemplar) == h
        assert len(entry.exemplar) == entry.length


# --- match_project / coverage_report ----------------------------------------------

def test_identical_eval_program_full_coverage():
    a = prog(SHARED_BLOCK, "train")
    db = build_db([a], BB)
    match = match_project(db, prog(SHARED_BLOCK, "eval"))
    rep = coverage_report(match, "eval")
    assert rep.instruction_coverage == 1.0
    assert rep.percent_str() == "100.00%"


def test_disjoint_eval_program_zero_coverage():
    db = build_db([prog(UNIQUE_A, "train")], BB)
    match = match_project(db, prog(UNIQUE_B, "eval"))
    rep = coverage_report(match, "eval")
    assert rep.instruction_coverage == 0.0
    assert rep.recurring_patterns == 0
    assert rep.percent_str() == "0.00%"


def test_half_shared_gives_half_coverage():
    # 10-instruction shared block + 10-instruction unique block
    shared = "Lsh:    " + "\n        ".join(["add r1, r2, r3"] * 9) + "\n        b Lnext\n"
    unique_train = "Lnext:  " + "\n        ".join(["sub r4, r5, r6"] * 9) + "\n        blr\n"
    unique_eval = "Lnext:  " + "\n        ".join(["li r7, 1"] * 9) + "\n        blr\n"
    db = build_db([prog(shared + unique_train, "train")], BB)
    match = match_project(db, prog(shared + unique_eval, "eval"))
    rep = coverage_report(match, "eval")
    assert rep.project_size == 20
    assert rep.covered_instructions == 10
    assert rep.instruction_coverage == 0.5


def test_percent_rendering_table_style():
    rep = tb.CoverageReport("p1", 10000, 3024, 5413)
    assert rep.percent_str() == "54.13%"
    csv = coverage_csv([rep])
    assert csv.splitlines()[0] == "project,size,patterns,coverage_percent"
    assert csv.splitlines()[1] == "p1,10000,3024,54.13"


def test_granularity_mismatch_detected():
    db = build_db([prog(SHARED_BLOCK)], BB)
    p = prog(SHARED_BLOCK)
    from tribound.fingerprint import digests_for_block

    cfg = tb.build_cfg(p)
    digs = [d for b in cfg.blocks for d in digests_for_block(b, W42)]
    with pytest.raises(GranularityMismatch):
        match_digests(db, p, digs, W42)


# --- leave_one_out ------------------------------------------------------------------

def test_identical_pair_both_full():
    corpus = [prog(SHARED_BLOCK, "a"), prog(SHARED_BLOCK, "b")]
    reports = leave_one_out(corpus, BB)
    assert [r.instruction_coverage for r in reports] == [1.0, 1.0]


def test_three_disjoint_projects_all_zero():
    corpus = [prog(UNIQUE_A, "a"), prog(UNIQUE_B, "b"), prog(SHARED_BLOCK, "c")]
    reports = leave_one_out(corpus, BB)
    assert all(r.instruction_coverage == 0.0 for r in reports)


def test_planted_library_lower_bound():
    # each project: the shared library block + its own unique tail
    uniques = [UNIQUE_A, UNIQUE_B, "        add r9, r9, r9\n        sub r9, r9, r9\n        blr\n"]
    corpus = [prog(SHARED_BLOCK + "\n" + u, f"p{i}") for i, u in enumerate(uniques)]
    shared_size = 5  # mflr stwu stw lwz blr... blr ends the block; count block instrs
    reports = leave_one_out(corpus, BB)
    for rep, project in zip(reports, corpus):
        planted_fraction = shared_size / project.size()
        assert rep.instruction_coverage >= planted_fraction


def test_leave_one_out_needs_two_projects():
    with pytest.raises(CorpusTooSmall):
        leave_one_out([prog(UNIQUE_A)], BB)


# --- coverage invariants ----------------------------------------------------------------

def _coverage(corpus, config) -> list[float]:
    return [r.instruction_coverage for r in leave_one_out(corpus, config)]


def _covered_sets(corpus, config):
    out = []
    projects = [Project(p.name, (p,)) for p in corpus]
    for i, project in enumerate(projects):
        db = build_db(projects[:i] + projects[i + 1:], config)
        match = match_project(db, project)
        out.append({(name, a) for name, s in match.covered.items() for a in s})
    return out


def _random_corpus(seed: int) -> list[tb.Program]:
    from randprog import compose_program, random_fragment

    rng = random.Random(seed)
    shared = random_fragment(rng, "S", constructs=(2, 3))
    programs = []
    for i in range(3):
        unique = random_fragment(rng, f"U{i}", constructs=(1, 2))
        programs.append(prog(compose_program(shared, unique), f"p{i}"))
    return programs


def test_stride_monotonicity_on_covered_sets():
    corpus = _random_corpus(5)
    for window in (4, 8):
        fine = _covered_sets(corpus, WindowConfig(WINDOWED, window, 1))
        mid = _covered_sets(corpus, WindowConfig(WINDOWED, window, 2))
        coarse = _covered_sets(corpus, WindowConfig(WINDOWED, window, 4))
        for f, m, c in zip(fine, mid, coarse):
            assert c <= m <= f


def test_windowed_mode_dominates_block_mode():
    corpus = _random_corpus(6)
    for window, stride in ((8, 4), (4, 2), (8, 1)):
        bb_sets = _covered_sets(corpus, BB)
        win_sets = _covered_sets(corpus, WindowConfig(WINDOWED, window, stride))
        for b, w in zip(bb_sets, win_sets):
            assert b <= w


def test_coverage_invariant_under_operand_relabeling():
    a = prog(SHARED_BLOCK + UNIQUE_A, "a")
    relabeled = SHARED_BLOCK.replace("r1", "r11").replace("r3", "r13") + UNIQUE_A
    b = prog(relabeled, "b")
    db = build_db([a], BB)
    assert coverage_report(match_project(db, b), "b").covered_instructions >= 5


def test_recurring_patterns_bounded_by_distinct_digests():
    corpus = _random_corpus(7)
    for rep, project in zip(leave_one_out(corpus, W42), corpus):
        from tribound.fingerprint import digests_for_block

        cfg = tb.build_cfg(project)
        distinct = {d.hash for b in cfg.blocks for d in digests_for_block(b, W42)}
        assert rep.recurring_patterns <= len(distinct)


# --- persistence ---------------------------------------------------------------------------

def test_db_json_roundtrip(tmp_path):
    db = build_db([prog(SHARED_BLOCK + UNIQUE_A, "a"), prog(UNIQUE_B, "b")], W42)
    path = tmp_path / "patterns.json"
    save_db(db, path)
    loaded = load_db(path)
    assert loaded.entries == db.entries
    assert loaded.granularity == db.granularity
    assert loaded.training_projects == db.training_projects
    doc = db_to_json_dict(db)
    assert set(doc) == {"granularity", "training", "entries"}


def test_paranoid_match_rejects_hash_collisions():
    # fabricate a DB entry whose exemplar disagrees with the eval opcodes;
    # paranoid matching must skip it, plain matching trusts the hash
    from tribound.patterndb import DbEntry, PatternDb

    p = prog(UNIQUE_A, "eval")
    cfg = tb.build_cfg(p)
    block = cfg.blocks[0]
    h = tb.digest(block.opcode_sequence())
    honest = PatternDb({h: DbEntry(block.size(), 1, block.opcode_sequence())}, BB, ("t",))
    forged = PatternDb({h: DbEntry(block.size(), 1, ("lwz",) * block.size())}, BB, ("t",))
    assert match_project(honest, p, paranoid=True).covered_count() == block.size()
    assert match_project(forged, p, paranoid=True).covered_count() == 0
    assert match_project(forged, p, paranoid=False).covered_count() == block.size()
