from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import tribound as tb
from tribound.errors import (
    ArityMismatch,
    DanglingBranchTarget,
    DuplicateLabel,
    MalformedDirective,
    PathLimitExceeded,
    UnboundedCycle,
    UnknownOpcode,
    UnknownOperand,
    UnstructuredFlow,
)
from tribound.isa import BRANCH_COND, BRANCH_UNCOND, RETURN

from randprog import random_structured_source

PROLOGUE_LISTING = """
mflr r0
stwu r1, -32(r1)
stw r0, 36(r1)
lwz r3, 0(r1)
lwz r4, 4(r1)
lwz r5, 8(r1)
cmpwi r3, 0
bc L1
L1: blr
"""

DIAMOND = """
        cmpwi r1, 0
        bc Lelse
Lthen:  add r2, r2, r3
        b Ljoin
Lelse:  sub r2, r2, r3
Ljoin:  blr
"""

LOOP = """
.loopbound Lbody 50
        li r9, 1
Lhead:  cmpwi r3, 0
        bc Ldone
Lbody:  sub r3, r3, r9
        b Lhead
Ldone:  blr
"""


# --- parse_program -----------------------------------------------------------

def test_parse_single_return():
    p = tb.parse_program("blr")
    assert p.size() == 1
    assert p.instructions[0].opcode == "blr"
    assert p.instructions[0].address == 0


def test_parse_prologue_opcode_sequence():
    p = tb.parse_program(PROLOGUE_LISTING)
    assert p.opcode_sequence()[:8] == (
        "mflr", "stwu", "stw", "lwz", "lwz", "lwz", "cmpwi", "bc",
    )


def test_parse_rejects_bad_register():
    with pytest.raises(UnknownOperand):
        tb.parse_program("add q9, r1, r2\nblr\n")
    with pytest.raises(UnknownOperand):
        tb.parse_program("add r99, r1, r2\nblr\n")


def test_parse_rejects_unknown_opcode_and_arity():
    with pytest.raises(UnknownOpcode):
        tb.parse_program("frobnicate r1\nblr\n")
    with pytest.raises(ArityMismatch):
        tb.parse_program("add r1, r2\nblr\n")


def test_parse_rejects_duplicate_label_and_dangling_target():
    with pytest.raises(DuplicateLabel):
        tb.parse_program("L: blr\nL: blr\n")
    with pytest.raises(DanglingBranchTarget):
        tb.parse_program("b Lnowhere\nblr\n")


def test_parse_rejects_malformed_directives():
    with pytest.raises(MalformedDirective):
        tb.parse_program(".loopbound\nblr\n")
    with pytest.raises(MalformedDirective):
        tb.parse_program(".loopbound L notanumber\nL: blr\n")
    with pytest.raises(MalformedDirective):
        tb.parse_program(".loopbound Lmissing 3\nblr\n")
    with pytest.raises(MalformedDirective):
        tb.parse_program(".warp 9\nblr\n")


def test_addresses_dense_and_labels_resolve():
    p = tb.parse_program(DIAMOND)
    assert [i.address for i in p.instructions] == list(range(p.size()))
    assert p.labels["Lthen"] == 2
    assert p.labels["Ljoin"] == 5


def test_parse_print_parse_roundtrip():
    for src in (PROLOGUE_LISTING, DIAMOND, LOOP):
        p = tb.parse_program(src, name="x")
        again = tb.parse_program(tb.format_program(p), name="x")
        assert again.instructions == p.instructions
        assert again.labels == p.labels
        assert [(lb.label, lb.bound) for lb in again.loop_bounds] == [
            (lb.label, lb.bound) for lb in p.loop_bounds
        ]


def test_roundtrip_on_random_programs():
    rng = random.Random(7)
    for _ in range(25):
        src = random_structured_source(rng)
        p = tb.parse_program(src)
        assert tb.parse_program(tb.format_program(p)).instructions == p.instructions


# --- build_cfg ----------------------------------------------------------------

def test_straightline_single_block():
    p = tb.parse_program("add r1, r2, r3\nadd r4, r5, r6\nadd r7, r0, r1\nblr\n")
    cfg = tb.build_cfg(p)
    assert len(cfg.blocks) == 1
    assert cfg.edges == ()
    assert cfg.exits == {0}


def test_diamond_shape():
    cfg = tb.build_cfg(tb.parse_program(DIAMOND))
    assert len(cfg.blocks) == 4
    kinds = {(e.src, e.dst, e.kind) for e in cfg.edges}
    assert kinds == {
        (0, 2, "taken"),
        (0, 1, "fallthrough"),
        (1, 3, "taken"),
        (2, 3, "fallthrough"),
    }


def test_loopbound_attaches_to_body_entry_edge():
    cfg = tb.build_cfg(tb.parse_program(LOOP))
    [(edge, bound)] = list(cfg.loop_bounds.items())
    assert bound == 50
    body = cfg.block_of_label("Lbody")
    head = cfg.block_of_label("Lhead")
    assert (edge.src, edge.dst) == (head.id, body.id)
    # the back edge exists
    assert any(e.src == body.id and e.dst == head.id for e in cfg.edges)


def test_block_partition_reconstructs_program():
    rng = random.Random(21)
    for _ in range(25):
        p = tb.parse_program(random_structured_source(rng))
        cfg = tb.build_cfg(p)
        glued = tuple(i for b in cfg.blocks for i in b.instructions)
        assert glued == p.instructions


def test_single_branch_rule():
    rng = random.Random(22)
    for _ in range(25):
        p = tb.parse_program(random_structured_source(rng))
        cfg = tb.build_cfg(p)
        for b in cfg.blocks:
            branchy = [
                i for i in b.instructions
                if p.isa.klass(i.opcode) in (BRANCH_COND, BRANCH_UNCOND, RETURN)
            ]
            assert len(branchy) <= 1
            if branchy:
                assert branchy[0] is b.instructions[-1]


def test_branch_cond_blocks_have_two_successors():
    rng = random.Random(23)
    for _ in range(25):
        p = tb.parse_program(random_structured_source(rng))
        cfg = tb.build_cfg(p)
        for b in cfg.blocks:
            if p.isa.klass(b.instructions[-1].opcode) == BRANCH_COND:
                assert len(cfg.successors(b.id)) == 2


def test_unreachable_block_is_retained_with_warning():
    src = """
        b Lend
Ldead:  add r1, r1, r1
Lend:   blr
"""
    cfg = tb.build_cfg(tb.parse_program(src))
    assert len(cfg.blocks) == 3
    assert any("UnreachableBlock" in w for w in cfg.warnings)


def test_fallthrough_off_end_rejected():
    with pytest.raises(UnstructuredFlow):
        tb.build_cfg(tb.parse_program("add r1, r2, r3\n"))


def test_entry_directive_selects_block():
    src = """
.entry Lmain
Ldead:  blr
Lmain:  add r1, r1, r1
        blr
"""
    cfg = tb.build_cfg(tb.parse_program(src))
    assert cfg.blocks[cfg.entry].label == "Lmain"


# --- enumerate_paths -------------------------------------------------------------

def test_single_block_one_path():
    cfg = tb.build_cfg(tb.parse_program("blr"))
    paths = tb.enumerate_paths(cfg)
    assert len(paths) == 1
    assert paths[0].block_sequence == (0,)


def test_diamond_two_paths():
    cfg = tb.build_cfg(tb.parse_program(DIAMOND))
    assert len(tb.enumerate_paths(cfg)) == 2


def test_loop_bound_two_gives_three_paths():
    src = LOOP.replace("Lbody 50", "Lbody 2")
    cfg = tb.build_cfg(tb.parse_program(src))
    paths = tb.enumerate_paths(cfg)
    assert len(paths) == 3  # 0, 1 or 2 iterations
    body = cfg.block_of_label("Lbody").id
    iters = sorted(p.block_sequence.count(body) for p in paths)
    assert iters == [0, 1, 2]


def test_unbounded_cycle_detected():
    src = """
        li r9, 1
Lhead:  cmpwi r3, 0
        bc Ldone
        sub r3, r3, r9
        b Lhead
Ldone:  blr
"""
    with pytest.raises(UnboundedCycle):
        tb.enumerate_paths(tb.build_cfg(tb.parse_program(src)))


def test_path_limit_exceeded():
    src = LOOP.replace("Lbody 50", "Lbody 4")
    cfg = tb.build_cfg(tb.parse_program(src))
    with pytest.raises(PathLimitExceeded):
        tb.enumerate_paths(cfg, max_paths=2)


def test_paths_respect_bounds_and_edge_counts():
    rng = random.Random(31)
    for _ in range(25):
        cfg = tb.build_cfg(tb.parse_program(random_structured_source(rng, max_bound=3)))
        for path in tb.enumerate_paths(cfg, max_paths=5000):
            for edge, bound in cfg.loop_bounds.items():
                assert path.edge_counts.get(edge, 0) <= bound
            # edge counts equal traversal counts of consecutive pairs
            traversals: dict[tuple[int, int], int] = {}
            for a, b in zip(path.block_sequence, path.block_sequence[1:]):
                traversals[(a, b)] = traversals.get((a, b), 0) + 1
            per_pair: dict[tuple[int, int], int] = {}
            for edge, n in path.edge_counts.items():
                per_pair[(edge.src, edge.dst)] = per_pair.get((edge.src, edge.dst), 0) + n
            assert per_pair == traversals
            assert path.block_sequence[0] == cfg.entry
            assert path.block_sequence[-1] in cfg.exits


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_roundtrip_property(seed):
    src = random_structured_source(random.Random(seed))
    p = tb.parse_program(src)
    assert tb.parse_program(tb.format_program(p)).instructions == p.instructions
