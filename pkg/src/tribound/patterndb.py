"""Recurring-sequence database and cross-project coverage statistics.

A corpus is a list of projects (named groups of programs).  Identical whole
programs inside one project are counted once; identical programs in
different projects recur.  Matching is purely digest-based; an optional
paranoid mode re-checks opcode equality against the stored exemplar.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .cfg import build_cfg
from .errors import EmptyCorpus, CorpusTooSmall, GranularityMismatch
from .fingerprint import SequenceDigest, WindowConfig, digests_for_block
from .program import Program, dedup_programs


@dataclass(frozen=True)
class Project:
    name: str
    programs: tuple[Program, ...]

    def unique_programs(self) -> list[Program]:
        return dedup_programs(self.programs)

    def size(self) -> int:
        return sum(p.size() for p in self.unique_programs())


def as_projects(corpus: Sequence[Project | Program]) -> list[Project]:
    """Wrap bare programs as single-program projects; pass projects through."""
    out: list[Project] = []
    for i, item in enumerate(corpus):
        if isinstance(item, Project):
            out.append(item)
        else:
            out.append(Project(item.name or f"program{i}", (item,)))
    return out


@dataclass(frozen=True)
class DbEntry:
    length: int
    occurrences: int
    exemplar: tuple[str, ...]  # opcode sequence


@dataclass(frozen=True)
class PatternDb:
    entries: Mapping[str, DbEntry]
    granularity: WindowConfig
    training_projects: tuple[str, ...]

    def __contains__(self, hash_: str) -> bool:
        return hash_ in self.entries

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class MatchResult:
    matched: frozenset[str]                      # digests present in the DB
    covered: Mapping[str, frozenset[int]]        # program name -> covered addresses
    project_size: int
    granularity: WindowConfig

    def covered_count(self) -> int:
        return sum(len(v) for v in self.covered.values())


@dataclass(frozen=True)
class CoverageReport:
    project_name: str
    project_size: int
    recurring_patterns: int
    covered_instructions: int

    @property
    def instruction_coverage(self) -> float:
        if self.project_size == 0:
            return 0.0
        return self.covered_instructions / self.project_size

    def percent_str(self) -> str:
        return f"{self.instruction_coverage * 100:.2f}%"


def _program_digests(program: Program, config: WindowConfig) -> list[SequenceDigest]:
    cfg = build_cfg(program)
    out: list[SequenceDigest] = []
    for block in cfg.blocks:
        out.extend(digests_for_block(block, config))
    return out


def build_db(corpus: Sequence[Project | Program], config: WindowConfig) -> PatternDb:
    """Digest every block of every (deduplicated) program in the corpus."""
    projects = as_projects(corpus)
    if not projects:
        raise EmptyCorpus("training corpus contains no projects")
    entries: dict[str, DbEntry] = {}
    for project in projects:
        for program in project.unique_programs():
            cfg = build_cfg(program)
            for block in cfg.blocks:
                ops = block.opcode_sequence()
                for d in digests_for_block(block, config):
                    prev = entries.get(d.hash)
                    if prev is None:
                        exemplar = ops[d.offset:d.offset + d.length]
                        entries[d.hash] = DbEntry(d.length, 1, exemplar)
                    else:
                        entries[d.hash] = DbEntry(prev.length, prev.occurrences + 1, prev.exemplar)
    return PatternDb(entries, config, tuple(p.name for p in projects))


def match_digests(
    db: PatternDb,
    program: Program,
    digests: Sequence[SequenceDigest],
    granularity: WindowConfig,
    paranoid: bool = False,
) -> tuple[set[str], set[int]]:
    """Match precomputed digests of one program against the DB.

    Returns (matched hashes, covered instruction addresses).  Raises
    GranularityMismatch when the digests came from another window config.
    """
    if granularity.key() != db.granularity.key():
        raise GranularityMismatch(
            f"digests computed under {granularity.key()}, DB built under {db.granularity.key()}"
        )
    cfg = build_cfg(program)
    matched: set[str] = set()
    covered: set[int] = set()
    for d in digests:
        entry = db.entries.get(d.hash)
        if entry is None:
            continue
        if paranoid:
            block = cfg.blocks[d.block_id]
            if block.opcode_sequence()[d.offset:d.offset + d.length] != entry.exemplar:
                continue
        matched.add(d.hash)
        start = cfg.blocks[d.block_id].start()
        covered.update(range(start + d.offset, start + d.offset + d.length))
    return matched, covered


def match_project(db: PatternDb, project: Project | Program, paranoid: bool = False) -> MatchResult:
    """Digest an evaluation project under the DB's granularity and match it."""
    project = as_projects([project])[0]
    matched: set[str] = set()
    covered: dict[str, frozenset[int]] = {}
    size = 0
    for i, program in enumerate(project.unique_programs()):
        digs = _program_digests(program, db.granularity)
        m, c = match_digests(db, program, digs, db.granularity, paranoid)
        matched |= m
        covered[program.name or f"program{i}"] = frozenset(c)
        size += program.size()
    return MatchResult(frozenset(matched), covered, size, db.granularity)


def coverage_report(match: MatchResult, project_name: str, project_size: int | None = None) -> CoverageReport:
    size = match.project_size if project_size is None else project_size
    covered = match.covered_count()
    if size < covered:
        raise ValueError(f"project size {size} below covered count {covered}")
    return CoverageReport(project_name, size, len(match.matched), covered)


def leave_one_out(corpus: Sequence[Project | Program], config: WindowConfig) -> list[CoverageReport]:
    """Per project: train on the others, evaluate on it (the Table-1 protocol)."""
    projects = as_projects(corpus)
    if len(projects) < 2:
        raise CorpusTooSmall("leave-one-out needs at least 2 projects")
    reports: list[CoverageReport] = []
    for i, project in enumerate(projects):
        db = build_db(projects[:i] + projects[i + 1:], config)
        match = match_project(db, project)
        reports.append(coverage_report(match, project.name))
    return reports


def coverage_csv(reports: Iterable[CoverageReport]) -> str:
    lines = ["project,size,patterns,coverage_percent"]
    for r in reports:
        lines.append(
            f"{r.project_name},{r.project_size},{r.recurring_patterns},"
            f"{r.instruction_coverage * 100:.2f}"
        )
    return "\n".join(lines) + "\n"


# --- persistence ----------------------------------------------------------

def db_to_json_dict(db: PatternDb) -> dict:
    return {
        "granularity": {
            "mode": db.granularity.mode,
            "window": db.granularity.window,
            "stride": db.granularity.stride,
        },
        "training": list(db.training_projects),
        "entries": [
            {
                "hash": h,
                "length": e.length,
                "occurrences": e.occurrences,
                "exemplar": list(e.exemplar),
            }
            for h, e in sorted(db.entries.items())
        ],
    }


def save_db(db: PatternDb, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(db_to_json_dict(db), f, indent=2)
        f.write("\n")


def load_db(path) -> PatternDb:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    g = doc["granularity"]
    entries = {
        e["hash"]: DbEntry(e["length"], e["occurrences"], tuple(e["exemplar"]))
        for e in doc["entries"]
    }
    return PatternDb(entries, WindowConfig(g["mode"], g["window"], g["stride"]), tuple(doc["training"]))
