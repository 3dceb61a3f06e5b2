"""CPU timing model: per-opcode baseline triples plus measured triples for
recurring opcode sequences, with greedy coverage-driven sequence selection
and an accuracy check against end-to-end simulation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .cfg import BasicBlock, build_cfg
from .errors import UnknownOpcode
from .fingerprint import WindowConfig, digest
from .isa import IsaTable, default_isa
from .patterndb import PatternDb, Project, as_projects
from .program import Imm, Instruction, Mem, Program, Reg
from .simproc import (
    InputSpec,
    MachineState,
    ProcessorConfig,
    TimingTriple,
    measure_sequence,
    simulate_program,
)


@dataclass(frozen=True)
class SequenceTiming:
    triple: TimingTriple
    length: int
    exemplar: tuple[str, ...]   # opcode sequence
    granularity: str            # digest mode that produced the entry


@dataclass(frozen=True)
class TimingModel:
    processor_name: str
    baseline: Mapping[str, TimingTriple]          # opcode -> triple
    sequences: Mapping[str, SequenceTiming]       # digest hash -> timing
    provenance: Mapping[str, object] = field(default_factory=dict)

    def sequence_lengths(self) -> list[int]:
        return sorted({s.length for s in self.sequences.values()}, reverse=True)


# --- synthetic operands for baseline measurement -----------------------------

def _synthetic_instruction(isa: IsaTable, mnemonic: str) -> Instruction:
    """One-instruction benchmark body; register choices are arbitrary but fixed."""
    shape = isa.operand_shape(mnemonic)
    operands = []
    for kind in shape:
        if kind == "reg":
            operands.append(Reg(1 + len(operands)))
        elif kind == "imm":
            operands.append(Imm(0))
        elif kind == "mem":
            operands.append(Mem(0, 2))
        elif kind == "target":
            # measured in isolation: the branch ends the run, target unused
            from .program import Target

            operands.append(Target("Lnext"))
    return Instruction(0, mnemonic, tuple(operands))


def baseline_model(
    proc: ProcessorConfig,
    isa: IsaTable,
    inputs: Sequence[MachineState],
    provenance: Mapping[str, object] | None = None,
) -> TimingModel:
    """Measure every mnemonic as a one-instruction sequence over the input set."""
    baseline: dict[str, TimingTriple] = {}
    for mnemonic in isa.mnemonics():
        seq = [_synthetic_instruction(isa, mnemonic)]
        baseline[mnemonic] = measure_sequence(proc, seq, inputs, isa)
    return TimingModel(proc.name, baseline, {}, dict(provenance or {}))


# --- refinement: greedy coverage-driven sequence selection --------------------

@dataclass(frozen=True)
class _Occurrence:
    program: Program
    addresses: tuple[int, ...]      # absolute instruction addresses covered
    instructions: tuple[Instruction, ...]


def _corpus_occurrences(
    projects: Sequence[Project], config: WindowConfig
) -> dict[str, list[_Occurrence]]:
    """Every digest occurrence across the deduplicated corpus, in scan order."""
    occurrences: dict[str, list[_Occurrence]] = {}
    from .fingerprint import digests_for_block

    for project in projects:
        for program in project.unique_programs():
            cfg = build_cfg(program)
            for block in cfg.blocks:
                for d in digests_for_block(block, config):
                    start = block.start() + d.offset
                    instrs = program.instructions[start:start + d.length]
                    occurrences.setdefault(d.hash, []).append(
                        _Occurrence(program, tuple(range(start, start + d.length)), instrs)
                    )
    return occurrences


def refine_model(
    base: TimingModel,
    corpus: Sequence[Project | Program],
    db: PatternDb,
    proc: ProcessorConfig,
    inputs: Sequence[MachineState],
) -> TimingModel:
    """Add measured sequence triples for DB entries, greedily by coverage gain.

    A candidate joins the model only while it improves corpus instruction
    coverage; ties prefer the longer sequence, then the smaller hash.
    """
    projects = as_projects(corpus)
    occurrences = _corpus_occurrences(projects, db.granularity)

    index_sets: dict[str, set[tuple[int, int]]] = {}
    for h in db.entries:
        covered = set()
        for occ in occurrences.get(h, []):
            covered.update((id(occ.program), a) for a in occ.addresses)
        if covered:
            index_sets[h] = covered

    selected: dict[str, SequenceTiming] = {}
    covered_now: set[tuple[int, int]] = set()
    remaining = sorted(index_sets)
    while remaining:
        best_hash: str | None = None
        best_gain = 0
        for h in remaining:
            gain = len(index_sets[h] - covered_now)
            if gain == 0:
                continue
            if best_hash is None:
                best_hash, best_gain = h, gain
                continue
            length, best_length = db.entries[h].length, db.entries[best_hash].length
            if (gain, length) > (best_gain, best_length) or (
                (gain, length) == (best_gain, best_length) and h < best_hash
            ):
                best_hash, best_gain = h, gain
        if best_hash is None:
            break
        remaining.remove(best_hash)
        covered_now |= index_sets[best_hash]
        exemplar = occurrences[best_hash][0]
        triple = measure_sequence(proc, exemplar.instructions, inputs)
        selected[best_hash] = SequenceTiming(
            triple, db.entries[best_hash].length, db.entries[best_hash].exemplar,
            db.granularity.mode,
        )

    provenance = dict(base.provenance)
    provenance.update(
        {
            "corpus": [p.name for p in projects],
            "granularity": {
                "mode": db.granularity.mode,
                "window": db.granularity.window,
                "stride": db.granularity.stride,
            },
        }
    )
    return TimingModel(base.processor_name, dict(base.baseline), selected, provenance)


# --- block lookup -------------------------------------------------------------

@dataclass(frozen=True)
class LookupSegment:
    offset: int
    length: int
    source: str          # "sequence" or "baseline"
    key: str             # digest hash or opcode
    triple: TimingTriple


def lookup(model: TimingModel, block: BasicBlock) -> tuple[list[LookupSegment], TimingTriple]:
    """Greedy longest-match decomposition of a block against model sequences.

    Unmatched instructions fall back to per-opcode baseline cost; the block
    triple is the componentwise sum over segments.
    """
    ops = block.opcode_sequence()
    lengths = model.sequence_lengths()
    segments: list[LookupSegment] = []
    total = TimingTriple.zero()
    i = 0
    while i < len(ops):
        match = None
        for length in lengths:
            if i + length > len(ops) or length < 1:
                continue
            h = digest(ops[i:i + length])
            timing = model.sequences.get(h)
            if timing is not None and timing.length == length:
                match = LookupSegment(i, length, "sequence", h, timing.triple)
                break
        if match is None:
            opcode = ops[i]
            triple = model.baseline.get(opcode)
            if triple is None:
                raise UnknownOpcode(f"model baseline lacks opcode {opcode!r}")
            match = LookupSegment(i, 1, "baseline", opcode, triple)
        segments.append(match)
        total = total + match.triple
        i += match.length
    return segments, total


# --- accuracy check ------------------------------------------------------------

@dataclass(frozen=True)
class AccuracyRow:
    program: str
    predicted_bcet: int
    measured_min: int
    predicted_acet: Fraction
    measured_mean: Fraction
    predicted_wcet: int
    measured_max: int

    def relative_errors(self) -> dict[str, Fraction]:
        def rel(pred, meas):
            if meas == 0:
                return Fraction(0) if pred == 0 else Fraction(10**9)
            return abs(Fraction(pred) - Fraction(meas)) / Fraction(meas)

        return {
            "bcet": rel(self.predicted_bcet, self.measured_min),
            "acet": rel(self.predicted_acet, self.measured_mean),
            "wcet": rel(self.predicted_wcet, self.measured_max),
        }


@dataclass(frozen=True)
class AccuracyReport:
    rows: tuple[AccuracyRow, ...]
    tolerance: Fraction

    def converged(self) -> bool:
        for row in self.rows:
            if row.relative_errors()["wcet"] > self.tolerance:
                return False
            if row.predicted_wcet < row.measured_max:
                return False
        return True


def validate_model(
    model: TimingModel,
    corpus: Sequence[Project | Program],
    proc: ProcessorConfig,
    inputs: Sequence[MachineState],
    tolerance: float | Fraction = Fraction(1, 10),
    fuel: int = 100_000,
) -> tuple[AccuracyReport, bool]:
    """Compare model predictions to end-to-end simulation of the corpus."""
    from .estimator import estimate

    rows: list[AccuracyRow] = []
    for project in as_projects(corpus):
        for program in project.unique_programs():
            est = estimate(program, model)
            runs = [simulate_program(proc, program, s, fuel).total_cycles for s in inputs]
            rows.append(
                AccuracyRow(
                    program=program.name,
                    predicted_bcet=est.bcet,
                    measured_min=min(runs),
                    predicted_acet=est.acet,
                    measured_mean=Fraction(sum(runs), len(runs)),
                    predicted_wcet=est.wcet,
                    measured_max=max(runs),
                )
            )
    report = AccuracyReport(tuple(rows), Fraction(tolerance))
    return report, report.converged()


# --- persistence ----------------------------------------------------------------

def fraction_to_decimal(fr: Fraction, max_places: int = 12, fixed: bool = False) -> str:
    """Decimal string: exact when the fraction terminates within max_places,
    else rounded half-up; fixed pads to exactly max_places decimals."""
    sign = "-" if fr < 0 else ""
    fr = abs(fr)
    whole, rest = divmod(fr.numerator, fr.denominator)
    digits = []
    for _ in range(max_places):
        if rest == 0 and not fixed:
            break
        rest *= 10
        d, rest = divmod(rest, fr.denominator)
        digits.append(str(d))
    if rest != 0 and 2 * rest >= fr.denominator:
        # round the final kept digit up, with carry
        i = len(digits) - 1
        while i >= 0:
            if digits[i] != "9":
                digits[i] = str(int(digits[i]) + 1)
                break
            digits[i] = "0"
            i -= 1
        else:
            whole += 1
    frac_part = "".join(digits) if fixed else "".join(digits).rstrip("0")
    if not frac_part:
        return f"{sign}{whole}"
    return f"{sign}{whole}.{frac_part}"


def _triple_dict(t: TimingTriple) -> dict:
    return {"bcet": t.bcet, "acet": fraction_to_decimal(t.acet), "wcet": t.wcet}


def _triple_from_dict(d: dict) -> TimingTriple:
    acet = Fraction(str(d["acet"]))
    # decimal serialization may clip a repeating mean; clamp into order
    acet = min(max(acet, Fraction(d["bcet"])), Fraction(d["wcet"]))
    return TimingTriple(d["bcet"], acet, d["wcet"])


def model_to_json_dict(model: TimingModel) -> dict:
    return {
        "processor": model.processor_name,
        "baseline": {op: _triple_dict(t) for op, t in sorted(model.baseline.items())},
        "sequences": [
            {
                "hash": h,
                "length": s.length,
                "exemplar": list(s.exemplar),
                "granularity": s.granularity,
                **_triple_dict(s.triple),
            }
            for h, s in sorted(model.sequences.items())
        ],
        "provenance": dict(model.provenance),
    }


def save_model(model: TimingModel, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model_to_json_dict(model), f, indent=2, sort_keys=True)
        f.write("\n")


def load_model(path) -> TimingModel:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    baseline = {op: _triple_from_dict(d) for op, d in doc["baseline"].items()}
    sequences = {
        s["hash"]: SequenceTiming(
            _triple_from_dict(s), s["length"], tuple(s["exemplar"]), s.get("granularity", "basic_block")
        )
        for s in doc["sequences"]
    }
    return TimingModel(doc["processor"], baseline, sequences, doc.get("provenance", {}))


def accuracy_to_json_dict(report: AccuracyReport, converged: bool) -> dict:
    return {
        "tolerance": fraction_to_decimal(report.tolerance),
        "converged": converged,
        "programs": [
            {
                "program": r.program,
                "predictedBcet": r.predicted_bcet,
                "measuredMin": r.measured_min,
                "predictedAcet": fraction_to_decimal(r.predicted_acet),
                "measuredMean": fraction_to_decimal(r.measured_mean),
                "predictedWcet": r.predicted_wcet,
                "measuredMax": r.measured_max,
                "relativeErrors": {
                    k: fraction_to_decimal(v, 6) for k, v in r.relative_errors().items()
                },
            }
            for r in report.rows
        ],
    }
