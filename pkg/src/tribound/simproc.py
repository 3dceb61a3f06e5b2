"""Parameterizable in-order pipeline timing simulator.

Serves as the measurement stand-in for target hardware: deterministic
register/memory/flag semantics so branches resolve, plus a cycle model of
per-class latencies, read-after-write hazard penalties, taken-branch
penalties and a hit/miss memory stub.

Cost model notes:

* load/store cost is the memory latency alone (hit or miss); the stub is a
  permanently warm direct-mapped cache, so an access hits iff
  ``0 <= addr < cache_lines * line_size``.  Costs are therefore a pure
  function of the executed instruction and machine state, never of cache
  history.
* ``cross_boundary_effects=False`` disables hazard penalties entirely, so
  timings compose additively at any split point.  With ``True``, adjacent
  instructions couple through hazards, and isolated sequence measurements
  charge the first instruction a pessimistic boundary hazard whenever it
  reads any register; concatenation can then only be cheaper than the sum
  of isolated parts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .cfg import Cfg, Edge, ProgramPath, build_cfg
from .errors import (
    EmptyRange,
    FuelExhausted,
    InvalidMemoryAccess,
    NoValidObservations,
    SequenceShapeError,
    UnknownSemantics,
)
from .isa import (
    ALU,
    BRANCH_COND,
    BRANCH_UNCOND,
    COMPARE,
    MEMORY_CLASSES,
    MOVE,
    RETURN,
)
from .program import Instruction, Mem, Program

MASK32 = 0xFFFFFFFF

LT, EQ, GT = "lt", "eq", "gt"
FLAGS = (LT, EQ, GT)

NON_MEMORY_CLASSES = (ALU, MOVE, COMPARE, BRANCH_COND, BRANCH_UNCOND, RETURN)


@dataclass(frozen=True)
class MemoryConfig:
    hit_latency: int = 1
    miss_latency: int = 8
    cache_lines: int = 64
    line_size: int = 16

    def __post_init__(self):
        if not (0 <= self.hit_latency <= self.miss_latency):
            raise ValueError("need 0 <= hit_latency <= miss_latency")
        for v, name in ((self.cache_lines, "cache_lines"), (self.line_size, "line_size")):
            if v < 1 or v & (v - 1):
                raise ValueError(f"{name} must be a power of two, got {v}")

    @property
    def resident_bytes(self) -> int:
        return self.cache_lines * self.line_size


@dataclass(frozen=True)
class ProcessorConfig:
    name: str
    class_latency: Mapping[str, int]
    raw_hazard_penalty: int = 0
    branch_taken_penalty: int = 0
    memory: MemoryConfig = MemoryConfig()
    cross_boundary_effects: bool = False

    def __post_init__(self):
        for klass in NON_MEMORY_CLASSES:
            lat = self.class_latency.get(klass)
            if lat is None:
                raise ValueError(f"class_latency must cover {klass!r}")
            if lat < 1:
                raise ValueError(f"class_latency[{klass!r}] must be >= 1")
        if self.raw_hazard_penalty < 0 or self.branch_taken_penalty < 0:
            raise ValueError("penalties must be >= 0")


@dataclass
class MachineState:
    """Registers, sparse word memory and the comparison flag.

    Unwritten locations read as 0; memory addresses must be word aligned.
    """

    registers: dict[int, int] = field(default_factory=dict)
    memory: dict[int, int] = field(default_factory=dict)
    flag: str = EQ

    def reg(self, index: int) -> int:
        return self.registers.get(index, 0)

    def set_reg(self, index: int, value: int) -> None:
        self.registers[index] = value & MASK32

    def load(self, addr: int) -> int:
        return self.memory.get(addr, 0)

    def store(self, addr: int, value: int) -> None:
        self.memory[addr] = value & MASK32

    def copy(self) -> "MachineState":
        return MachineState(dict(self.registers), dict(self.memory), self.flag)


@dataclass(frozen=True)
class TimingTriple:
    bcet: int
    acet: Fraction
    wcet: int

    def __post_init__(self):
        object.__setattr__(self, "acet", Fraction(self.acet))
        if not (0 <= self.bcet <= self.acet <= self.wcet):
            raise ValueError(f"triple out of order: {self.bcet}, {self.acet}, {self.wcet}")

    def __add__(self, other: "TimingTriple") -> "TimingTriple":
        return TimingTriple(self.bcet + other.bcet, self.acet + other.acet, self.wcet + other.wcet)

    @staticmethod
    def zero() -> "TimingTriple":
        return TimingTriple(0, Fraction(0), 0)

    @staticmethod
    def constant(cycles: int) -> "TimingTriple":
        return TimingTriple(cycles, Fraction(cycles), cycles)


@dataclass(frozen=True)
class Trace:
    total_cycles: int
    per_instruction: tuple[tuple[int, int, dict], ...]  # (address, cycles, stall breakdown)
    path_taken: ProgramPath


def _signed(value: int) -> int:
    value &= MASK32
    return value - (1 << 32) if value >= (1 << 31) else value


# --- per-mnemonic semantics -----------------------------------------------
#
# Each handler returns (taken: bool, target_label: str | None) for control
# transfer; plain instructions return (False, None).

def _sem_add(state: MachineState, ops) -> tuple[bool, str | None]:
    state.set_reg(ops[0].index, state.reg(ops[1].index) + state.reg(ops[2].index))
    return False, None


def _sem_sub(state, ops):
    state.set_reg(ops[0].index, state.reg(ops[1].index) - state.reg(ops[2].index))
    return False, None


def _sem_li(state, ops):
    state.set_reg(ops[0].index, ops[1].value)
    return False, None


def _sem_mflr(state, ops):
    state.set_reg(ops[0].index, 0)  # link register not modeled
    return False, None


def _effective_address(state: MachineState, mem: Mem) -> int:
    addr = _signed(state.reg(mem.base)) + mem.offset
    if addr % 4 != 0:
        raise InvalidMemoryAccess(f"unaligned access at {addr}")
    return addr


def _sem_lwz(state, ops):
    addr = _effective_address(state, ops[1])
    state.set_reg(ops[0].index, state.load(addr))
    return False, None


def _sem_stw(state, ops):
    addr = _effective_address(state, ops[1])
    state.store(addr, state.reg(ops[0].index))
    return False, None


def _sem_stwu(state, ops):
    addr = _effective_address(state, ops[1])
    state.store(addr, state.reg(ops[0].index))
    state.set_reg(ops[1].base, addr)
    return False, None


def _sem_cmpwi(state, ops):
    lhs = _signed(state.reg(ops[0].index))
    rhs = ops[1].value
    state.flag = LT if lhs < rhs else EQ if lhs == rhs else GT
    return False, None


def _sem_bc(state, ops):
    # dialect rule: conditional branch taken iff the flag is `eq`
    return state.flag == EQ, ops[0].label


def _sem_b(state, ops):
    return True, ops[0].label


def _sem_blr(state, ops):
    return True, None


SEMANTICS: Mapping[str, Callable] = {
    "add": _sem_add,
    "sub": _sem_sub,
    "li": _sem_li,
    "mflr": _sem_mflr,
    "lwz": _sem_lwz,
    "stw": _sem_stw,
    "stwu": _sem_stwu,
    "cmpwi": _sem_cmpwi,
    "bc": _sem_bc,
    "b": _sem_b,
    "blr": _sem_blr,
}

# registers read/written per mnemonic, for hazard detection
def _regs_read(instr: Instruction) -> frozenset[int]:
    op = instr.opcode
    ops = instr.operands
    if op in ("add", "sub"):
        return frozenset({ops[1].index, ops[2].index})
    if op == "lwz":
        return frozenset({ops[1].base})
    if op in ("stw", "stwu"):
        return frozenset({ops[0].index, ops[1].base})
    if op == "cmpwi":
        return frozenset({ops[0].index})
    return frozenset()


def _regs_written(instr: Instruction) -> frozenset[int]:
    op = instr.opcode
    ops = instr.operands
    if op in ("add", "sub", "li", "mflr", "lwz"):
        return frozenset({ops[0].index})
    if op == "stwu":
        return frozenset({ops[1].base})
    return frozenset()


_BOUNDARY = "boundary"  # pessimistic unknown predecessor for isolated runs


def _instruction_cost(
    proc: ProcessorConfig,
    program_isa,
    instr: Instruction,
    state: MachineState,
    prev: Instruction | str | None,
    taken: bool,
) -> tuple[int, dict]:
    klass = program_isa.klass(instr.opcode)
    if klass in MEMORY_CLASSES:
        mem = next(op for op in instr.operands if isinstance(op, Mem))
        addr = _effective_address(state, mem)
        hit = 0 <= addr < proc.memory.resident_bytes
        base = proc.memory.hit_latency if hit else proc.memory.miss_latency
    else:
        base = proc.class_latency[klass]

    hazard = 0
    if proc.cross_boundary_effects and proc.raw_hazard_penalty:
        reads = _regs_read(instr)
        if prev is _BOUNDARY:
            if reads:
                hazard = proc.raw_hazard_penalty
        elif prev is not None and reads & _regs_written(prev):
            hazard = proc.raw_hazard_penalty

    branch = proc.branch_taken_penalty if taken else 0
    breakdown = {"base": base, "hazard": hazard, "branch": branch}
    return base + hazard + branch, breakdown


def _check_semantics(program: Program) -> None:
    for instr in program.instructions:
        if instr.opcode not in SEMANTICS:
            raise UnknownSemantics(f"no execution semantics for {instr.opcode!r}")


def _will_take(isa, instr: Instruction, state: MachineState) -> bool:
    klass = isa.klass(instr.opcode)
    if klass == BRANCH_COND:
        return state.flag == EQ
    return klass in (BRANCH_UNCOND, RETURN)


def simulate_program(
    proc: ProcessorConfig,
    program: Program,
    init: MachineState,
    fuel: int = 100_000,
    cfg: Cfg | None = None,
) -> Trace:
    """Execute a program to its return, accounting cycles per instruction."""
    if fuel <= 0:
        raise ValueError("fuel must be positive")
    _check_semantics(program)
    cfg = cfg or build_cfg(program)
    block_start = {b.start(): b.id for b in cfg.blocks}
    edge_by_key = {(e.src, e.dst, e.kind): e for e in cfg.edges}

    state = init.copy()
    pc = cfg.blocks[cfg.entry].start()
    prev: Instruction | None = None
    last_taken = False
    block_seq: list[int] = []
    edge_counts: dict[Edge, int] = {}
    per_instruction: list[tuple[int, int, dict]] = []
    total = 0
    executed = 0
    current_block: int | None = None

    while True:
        if executed >= fuel:
            raise FuelExhausted(f"no return after {fuel} instructions")
        if pc in block_start:
            next_block = block_start[pc]
            if current_block is not None:
                kind = "taken" if last_taken else "fallthrough"
                edge = edge_by_key[(current_block, next_block, kind)]
                edge_counts[edge] = edge_counts.get(edge, 0) + 1
            current_block = next_block
            block_seq.append(current_block)

        instr = program.instructions[pc]
        taken = _will_take(program.isa, instr, state)
        # cost uses the pre-execution state: stwu mutates its own base register
        cycles, breakdown = _instruction_cost(proc, program.isa, instr, state, prev, taken)
        _, target = SEMANTICS[instr.opcode](state, instr.operands)
        per_instruction.append((instr.address, cycles, breakdown))
        total += cycles
        executed += 1
        prev = instr
        last_taken = taken

        klass = program.isa.klass(instr.opcode)
        if klass == RETURN:
            break
        if taken and target is not None:
            pc = program.labels[target]
        else:
            pc = instr.address + 1

    return Trace(total, tuple(per_instruction), ProgramPath(tuple(block_seq), edge_counts))


# --- input generation -------------------------------------------------------

class Lcg:
    """Pinned linear congruential generator (32-bit, Numerical Recipes constants).

    x' = (1664525 * x + 1013904223) mod 2^32; draw(lo, hi) maps the raw state
    to lo + x' % (hi - lo + 1).  Same seed, same stream, on any platform.
    """

    def __init__(self, seed: int):
        self.state = seed & MASK32

    def next(self) -> int:
        self.state = (1664525 * self.state + 1013904223) & MASK32
        return self.state

    def draw(self, lo: int, hi: int) -> int:
        if hi < lo:
            raise EmptyRange(f"empty range [{lo}, {hi}]")
        return lo + self.next() % (hi - lo + 1)


@dataclass(frozen=True)
class InputSpec:
    """Input-space description for random measurement campaigns.

    register_ranges maps register index -> inclusive (lo, hi); unlisted
    registers stay 0.  word_align rounds drawn values down to a multiple of
    4 so they are usable as memory bases.
    """

    register_ranges: Mapping[int, tuple[int, int]] = field(default_factory=dict)
    memory: Mapping[int, int] = field(default_factory=dict)
    randomize_flag: bool = True
    word_align: bool = False

    def key(self) -> dict:
        return {
            "registers": {f"r{r}": list(v) for r, v in sorted(self.register_ranges.items())},
            "memory": {str(a): v for a, v in sorted(self.memory.items())},
            "randomize_flag": self.randomize_flag,
            "word_align": self.word_align,
        }


def generate_inputs(seed: int, spec: InputSpec, n: int) -> list[MachineState]:
    """Deterministic pseudo-random machine states; same seed, same list."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = Lcg(seed)
    states: list[MachineState] = []
    for _ in range(n):
        regs: dict[int, int] = {}
        for index in sorted(spec.register_ranges):
            lo, hi = spec.register_ranges[index]
            value = rng.draw(lo, hi)
            if spec.word_align:
                value -= value % 4
            regs[index] = value & MASK32
        flag = FLAGS[rng.draw(0, 2)] if spec.randomize_flag else EQ
        states.append(MachineState(regs, dict(spec.memory), flag))
    return states


def campaign_inputs(proc: ProcessorConfig, seed: int, n: int, spec: InputSpec | None = None) -> list[MachineState]:
    """Random states plus deterministic extremes so measured maxima are real maxima.

    Appends an all-miss state (every register points past the resident
    window), an all-hit state (registers 0) and both branch-flag outcomes.
    """
    if spec is None:
        window = proc.memory.resident_bytes
        spec = InputSpec(
            register_ranges={r: (0, 2 * window) for r in range(32)},
            word_align=True,
        )
    states = generate_inputs(seed, spec, n)
    window = proc.memory.resident_bytes
    miss_base = ((window + 3) // 4) * 4  # first aligned address past the resident window
    all_miss = MachineState({r: miss_base for r in range(32)}, {}, GT)
    all_hit = MachineState({r: 0 for r in range(32)}, {}, EQ)
    return states + [all_miss, all_hit]


# --- isolated sequence measurement ------------------------------------------

def _run_sequence(proc: ProcessorConfig, isa, seq: Sequence[Instruction], init: MachineState) -> int:
    state = init.copy()
    prev: Instruction | str | None = _BOUNDARY if proc.cross_boundary_effects else None
    total = 0
    for instr in seq:
        if instr.opcode not in SEMANTICS:
            raise UnknownSemantics(f"no execution semantics for {instr.opcode!r}")
        taken = _will_take(isa, instr, state)
        cycles, _ = _instruction_cost(proc, isa, instr, state, prev, taken)
        SEMANTICS[instr.opcode](state, instr.operands)
        total += cycles
        prev = instr
        # a final branch ends the run at the block edge; it is never followed
    return total


def measure_sequence(
    proc: ProcessorConfig,
    seq: Sequence[Instruction],
    inputs: Sequence[MachineState],
    isa=None,
) -> TimingTriple:
    """Run an instruction sequence in isolation once per input state.

    The triple is (min, mean, max) of the observed cycle counts; the mean is
    kept exact as a Fraction.
    """
    from .isa import default_isa

    isa = isa or default_isa()
    if not seq:
        raise SequenceShapeError("cannot measure an empty sequence")
    for i, instr in enumerate(seq):
        klass = isa.klass(instr.opcode)
        if klass in (BRANCH_COND, BRANCH_UNCOND, RETURN) and i != len(seq) - 1:
            raise SequenceShapeError("branch allowed only as the final instruction")
    if not inputs:
        raise NoValidObservations("measurement campaign needs at least one input state")

    observations = [_run_sequence(proc, isa, seq, s) for s in inputs]
    return TimingTriple(
        min(observations),
        Fraction(sum(observations), len(observations)),
        max(observations),
    )


# --- processor config persistence -------------------------------------------

def proc_to_json_dict(proc: ProcessorConfig) -> dict:
    return {
        "name": proc.name,
        "classLatency": dict(sorted(proc.class_latency.items())),
        "rawHazardPenalty": proc.raw_hazard_penalty,
        "branchTakenPenalty": proc.branch_taken_penalty,
        "memory": {
            "hitLatency": proc.memory.hit_latency,
            "missLatency": proc.memory.miss_latency,
            "cacheLines": proc.memory.cache_lines,
            "lineSize": proc.memory.line_size,
        },
        "crossBoundaryEffects": proc.cross_boundary_effects,
    }


def proc_from_json_dict(doc: dict) -> ProcessorConfig:
    mem = doc.get("memory", {})
    return ProcessorConfig(
        name=doc.get("name", "proc"),
        class_latency=dict(doc["classLatency"]),
        raw_hazard_penalty=doc.get("rawHazardPenalty", 0),
        branch_taken_penalty=doc.get("branchTakenPenalty", 0),
        memory=MemoryConfig(
            hit_latency=mem.get("hitLatency", 1),
            miss_latency=mem.get("missLatency", 8),
            cache_lines=mem.get("cacheLines", 64),
            line_size=mem.get("lineSize", 16),
        ),
        cross_boundary_effects=doc.get("crossBoundaryEffects", False),
    )



def load_proc(path) -> ProcessorConfig:
    with open(path, encoding="utf-8") as f:
        return proc_from_json_dict(json.load(f))


def save_proc(proc: ProcessorConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(proc_to_json_dict(proc), f, indent=2)
        f.write("\n")


def trace_to_jsonl(trace: Trace) -> str:
    """Trace dump: one JSON object per executed instruction."""
    lines = []
    for addr, cycles, breakdown in trace.per_instruction:
        lines.append(json.dumps({"address": addr, "cycles": cycles, **breakdown}))
    return "\n".join(lines) + "\n"
