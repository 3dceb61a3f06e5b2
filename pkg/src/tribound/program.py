"""Parsing of `.tasm` assembly listings into immutable programs.

Source grammar, one instruction per line::

    ; comment to end of line
    .entry <label>              ; optional, default: first instruction
    .loopbound <label> <N>      ; cap on the in-loop edge entering <label>
    label: opcode op1, op2      ; label prefix optional

Operands are registers ``r0..r31``, integer immediates, memory references
``imm(rN)`` and branch-target labels, as dictated by the opcode's class.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

from .errors import (
    ArityMismatch,
    DanglingBranchTarget,
    DuplicateLabel,
    MalformedDirective,
    ParseError,
    UnknownOpcode,
    UnknownOperand,
)
from .isa import IMM, MEM, NUM_REGISTERS, REG, TARGET, IsaTable, default_isa

_LABEL_RE = re.compile(r"^[A-Za-z_]\w*$")
_REG_RE = re.compile(r"^r(\d+)$")
_IMM_RE = re.compile(r"^-?\d+$")
_MEM_RE = re.compile(r"^(-?\d+)\(r(\d+)\)$")


@dataclass(frozen=True)
class Reg:
    index: int

    def __str__(self) -> str:
        return f"r{self.index}"


@dataclass(frozen=True)
class Imm:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Mem:
    offset: int
    base: int

    def __str__(self) -> str:
        return f"{self.offset}(r{self.base})"


@dataclass(frozen=True)
class Target:
    label: str

    def __str__(self) -> str:
        return self.label


Operand = Reg | Imm | Mem | Target


@dataclass(frozen=True)
class Instruction:
    address: int
    opcode: str
    operands: tuple[Operand, ...]
    label: str | None = None

    def render(self) -> str:
        ops = ", ".join(str(o) for o in self.operands)
        head = f"{self.label}: " if self.label else ""
        return f"{head}{self.opcode} {ops}".rstrip()


@dataclass(frozen=True)
class LoopBound:
    label: str
    bound: int
    line: int


@dataclass(frozen=True)
class Program:
    name: str
    instructions: tuple[Instruction, ...]
    labels: dict[str, int]          # label -> instruction address
    loop_bounds: tuple[LoopBound, ...]
    entry_label: str | None
    isa: IsaTable

    def size(self) -> int:
        return len(self.instructions)

    def opcode_sequence(self) -> tuple[str, ...]:
        return tuple(i.opcode for i in self.instructions)

    def body_key(self) -> tuple:
        """Identity of the code itself (opcode+operands), used for whole-program dedup."""
        return tuple((i.opcode, i.operands) for i in self.instructions)


def _parse_operand(token: str, kind: str, line_no: int) -> Operand:
    token = token.strip()
    if kind == REG:
        m = _REG_RE.match(token)
        if not m or not (0 <= int(m.group(1)) < NUM_REGISTERS):
            raise UnknownOperand(f"expected register r0..r{NUM_REGISTERS - 1}, got {token!r}", line_no)
        return Reg(int(m.group(1)))
    if kind == IMM:
        if not _IMM_RE.match(token):
            raise UnknownOperand(f"expected integer immediate, got {token!r}", line_no)
        return Imm(int(token))
    if kind == MEM:
        m = _MEM_RE.match(token)
        if not m or not (0 <= int(m.group(2)) < NUM_REGISTERS):
            raise UnknownOperand(f"expected memory reference imm(rN), got {token!r}", line_no)
        return Mem(int(m.group(1)), int(m.group(2)))
    if kind == TARGET:
        if not _LABEL_RE.match(token):
            raise UnknownOperand(f"expected branch-target label, got {token!r}", line_no)
        return Target(token)
    raise AssertionError(kind)


def parse_program(text: str, isa: IsaTable | None = None, name: str = "") -> Program:
    """Parse `.tasm` source into a Program with dense, increasing addresses."""
    isa = isa or default_isa()
    instructions: list[Instruction] = []
    labels: dict[str, int] = {}
    loop_bounds: list[LoopBound] = []
    entry_label: str | None = None
    pending_label: str | None = None
    pending_label_line = 0

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue

        if line.startswith("."):
            parts = line.split()
            if parts[0] == ".loopbound":
                if len(parts) != 3 or not _LABEL_RE.match(parts[1]):
                    raise MalformedDirective(f"expected `.loopbound <label> <N>`, got {line!r}", line_no)
                try:
                    bound = int(parts[2])
                except ValueError:
                    raise MalformedDirective(f"loop bound must be an integer, got {parts[2]!r}", line_no)
                if bound < 0:
                    raise MalformedDirective(f"loop bound must be >= 0, got {bound}", line_no)
                if any(lb.label == parts[1] for lb in loop_bounds):
                    raise MalformedDirective(f"duplicate .loopbound for label {parts[1]!r}", line_no)
                loop_bounds.append(LoopBound(parts[1], bound, line_no))
            elif parts[0] == ".entry":
                if len(parts) != 2 or not _LABEL_RE.match(parts[1]):
                    raise MalformedDirective(f"expected `.entry <label>`, got {line!r}", line_no)
                if entry_label is not None:
                    raise MalformedDirective("duplicate .entry directive", line_no)
                entry_label = parts[1]
            else:
                raise MalformedDirective(f"unknown directive {parts[0]!r}", line_no)
            continue

        if ":" in line:
            label_part, line = line.split(":", 1)
            label = label_part.strip()
            if not _LABEL_RE.match(label):
                raise ParseError(f"bad label {label_part!r}", line_no)
            if label in labels or label == pending_label:
                raise DuplicateLabel(f"label {label!r} defined twice", line_no)
            if pending_label is not None:
                raise ParseError(f"label {pending_label!r} already pending on this instruction", line_no)
            pending_label = label
            pending_label_line = line_no
            line = line.strip()
            if not line:
                continue  # label on its own line attaches to the next instruction

        fields = line.split(None, 1)
        mnemonic = fields[0].lower()
        if mnemonic not in isa:
            raise UnknownOpcode(f"unknown opcode {mnemonic!r}", line_no)
        shape = isa.operand_shape(mnemonic)
        tokens = [t for t in (fields[1].split(",") if len(fields) > 1 else []) if t.strip()]
        if len(tokens) != len(shape):
            raise ArityMismatch(
                f"{mnemonic} expects {len(shape)} operand(s), got {len(tokens)}", line_no
            )
        operands = tuple(_parse_operand(tok, kind, line_no) for tok, kind in zip(tokens, shape))

        address = len(instructions)
        if pending_label is not None:
            labels[pending_label] = address
        instructions.append(Instruction(address, mnemonic, operands, pending_label))
        pending_label = None

    if pending_label is not None:
        raise ParseError(f"label {pending_label!r} has no instruction", pending_label_line)

    # resolve references
    for instr in instructions:
        for op in instr.operands:
            if isinstance(op, Target) and op.label not in labels:
                raise DanglingBranchTarget(
                    f"branch target {op.label!r} undefined (address {instr.address})"
                )
    for lb in loop_bounds:
        if lb.label not in labels:
            raise MalformedDirective(f".loopbound names unknown label {lb.label!r}", lb.line)
    if entry_label is not None and entry_label not in labels:
        raise MalformedDirective(f".entry names unknown label {entry_label!r}")

    return Program(
        name=name,
        instructions=tuple(instructions),
        labels=labels,
        loop_bounds=tuple(loop_bounds),
        entry_label=entry_label,
        isa=isa,
    )


def format_program(program: Program) -> str:
    """Render a program back to `.tasm` text; parse(format(p)) reproduces p."""
    lines: list[str] = []
    if program.entry_label is not None:
        lines.append(f".entry {program.entry_label}")
    for lb in program.loop_bounds:
        lines.append(f".loopbound {lb.label} {lb.bound}")
    for instr in program.instructions:
        prefix = "" if instr.label else "        "
        lines.append(prefix + instr.render())
    return "\n".join(lines) + "\n"


def programs_equal(a: Program, b: Program) -> bool:
    return a.body_key() == b.body_key()


def dedup_programs(programs: Iterable[Program]) -> list[Program]:
    """Drop later duplicates of identical whole programs (same opcodes+operands)."""
    seen: set[tuple] = set()
    unique: list[Program] = []
    for p in programs:
        key = p.body_key()
        if key not in seen:
            seen.add(key)
            unique.append(p)
    return unique
