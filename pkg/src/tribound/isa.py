"""Instruction-set table for the textual assembly dialect.

The toolkit defines its own minimal ISA; mnemonics are grouped into eight
classes that drive parsing (operand shapes), timing (per-class latencies)
and control-flow construction (branch/return classes end basic blocks).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

ALU = "alu"
MOVE = "move"
LOAD = "load"
STORE = "store"
COMPARE = "compare"
BRANCH_COND = "branch_cond"
BRANCH_UNCOND = "branch_uncond"
RETURN = "return_"

ALL_CLASSES = (ALU, MOVE, LOAD, STORE, COMPARE, BRANCH_COND, BRANCH_UNCOND, RETURN)

BRANCH_CLASSES = frozenset({BRANCH_COND, BRANCH_UNCOND, RETURN})
MEMORY_CLASSES = frozenset({LOAD, STORE})

# operand kinds, used to validate each (class, arity) shape
REG = "reg"
IMM = "imm"
MEM = "mem"
TARGET = "target"

# the operand shape implied by an entry's class and arity; IsaTable rejects
# entries that do not map to one of these
OPERAND_SHAPES: Mapping[tuple[str, int], tuple[str, ...]] = {
    (ALU, 3): (REG, REG, REG),
    (MOVE, 1): (REG,),
    (MOVE, 2): (REG, IMM),
    (LOAD, 2): (REG, MEM),
    (STORE, 2): (REG, MEM),
    (COMPARE, 2): (REG, IMM),
    (BRANCH_COND, 1): (TARGET,),
    (BRANCH_UNCOND, 1): (TARGET,),
    (RETURN, 0): (),
}

NUM_REGISTERS = 32


@dataclass(frozen=True)
class IsaEntry:
    mnemonic: str
    klass: str
    arity: int


@dataclass(frozen=True)
class IsaTable:
    """Mnemonic -> (class, arity) table; immutable after construction."""

    entries: Mapping[str, IsaEntry] = field(default_factory=dict)

    def __post_init__(self):
        for name, entry in self.entries.items():
            if name != entry.mnemonic:
                raise ValueError(f"entry key {name!r} != mnemonic {entry.mnemonic!r}")
            if (entry.klass, entry.arity) not in OPERAND_SHAPES:
                raise ValueError(
                    f"{name}: no operand shape for class={entry.klass} arity={entry.arity}"
                )
        present = {e.klass for e in self.entries.values()}
        missing = [c for c in ALL_CLASSES if c not in present]
        if missing:
            raise ValueError(f"ISA table lacks classes: {', '.join(missing)}")

    def __contains__(self, mnemonic: str) -> bool:
        return mnemonic in self.entries

    def __getitem__(self, mnemonic: str) -> IsaEntry:
        return self.entries[mnemonic]

    def mnemonics(self) -> tuple[str, ...]:
        return tuple(sorted(self.entries))

    def klass(self, mnemonic: str) -> str:
        return self.entries[mnemonic].klass

    def operand_shape(self, mnemonic: str) -> tuple[str, ...]:
        e = self.entries[mnemonic]
        return OPERAND_SHAPES[(e.klass, e.arity)]


def _table(*rows: tuple[str, str, int]) -> dict[str, IsaEntry]:
    return {m: IsaEntry(m, k, a) for m, k, a in rows}


#: The shipped dialect.  Covers the mnemonics used throughout the docs and
#: demos plus enough ALU/move material to write real kernels.
DEFAULT_ISA = IsaTable(
    _table(
        ("mflr", MOVE, 1),
        ("li", MOVE, 2),
        ("add", ALU, 3),
        ("sub", ALU, 3),
        ("lwz", LOAD, 2),
        ("stw", STORE, 2),
        ("stwu", STORE, 2),
        ("cmpwi", COMPARE, 2),
        ("bc", BRANCH_COND, 1),
        ("b", BRANCH_UNCOND, 1),
        ("blr", RETURN, 0),
    )
)


def default_isa() -> IsaTable:
    return DEFAULT_ISA
