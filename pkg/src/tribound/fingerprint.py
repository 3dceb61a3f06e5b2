"""Opcode-sequence digests at basic-block and sliding-window granularity.

Only opcodes feed the hash: operands, addresses and labels never change a
digest.  Windows never cross block boundaries; the final window of a block
is pruned to the block end.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

from .cfg import BasicBlock

BASIC_BLOCK = "basic_block"
WINDOWED = "windowed"


@dataclass(frozen=True)
class WindowConfig:
    mode: str = BASIC_BLOCK
    window: int = 8
    stride: int = 4

    def __post_init__(self):
        if self.mode not in (BASIC_BLOCK, WINDOWED):
            raise ValueError(f"unknown digest mode {self.mode!r}")
        if self.window < 1 or self.stride < 1:
            raise ValueError("window and stride must be positive")
        if self.stride > self.window:
            raise ValueError(
                f"stride {self.stride} exceeds window {self.window}; "
                "instructions between windows would never be digested"
            )

    def key(self) -> tuple:
        return (self.mode, self.window, self.stride)


@dataclass(frozen=True)
class SequenceDigest:
    hash: str       # 32 lowercase hex chars (MD5)
    block_id: int
    offset: int     # start index within the block
    length: int     # instruction count


def serialize_opcodes(opcodes: Iterable[str]) -> bytes:
    """Canonical byte form: lowercase mnemonics joined by a single linefeed."""
    return "\n".join(op.lower() for op in opcodes).encode("utf-8")


def digest(opcodes: Iterable[str]) -> str:
    return hashlib.md5(serialize_opcodes(opcodes)).hexdigest()


def block_digest(block: BasicBlock) -> SequenceDigest:
    """One digest covering the whole block."""
    ops = block.opcode_sequence()
    return SequenceDigest(digest(ops), block.id, 0, len(ops))


def window_digests(block: BasicBlock, config: WindowConfig) -> list[SequenceDigest]:
    """Digests of the sliding windows at offsets 0, s, 2s, ... < block size.

    The last windows shrink to the block end, so a stride landing on the
    final instruction still yields a length-1 digest.
    """
    if config.mode != WINDOWED:
        raise ValueError("window_digests requires windowed mode")
    ops = block.opcode_sequence()
    size = len(ops)
    out: list[SequenceDigest] = []
    for offset in range(0, size, config.stride):
        length = min(config.window, size - offset)
        out.append(SequenceDigest(digest(ops[offset:offset + length]), block.id, offset, length))
    return out


def digests_for_block(block: BasicBlock, config: WindowConfig) -> list[SequenceDigest]:
    if config.mode == BASIC_BLOCK:
        return [block_digest(block)]
    return window_digests(block, config)


def dump_digests(digests: Sequence[SequenceDigest]) -> str:
    """One line per digest: hash<TAB>blockId<TAB>offset<TAB>length."""
    return "\n".join(f"{d.hash}\t{d.block_id}\t{d.offset}\t{d.length}" for d in digests)
