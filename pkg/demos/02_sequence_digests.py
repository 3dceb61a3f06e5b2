"""Fingerprint basic blocks with MD5 digests over opcode sequences.

Two granularities: one digest per whole block, or a sliding window with a
stride.  Operands never matter, so register renaming does not break a match;
windows shrink at the block end, so a stride landing on the last instruction
still produces a length-1 digest.
"""

from pathlib import Path

import tribound as tb
from tribound.fingerprint import WINDOWED, WindowConfig, block_digest, window_digests

source = (Path(__file__).parent / "data" / "corpus" / "conveyor" / "main.tasm").read_text()
program = tb.parse_program(source, name="conveyor")
cfg = tb.build_cfg(program)

print("whole-block digests:")
for block in cfg.blocks:
    d = block_digest(block)
    ops = ", ".join(block.opcode_sequence())
    print(f"  B{block.id}: {d.hash}  <- ({ops})")

config = WindowConfig(WINDOWED, window=4, stride=2)
print(f"\nwindowed digests of B0 (window={config.window}, stride={config.stride}):")
for d in window_digests(cfg.blocks[0], config):
    ops = ", ".join(cfg.blocks[0].opcode_sequence()[d.offset : d.offset + d.length])
    print(f"  offset {d.offset:2d} length {d.length}: {d.hash}  <- ({ops})")

# the digest ignores operands: renaming registers leaves the hash unchanged
renamed = source.replace("r3", "r23").replace("r6", "r26")
cfg2 = tb.build_cfg(tb.parse_program(renamed))
assert block_digest(cfg2.blocks[0]).hash == block_digest(cfg.blocks[0]).hash
print("\nregister renaming leaves every digest unchanged: verified")
