"""Parse an assembly listing, inspect its basic blocks, and enumerate paths.

The scan task loops over up to 50 input words and stops early at the first
non-zero flag word, which makes it a nice worked example for everything that
follows: clone detection, timing measurement and 3-valued estimation.
"""

from pathlib import Path

import tribound as tb

source = (Path(__file__).parent / "data" / "scan_task.tasm").read_text()
program = tb.parse_program(source, name="scan_task")

print(f"{program.name}: {program.size()} instructions")
for instr in program.instructions:
    print(f"  {instr.address:3d}  {instr.render()}")

cfg = tb.build_cfg(program)
print(f"\nbasic blocks ({len(cfg.blocks)}):")
for block in cfg.blocks:
    ops = " ".join(block.opcode_sequence())
    print(f"  B{block.id} {block.label or '':8s} [{ops}]")

print("\nedges:")
for edge in cfg.edges:
    bound = cfg.loop_bounds.get(edge)
    extra = f"  (taken at most {bound}x per run)" if bound is not None else ""
    print(f"  {edge}{extra}")

# with the loop capped at 2 iterations the path space is small enough to list
short = tb.parse_program(source.replace("Lbody 50", "Lbody 2"))
paths = tb.enumerate_paths(tb.build_cfg(short))
print(f"\nwith the bound lowered to 2, every entry->exit path ({len(paths)}):")
for p in paths:
    print("  " + " -> ".join(f"B{b}" for b in p.block_sequence))
