"""Three-valued estimation with typical-path marks steering the ACET.

WCET/BCET come from exact implicit path enumeration over the loop-bounded
CFG.  Marking the expected path pins those blocks' execution counts for the
ACET solve only; the WCET is computed without the marks and never moves.
Dividing by the task's activation period turns the numbers into device load.
"""

from fractions import Fraction
from pathlib import Path

import tribound as tb
from tribound.cli import load_corpus
from tribound.estimator import Annotation, Region, compute_load, estimate
from tribound.fingerprint import WINDOWED, WindowConfig
from tribound.patterndb import build_db
from tribound.simproc import campaign_inputs, load_proc
from tribound.timing_model import baseline_model, refine_model

data = Path(__file__).parent / "data"
proc = load_proc(data / "proc.json")
corpus = load_corpus(data / "corpus")
inputs = campaign_inputs(proc, seed=2024, n=16)
model = refine_model(
    baseline_model(proc, tb.default_isa(), inputs),
    corpus,
    build_db(corpus, WindowConfig(WINDOWED, 8, 4)),
    proc,
    inputs,
)

program = tb.parse_program((data / "scan_task.tasm").read_text(), name="scan_task")
plain = estimate(program, model)
print("unannotated estimate (cycles):")
print(f"  BCET {plain.bcet}   ACET {float(plain.acet):.2f}   WCET {plain.wcet}")

typical = Annotation(
    tuple(
        Region("typical", label=label)
        for label in ("Lscan", "Lhead", "Lbody", "Lcheck", "Ldone")
    )
)
marked = estimate(program, model, typical)
print("\nwith the expected scan path marked typical (one pass through each block):")
print(f"  BCET {marked.bcet}   ACET {float(marked.acet):.2f}   WCET {marked.wcet}")

print("\nper-block worst-case contributions:")
cfg = tb.build_cfg(program)
for block in cfg.blocks:
    contribution = marked.contribution(block.id)
    counts = marked.block_counts[block.id]
    print(
        f"  B{block.id} {block.label or '':7s} wcet x{counts['wcet']:3d} -> {contribution['wcet']:5d} cycles"
    )

period = 2_000
print(f"\ndevice load at a {period}-cycle activation period:")
for which in ("bcet", "acet", "wcet"):
    load = compute_load(marked, period, which)
    print(f"  {which}: {float(load):6.2%}")
