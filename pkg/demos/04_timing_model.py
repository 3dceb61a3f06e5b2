"""Build a processor timing model: per-opcode baseline, then sequence refinement.

Step 1 measures every opcode as a one-instruction benchmark over a seeded
random input campaign.  Step 2 mines the corpus for recurring sequences and
greedily adopts those that improve instruction coverage, measuring each with
its exemplar operands.  Step 3 checks predictions against end-to-end runs of
the training programs.
"""

from fractions import Fraction
from pathlib import Path

import tribound as tb
from tribound.cli import load_corpus
from tribound.fingerprint import WINDOWED, WindowConfig
from tribound.patterndb import build_db
from tribound.simproc import campaign_inputs, load_proc
from tribound.timing_model import baseline_model, refine_model, validate_model

data = Path(__file__).parent / "data"
proc = load_proc(data / "proc.json")
corpus = load_corpus(data / "corpus")
inputs = campaign_inputs(proc, seed=2024, n=16)

base = baseline_model(proc, tb.default_isa(), inputs)
print(f"baseline triples on {proc.name}:")
for opcode, t in sorted(base.baseline.items()):
    print(f"  {opcode:7s} bcet={t.bcet:2d}  acet={float(t.acet):5.2f}  wcet={t.wcet:2d}")

config = WindowConfig(WINDOWED, 8, 4)
db = build_db(corpus, config)
model = refine_model(base, corpus, db, proc, inputs)
print(f"\nrefined model: {len(model.sequences)} sequences adopted out of {len(db)} digests")
for h, s in list(model.sequences.items())[:6]:
    print(f"  {h[:12]}…  len={s.length:2d}  wcet={s.triple.wcet:3d}  ({', '.join(s.exemplar[:5])}…)")

report, converged = validate_model(model, corpus, proc, inputs, tolerance=Fraction(1, 2))
print(f"\naccuracy check (tolerance 50%): converged={converged}")
for row in report.rows:
    err = float(row.relative_errors()["wcet"])
    print(
        f"  {row.program:10s} predicted wcet {row.predicted_wcet:4d}"
        f"  measured max {row.measured_max:4d}  rel err {err:6.2%}"
    )
