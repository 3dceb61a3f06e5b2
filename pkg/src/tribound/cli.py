"""Command-line driver: train, coverage, estimate, serve.

Corpus layout for train/coverage: a directory whose subdirectories are
projects of `.tasm` files; a flat directory of `.tasm` files is treated as
one project per file.  Errors leave a machine-readable JSON object on
stderr and exit with status 2; `train` exits 0 only when the model
converged at the requested tolerance.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from .errors import CorpusTooSmall, EmptyCorpus, TriboundError
from .estimator import (
    annotation_from_json_dict,
    estimate,
    estimate_to_json_dict,
    render_json,
)
from .fingerprint import BASIC_BLOCK, WINDOWED, WindowConfig
from .cfg import build_cfg
from .isa import default_isa
from .patterndb import Project, build_db, coverage_csv, leave_one_out
from .program import parse_program
from .simproc import campaign_inputs, load_proc
from .timing_model import (
    accuracy_to_json_dict,
    baseline_model,
    load_model,
    refine_model,
    save_model,
    validate_model,
)


def _load_programs(directory: Path) -> list:
    programs = []
    for path in sorted(directory.glob("*.tasm")):
        programs.append(parse_program(path.read_text(encoding="utf-8"), name=path.stem))
    return programs


def load_corpus(corpus_dir: str | Path) -> list[Project]:
    """Subdirectories are projects; a flat dir yields one project per file."""
    root = Path(corpus_dir)
    if not root.is_dir():
        raise EmptyCorpus(f"corpus directory {root} does not exist")
    subdirs = sorted(d for d in root.iterdir() if d.is_dir())
    if subdirs:
        projects = [Project(d.name, tuple(_load_programs(d))) for d in subdirs]
        projects = [p for p in projects if p.programs]
    else:
        projects = [Project(p.name, (p,)) for p in _load_programs(root)]
    if not projects:
        raise EmptyCorpus(f"no .tasm programs under {root}")
    return projects


def _window_config(args) -> WindowConfig:
    mode = BASIC_BLOCK if args.mode == "bb" else WINDOWED
    return WindowConfig(mode, args.window, args.stride)


def cmd_train(args) -> int:
    corpus = load_corpus(args.corpus)
    proc = load_proc(args.proc)
    config = _window_config(args)
    inputs = campaign_inputs(proc, args.seed, args.inputs)
    db = build_db(corpus, config)
    base = baseline_model(
        proc,
        default_isa(),
        inputs,
        provenance={"seed": args.seed, "inputs": len(inputs)},
    )
    model = refine_model(base, corpus, db, proc, inputs)
    report, converged = validate_model(
        model, corpus, proc, inputs, Fraction(str(args.tolerance))
    )
    save_model(model, args.out)
    accuracy_path = args.accuracy or str(Path(args.out).with_name("accuracy.json"))
    with open(accuracy_path, "w", encoding="utf-8") as f:
        json.dump(accuracy_to_json_dict(report, converged), f, indent=2, sort_keys=True)
        f.write("\n")
    print(
        f"model: {args.out} ({len(model.sequences)} sequences, "
        f"{len(model.baseline)} baseline opcodes); accuracy: {accuracy_path}; "
        f"converged: {converged}"
    )
    return 0 if converged else 1


def cmd_coverage(args) -> int:
    corpus = load_corpus(args.corpus)
    if len(corpus) < 2:
        raise CorpusTooSmall("coverage needs at least 2 projects")
    reports = leave_one_out(corpus, _window_config(args))
    sys.stdout.write(coverage_csv(reports))
    return 0


def cmd_estimate(args) -> int:
    source = Path(args.program).read_text(encoding="utf-8")
    program = parse_program(source, name=Path(args.program).stem)
    model = load_model(args.model)
    ann = None
    if args.annotations:
        with open(args.annotations, encoding="utf-8") as f:
            ann = annotation_from_json_dict(json.load(f))
    cfg = build_cfg(program)
    est = estimate(program, model, ann, cfg)
    doc = estimate_to_json_dict(est, program.name, cfg, args.period)
    sys.stdout.write(render_json(doc))
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    serve(
        model_path=args.model,
        programs_dir=args.programs,
        port=args.port,
        host=args.host,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tribound",
        description="Timing-model generation and 3-valued execution time estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="build a timing model from a training corpus")
    train.add_argument("--corpus", required=True, help="directory of projects")
    train.add_argument("--proc", required=True, help="processor config JSON")
    train.add_argument("--window", type=int, default=8)
    train.add_argument("--stride", type=int, default=4)
    train.add_argument("--mode", choices=["bb", "window"], default="window")
    train.add_argument("--seed", type=int, default=2024)
    train.add_argument("--inputs", type=int, default=32, help="random input states")
    train.add_argument("--tolerance", type=float, default=0.25)
    train.add_argument("--out", default="model.json")
    train.add_argument("--accuracy", default=None, help="accuracy report path")
    train.set_defaults(func=cmd_train)

    coverage = sub.add_parser("coverage", help="leave-one-out recurrence statistics")
    coverage.add_argument("--corpus", required=True)
    coverage.add_argument("--window", type=int, default=8)
    coverage.add_argument("--stride", type=int, default=4)
    coverage.add_argument("--mode", choices=["bb", "window"], default="window")
    coverage.set_defaults(func=cmd_coverage)

    est = sub.add_parser("estimate", help="3-valued estimate for one program")
    est.add_argument("program", help="`.tasm` source file")
    est.add_argument("--model", required=True)
    est.add_argument("--annotations", default=None)
    est.add_argument("--period", type=int, default=None)
    est.set_defaults(func=cmd_estimate)

    serve_p = sub.add_parser("serve", help="HTTP API for the workbench UI")
    serve_p.add_argument("--model", required=True)
    serve_p.add_argument("--programs", required=True, help="directory of `.tasm` files")
    serve_p.add_argument("--port", type=int, default=8321)
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TriboundError as err:
        sys.stderr.write(json.dumps(err.to_json_dict()) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
