"""tribound: three-valued (BCET/ACET/WCET) execution-time estimation.

Builds a processor timing model from recurring opcode sequences found in
training programs, then statically bounds new programs via exact implicit
path enumeration, with user-marked typical paths steering the ACET.
"""

from .cfg import BasicBlock, Cfg, Edge, ProgramPath, build_cfg, enumerate_paths
from .errors import TriboundError
from .estimator import (
    Annotation,
    CostedCfg,
    FlowConstraint,
    FlowProblem,
    Region,
    ThreeValuedEstimate,
    assign_costs,
    compute_load,
    estimate,
    estimate_from_costs,
    solve_flow,
    translate_annotations,
)
from .fingerprint import (
    SequenceDigest,
    WindowConfig,
    block_digest,
    digest,
    digests_for_block,
    serialize_opcodes,
    window_digests,
)
from .isa import DEFAULT_ISA, IsaTable, default_isa
from .patterndb import (
    CoverageReport,
    PatternDb,
    Project,
    build_db,
    coverage_report,
    leave_one_out,
    match_project,
)
from .program import Instruction, Program, format_program, parse_program
from .simproc import (
    InputSpec,
    MachineState,
    MemoryConfig,
    ProcessorConfig,
    TimingTriple,
    Trace,
    campaign_inputs,
    generate_inputs,
    measure_sequence,
    simulate_program,
)
from .timing_model import (
    AccuracyReport,
    TimingModel,
    baseline_model,
    lookup,
    refine_model,
    validate_model,
)

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "AccuracyReport",
    "BasicBlock",
    "Cfg",
    "CostedCfg",
    "CoverageReport",
    "DEFAULT_ISA",
    "Edge",
    "FlowConstraint",
    "FlowProblem",
    "InputSpec",
    "Instruction",
    "IsaTable",
    "MachineState",
    "MemoryConfig",
    "PatternDb",
    "ProcessorConfig",
    "Program",
    "ProgramPath",
    "Project",
    "Region",
    "SequenceDigest",
    "ThreeValuedEstimate",
    "TimingModel",
    "TimingTriple",
    "Trace",
    "TriboundError",
    "WindowConfig",
    "assign_costs",
    "baseline_model",
    "block_digest",
    "build_cfg",
    "build_db",
    "campaign_inputs",
    "compute_load",
    "coverage_report",
    "default_isa",
    "digest",
    "digests_for_block",
    "enumerate_paths",
    "estimate",
    "estimate_from_costs",
    "format_program",
    "generate_inputs",
    "leave_one_out",
    "lookup",
    "match_project",
    "measure_sequence",
    "parse_program",
    "refine_model",
    "serialize_opcodes",
    "simulate_program",
    "solve_flow",
    "translate_annotations",
    "validate_model",
    "window_digests",
]
