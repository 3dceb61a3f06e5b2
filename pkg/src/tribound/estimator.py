"""Static three-valued execution-time estimation over the CFG.

Block costs come from timing-model lookup; global bounds come from an
implicit-path-enumeration flow problem solved exactly.  WCET maximizes and
BCET minimizes over structural and loop-bound constraints only; ACET
maximizes over the region additionally constrained by typical/atypical
marks, so unannotated code resolves conservatively.

The solver admits exactly the integral flows realizable as one entry->exit
walk: lazy connectivity cuts reject flows whose positive-flow blocks the
entry cannot reach through positive-flow edges (disconnected circulations),
which keeps the optimum identical to exhaustive path enumeration on every
CFG.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .cfg import Cfg, Edge, build_cfg
from .errors import (
    ConflictingMarks,
    Infeasible,
    MalformedAnnotation,
    NonPositivePeriod,
    UnknownLabel,
)
from .ilp import Row, ilp_solve
from .program import Program
from .simproc import TimingTriple
from .timing_model import LookupSegment, TimingModel, fraction_to_decimal, lookup

ENTRY_VAR = "entry"
MAXIMIZE = "maximize"
MINIMIZE = "minimize"


def _exit_var(block_id: int) -> str:
    return f"exit:{block_id}"


# --- costed CFG ---------------------------------------------------------------

@dataclass(frozen=True)
class CostedCfg:
    cfg: Cfg
    block_cost: Mapping[int, TimingTriple]
    decomposition: Mapping[int, tuple[LookupSegment, ...]]


def assign_costs(cfg: Cfg, model: TimingModel) -> CostedCfg:
    """Cost every block via timing-model lookup."""
    costs: dict[int, TimingTriple] = {}
    decomposition: dict[int, tuple[LookupSegment, ...]] = {}
    for block in cfg.blocks:
        segments, triple = lookup(model, block)
        costs[block.id] = triple
        decomposition[block.id] = tuple(segments)
    return CostedCfg(cfg, costs, decomposition)


# --- flow problems --------------------------------------------------------------

@dataclass(frozen=True)
class FlowConstraint:
    target: Edge | int      # an edge variable, or a block's execution count
    relation: str           # "=", "<=" or ">="
    value: int


@dataclass(frozen=True)
class FlowProblem:
    cfg: Cfg
    extra: tuple[FlowConstraint, ...] = ()

    def with_extra(self, more: Sequence[FlowConstraint]) -> "FlowProblem":
        return FlowProblem(self.cfg, self.extra + tuple(more))


@dataclass(frozen=True)
class FlowSolution:
    value: Fraction
    edge_counts: dict[Edge, int]
    block_counts: dict[int, int]


def _unsatisfiable_at_zero(c: FlowConstraint) -> bool:
    """Unreachable targets have count 0; does this constraint reject 0?"""
    if c.relation == "=":
        return c.value != 0
    if c.relation == ">=":
        return c.value > 0
    return c.value < 0  # "<="


class _FlowVars:
    """Variable numbering for one CFG's flow problem (reachable region only)."""

    def __init__(self, cfg: Cfg):
        self.cfg = cfg
        self.reachable = cfg.reachable()
        self.edges = [e for e in cfg.edges if e.src in self.reachable]
        self.exit_blocks = sorted(b for b in cfg.exits if b in self.reachable)
        if not self.exit_blocks:
            raise Infeasible("no exit block is reachable from the entry")
        self.index: dict[object, int] = {}
        for e in self.edges:
            self.index[e] = len(self.index)
        self.index[ENTRY_VAR] = len(self.index)
        for b in self.exit_blocks:
            self.index[_exit_var(b)] = len(self.index)
        self.n = len(self.index)

    def in_vars(self, block_id: int) -> list[int]:
        vs = [self.index[e] for e in self.cfg.predecessors(block_id) if e in self.index]
        if block_id == self.cfg.entry:
            vs.append(self.index[ENTRY_VAR])
        return vs

    def out_vars(self, block_id: int) -> list[int]:
        vs = [self.index[e] for e in self.cfg.successors(block_id)]
        if block_id in self.cfg.exits:
            vs.append(self.index[_exit_var(block_id)])
        return vs

    def structural_rows(self) -> tuple[list[Row], list[Row]]:
        eqs: list[Row] = []
        for b in sorted(self.reachable):
            coeffs: dict[int, Fraction] = {}
            for v in self.in_vars(b):
                coeffs[v] = coeffs.get(v, Fraction(0)) + 1
            for v in self.out_vars(b):
                coeffs[v] = coeffs.get(v, Fraction(0)) - 1
            coeffs = {v: a for v, a in coeffs.items() if a != 0}
            eqs.append((coeffs, Fraction(0)))
        eqs.append(({self.index[ENTRY_VAR]: Fraction(1)}, Fraction(1)))
        eqs.append((
            {self.index[_exit_var(b)]: Fraction(1) for b in self.exit_blocks},
            Fraction(1),
        ))
        les: list[Row] = []
        for e in self.edges:
            bound = self.cfg.loop_bounds.get(e)
            if bound is not None:
                les.append(({self.index[e]: Fraction(1)}, Fraction(bound)))
        return eqs, les

    def constraint_rows(
        self, constraints: Sequence[FlowConstraint]
    ) -> tuple[list[Row], list[Row]]:
        eqs: list[Row] = []
        les: list[Row] = []
        for c in constraints:
            if isinstance(c.target, Edge):
                if c.target not in self.index:
                    if _unsatisfiable_at_zero(c):
                        raise Infeasible(f"constraint on unreachable edge {c.target} cannot hold")
                    continue
                coeffs = {self.index[c.target]: Fraction(1)}
            else:
                if c.target not in self.reachable:
                    if _unsatisfiable_at_zero(c):
                        raise Infeasible(f"constraint on unreachable block {c.target} cannot hold")
                    continue
                coeffs = {v: Fraction(1) for v in self.in_vars(c.target)}
            rhs = Fraction(c.value)
            if c.relation == "=":
                eqs.append((coeffs, rhs))
            elif c.relation == "<=":
                les.append((coeffs, rhs))
            elif c.relation == ">=":
                les.append(({v: -a for v, a in coeffs.items()}, -rhs))
            else:
                raise ValueError(f"unknown relation {c.relation!r}")
        return eqs, les

    def edge_cap(self, e: Edge) -> int:
        bound = self.cfg.loop_bounds.get(e)
        if bound is not None:
            return bound
        return 1 + sum(self.cfg.loop_bounds.values())


def _connectivity_cut(vars_: _FlowVars, stranded: set[int]) -> Row:
    """Valid cut: flow inside a block set needs flow entering it from outside."""
    within = [e for e in vars_.edges if e.src in stranded and e.dst in stranded]
    into = [e for e in vars_.edges if e.src not in stranded and e.dst in stranded]
    big_m = sum(vars_.edge_cap(e) for e in within)
    coeffs: dict[int, Fraction] = {}
    for e in within:
        coeffs[vars_.index[e]] = coeffs.get(vars_.index[e], Fraction(0)) + 1
    for e in into:
        coeffs[vars_.index[e]] = coeffs.get(vars_.index[e], Fraction(0)) - big_m
    return (coeffs, Fraction(0))


def solve_flow(
    problem: FlowProblem,
    costs: Mapping[int, int | Fraction],
    sense: str = MAXIMIZE,
) -> FlowSolution:
    """Exact optimum of sum(cost[block] * exec count) over execution flows."""
    if sense not in (MAXIMIZE, MINIMIZE):
        raise ValueError(f"unknown sense {sense!r}")
    vars_ = _FlowVars(problem.cfg)
    eqs, les = vars_.structural_rows()
    extra_eqs, extra_les = vars_.constraint_rows(problem.extra)
    eqs += extra_eqs
    les += extra_les

    objective: dict[int, Fraction] = {}
    for e in vars_.edges:
        idx = vars_.index[e]
        objective[idx] = objective.get(idx, Fraction(0)) + Fraction(costs[e.dst])
    objective[vars_.index[ENTRY_VAR]] = Fraction(costs[problem.cfg.entry])

    cuts: list[Row] = []
    while True:
        res = ilp_solve(vars_.n, objective, eqs, les + cuts, maximize=(sense == MAXIMIZE))
        edge_counts = {
            e: int(res.x[vars_.index[e]]) for e in vars_.edges if res.x[vars_.index[e]] != 0
        }
        block_counts = {
            b: int(sum(res.x[v] for v in vars_.in_vars(b))) for b in vars_.reachable
        }
        reached = {problem.cfg.entry}
        todo = [problem.cfg.entry]
        while todo:
            for e in problem.cfg.successors(todo.pop()):
                if edge_counts.get(e, 0) > 0 and e.dst not in reached:
                    reached.add(e.dst)
                    todo.append(e.dst)
        stranded = {b for b, count in block_counts.items() if count > 0} - reached
        if not stranded:
            return FlowSolution(res.value, edge_counts, block_counts)
        cuts.append(_connectivity_cut(vars_, stranded))


# --- annotations -----------------------------------------------------------------

TYPICAL = "typical"
ATYPICAL = "atypical"


@dataclass(frozen=True)
class Region:
    mark: str                       # TYPICAL or ATYPICAL
    label: str | None = None
    span: tuple[int, int] | None = None  # inclusive address range
    frequency: int | None = None

    def __post_init__(self):
        if self.mark not in (TYPICAL, ATYPICAL):
            raise MalformedAnnotation(f"unknown mark {self.mark!r}")
        if (self.label is None) == (self.span is None):
            raise MalformedAnnotation("region needs exactly one of label or range")
        if self.frequency is not None and self.frequency < 0:
            raise MalformedAnnotation("frequency must be >= 0")


@dataclass(frozen=True)
class Annotation:
    regions: tuple[Region, ...] = ()
    auto_predicates: tuple[str, ...] = ()

    @staticmethod
    def empty() -> "Annotation":
        return Annotation()


def annotation_from_json_dict(doc: dict) -> Annotation:
    regions = []
    for r in doc.get("regions", []):
        span = tuple(r["range"]) if "range" in r else None
        regions.append(
            Region(
                mark=r["mark"],
                label=r.get("label"),
                span=span,
                frequency=r.get("frequency"),
            )
        )
    return Annotation(tuple(regions), tuple(doc.get("autoPredicates", [])))


def annotation_to_json_dict(ann: Annotation) -> dict:
    regions = []
    for r in ann.regions:
        d: dict = {"mark": r.mark}
        if r.label is not None:
            d["label"] = r.label
        if r.span is not None:
            d["range"] = list(r.span)
        if r.frequency is not None:
            d["frequency"] = r.frequency
        regions.append(d)
    return {"regions": regions, "autoPredicates": list(ann.auto_predicates)}


def _region_blocks(region: Region, cfg: Cfg) -> list[int]:
    if region.label is not None:
        block = cfg.block_of_label(region.label)
        if block is None:
            raise UnknownLabel(f"no block labeled {region.label!r}")
        return [block.id]
    lo, hi = region.span
    ids = [
        b.id
        for b in cfg.blocks
        if any(lo <= instr.address <= hi for instr in b.instructions)
    ]
    if not ids:
        raise UnknownLabel(f"address range {region.span} covers no block")
    return ids


def translate_annotations(ann: Annotation, cfg: Cfg) -> list[FlowConstraint]:
    """Turn typical/atypical marks and auto predicates into flow constraints.

    typical(f) pins a block's execution count to f (default 1); atypical
    pins it to 0; an auto predicate zeroes the taken edge of its guard block.
    """
    forced: dict[int, int] = {}
    marks: dict[int, str] = {}
    for region in ann.regions:
        freq = region.frequency
        if freq is None:
            freq = 1 if region.mark == TYPICAL else 0
        if region.mark == ATYPICAL and freq != 0:
            raise MalformedAnnotation("atypical regions cannot carry a frequency")
        for block_id in _region_blocks(region, cfg):
            if block_id in forced and (forced[block_id] != freq or marks[block_id] != region.mark):
                raise ConflictingMarks(
                    f"block {block_id} marked {marks[block_id]}({forced[block_id]}) "
                    f"and {region.mark}({freq})"
                )
            forced[block_id] = freq
            marks[block_id] = region.mark

    constraints = [
        FlowConstraint(block_id, "=", freq) for block_id, freq in sorted(forced.items())
    ]

    for label in ann.auto_predicates:
        block = cfg.block_of_label(label)
        if block is None:
            raise UnknownLabel(f"auto predicate names unknown label {label!r}")
        successors = cfg.successors(block.id)
        taken = [e for e in successors if e.kind == "taken"]
        if len(successors) != 2 or len(taken) != 1:
            raise MalformedAnnotation(
                f"auto predicate {label!r} must name a block ending in a conditional branch"
            )
        constraints.append(FlowConstraint(taken[0], "=", 0))
    return constraints


# --- three-valued estimation --------------------------------------------------------

@dataclass(frozen=True)
class ThreeValuedEstimate:
    bcet: int
    acet: Fraction
    wcet: int
    block_costs: Mapping[int, TimingTriple]
    block_counts: Mapping[int, dict]        # id -> {"bcet": n, "acet": n, "wcet": n}
    best_flow: Mapping[Edge, int]
    typical_flow: Mapping[Edge, int]
    worst_flow: Mapping[Edge, int]

    def contribution(self, block_id: int) -> dict:
        cost = self.block_costs[block_id]
        counts = self.block_counts[block_id]
        return {
            "bcet": cost.bcet * counts["bcet"],
            "acet": cost.acet * counts["acet"],
            "wcet": cost.wcet * counts["wcet"],
        }


def estimate_from_costs(
    cfg: Cfg,
    block_costs: Mapping[int, TimingTriple],
    ann: Annotation | None = None,
) -> ThreeValuedEstimate:
    """Solve the three bound problems for explicitly given block cost triples."""
    problem = FlowProblem(cfg)
    wcet = solve_flow(problem, {b: t.wcet for b, t in block_costs.items()}, MAXIMIZE)
    bcet = solve_flow(problem, {b: t.bcet for b, t in block_costs.items()}, MINIMIZE)
    acet_problem = problem
    extra: list[FlowConstraint] = []
    if ann is not None:
        extra = translate_annotations(ann, cfg)
        acet_problem = problem.with_extra(extra)
    try:
        acet = solve_flow(acet_problem, {b: t.acet for b, t in block_costs.items()}, MAXIMIZE)
    except Infeasible as err:
        if not extra:
            raise
        listing = "; ".join(f"{c.target} {c.relation} {c.value}" for c in extra)
        raise Infeasible(
            f"annotations contradict the program structure ({err}); "
            f"active constraints: {listing}"
        ) from err

    counts = {
        b.id: {
            "bcet": bcet.block_counts.get(b.id, 0),
            "acet": acet.block_counts.get(b.id, 0),
            "wcet": wcet.block_counts.get(b.id, 0),
        }
        for b in cfg.blocks
    }
    return ThreeValuedEstimate(
        bcet=int(bcet.value),
        acet=acet.value,
        wcet=int(wcet.value),
        block_costs=dict(block_costs),
        block_counts=counts,
        best_flow=bcet.edge_counts,
        typical_flow=acet.edge_counts,
        worst_flow=wcet.edge_counts,
    )


def estimate(
    program: Program,
    model: TimingModel,
    ann: Annotation | None = None,
    cfg: Cfg | None = None,
) -> ThreeValuedEstimate:
    """Full pipeline: lookup block costs, then solve the three bound problems."""
    cfg = cfg or build_cfg(program)
    costed = assign_costs(cfg, model)
    return estimate_from_costs(cfg, costed.block_cost, ann)


def compute_load(estimate: ThreeValuedEstimate, period: int, which: str = "wcet") -> Fraction:
    """Device load: chosen execution time over the cyclic activation period."""
    if period <= 0:
        raise NonPositivePeriod(f"period must be positive, got {period}")
    value = {"bcet": Fraction(estimate.bcet), "acet": estimate.acet, "wcet": Fraction(estimate.wcet)}[which]
    return value / period


# --- JSON rendering (shared by CLI and service) ----------------------------------

def _flow_json(flow: Mapping[Edge, int]) -> dict:
    return {str(e): n for e, n in sorted(flow.items(), key=lambda kv: str(kv[0]))}


def estimate_to_json_dict(
    est: ThreeValuedEstimate,
    program_name: str,
    cfg: Cfg,
    period: int | None = None,
) -> dict:
    blocks = []
    for b in cfg.blocks:
        cost = est.block_costs[b.id]
        contribution = est.contribution(b.id)
        blocks.append(
            {
                "id": b.id,
                "label": b.label,
                "start": b.start(),
                "size": b.size(),
                "cost": {
                    "bcet": cost.bcet,
                    "acet": fraction_to_decimal(cost.acet, 2, fixed=True),
                    "wcet": cost.wcet,
                },
                "counts": dict(est.block_counts[b.id]),
                "contribution": {
                    "bcet": contribution["bcet"],
                    "acet": fraction_to_decimal(contribution["acet"], 2, fixed=True),
                    "wcet": contribution["wcet"],
                },
            }
        )
    doc = {
        "program": program_name,
        "bcet": est.bcet,
        "acet": fraction_to_decimal(est.acet, 2, fixed=True),
        "wcet": est.wcet,
        "blocks": blocks,
        "witnesses": {
            "bcet": _flow_json(est.best_flow),
            "acet": _flow_json(est.typical_flow),
            "wcet": _flow_json(est.worst_flow),
        },
    }
    if period is not None:
        doc["period"] = period
        doc["load"] = {
            which: fraction_to_decimal(compute_load(est, period, which), 6, fixed=True)
            for which in ("bcet", "acet", "wcet")
        }
    return doc


def render_json(doc: dict) -> str:
    """Canonical rendering so CLI and service emit byte-identical payloads."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
