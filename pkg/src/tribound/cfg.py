"""Basic-block decomposition, control-flow graph and path enumeration.

Blocks are maximal straight-line runs: a label starts a block, a branch or
return ends one.  Loop bounds are absolute per-run caps on designated edges.
The exhaustive path enumerator is the testing oracle for the flow solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import MalformedDirective, PathLimitExceeded, UnboundedCycle, UnstructuredFlow
from .isa import BRANCH_COND, BRANCH_UNCOND, RETURN
from .program import Instruction, Program, Target

FALLTHROUGH = "fallthrough"
TAKEN = "taken"


@dataclass(frozen=True)
class BasicBlock:
    id: int
    label: str | None
    instructions: tuple[Instruction, ...]

    def size(self) -> int:
        return len(self.instructions)

    def start(self) -> int:
        return self.instructions[0].address

    def opcode_sequence(self) -> tuple[str, ...]:
        return tuple(i.opcode for i in self.instructions)


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    kind: str  # FALLTHROUGH or TAKEN

    def __str__(self) -> str:
        return f"{self.src}->{self.dst}:{self.kind}"


@dataclass(frozen=True)
class Cfg:
    blocks: tuple[BasicBlock, ...]
    edges: tuple[Edge, ...]
    entry: int
    exits: frozenset[int]
    loop_bounds: dict[Edge, int]
    warnings: tuple[str, ...] = ()
    _succ: dict[int, tuple[Edge, ...]] = field(default_factory=dict, repr=False)
    _pred: dict[int, tuple[Edge, ...]] = field(default_factory=dict, repr=False)

    def successors(self, block_id: int) -> tuple[Edge, ...]:
        return self._succ.get(block_id, ())

    def predecessors(self, block_id: int) -> tuple[Edge, ...]:
        return self._pred.get(block_id, ())

    def block_of_label(self, label: str) -> BasicBlock | None:
        for b in self.blocks:
            if b.label == label:
                return b
        return None

    def block_at(self, address: int) -> BasicBlock:
        for b in self.blocks:
            if b.start() <= address < b.start() + b.size():
                return b
        raise KeyError(address)

    def reachable(self) -> frozenset[int]:
        seen = {self.entry}
        todo = [self.entry]
        while todo:
            for e in self.successors(todo.pop()):
                if e.dst not in seen:
                    seen.add(e.dst)
                    todo.append(e.dst)
        return frozenset(seen)


@dataclass(frozen=True)
class ProgramPath:
    block_sequence: tuple[int, ...]
    edge_counts: dict[Edge, int]

    def cost(self, block_cost) -> int:
        """Total of per-block costs over the visit sequence; block_cost maps id -> value."""
        return sum(block_cost[b] for b in self.block_sequence)


def _block_class(program: Program, instr: Instruction) -> str:
    return program.isa.klass(instr.opcode)


def build_cfg(program: Program) -> Cfg:
    """Partition instructions into blocks and wire fallthrough/taken edges."""
    if not program.instructions:
        raise UnstructuredFlow("empty program has no control flow")

    isa = program.isa
    leaders = {0}
    for instr in program.instructions:
        if instr.label is not None:
            leaders.add(instr.address)
        if isa.klass(instr.opcode) in (BRANCH_COND, BRANCH_UNCOND, RETURN):
            if instr.address + 1 < len(program.instructions):
                leaders.add(instr.address + 1)

    starts = sorted(leaders)
    blocks: list[BasicBlock] = []
    for i, start in enumerate(starts):
        end = starts[i + 1] if i + 1 < len(starts) else len(program.instructions)
        instrs = program.instructions[start:end]
        blocks.append(BasicBlock(i, instrs[0].label, instrs))

    block_of_addr = {b.start(): b.id for b in blocks}

    edges: list[Edge] = []
    exits: set[int] = set()
    for b in blocks:
        last = b.instructions[-1]
        klass = isa.klass(last.opcode)
        if klass == RETURN:
            exits.add(b.id)
            continue
        if klass in (BRANCH_COND, BRANCH_UNCOND):
            target = next(op for op in last.operands if isinstance(op, Target))
            edges.append(Edge(b.id, block_of_addr[program.labels[target.label]], TAKEN))
            if klass == BRANCH_UNCOND:
                continue
        # fallthrough (straight-line block or the not-taken side of a bc)
        if b.id + 1 >= len(blocks):
            raise UnstructuredFlow(
                f"block {b.id} falls through past the end of the program"
            )
        edges.append(Edge(b.id, b.id + 1, FALLTHROUGH))

    succ: dict[int, list[Edge]] = {}
    pred: dict[int, list[Edge]] = {}
    for e in edges:
        succ.setdefault(e.src, []).append(e)
        pred.setdefault(e.dst, []).append(e)

    entry = 0
    if program.entry_label is not None:
        entry = block_of_addr[program.labels[program.entry_label]]
    if pred.get(entry):
        raise UnstructuredFlow(
            f"entry block {entry} has predecessors; pick a predecessor-free .entry"
        )

    cfg = Cfg(
        blocks=tuple(blocks),
        edges=tuple(edges),
        entry=entry,
        exits=frozenset(exits),
        loop_bounds={},
        _succ={k: tuple(v) for k, v in succ.items()},
        _pred={k: tuple(v) for k, v in pred.items()},
    )

    reachable = cfg.reachable()
    warnings = tuple(
        f"UnreachableBlock({b.id})" for b in blocks if b.id not in reachable
    )

    loop_bounds: dict[Edge, int] = {}
    for lb in program.loop_bounds:
        target_block = block_of_addr[program.labels[lb.label]]
        in_loop = [
            e for e in cfg.predecessors(target_block)
            if _reaches(cfg, target_block, e.src)
        ]
        if not in_loop:
            raise MalformedDirective(
                f".loopbound {lb.label}: no in-loop edge enters that block", lb.line
            )
        for e in in_loop:
            loop_bounds[e] = lb.bound

    return Cfg(
        blocks=cfg.blocks,
        edges=cfg.edges,
        entry=cfg.entry,
        exits=cfg.exits,
        loop_bounds=loop_bounds,
        warnings=warnings,
        _succ=cfg._succ,
        _pred=cfg._pred,
    )


def _reaches(cfg: Cfg, src: int, dst: int) -> bool:
    seen = {src}
    todo = [src]
    while todo:
        for e in cfg.successors(todo.pop()):
            if e.dst == dst:
                return True
            if e.dst not in seen:
                seen.add(e.dst)
                todo.append(e.dst)
    return False


def check_bounded(cfg: Cfg) -> None:
    """Raise UnboundedCycle if some reachable cycle has no bounded edge."""
    reachable = cfg.reachable()
    free = {}
    for e in cfg.edges:
        if e.src in reachable and e not in cfg.loop_bounds:
            free.setdefault(e.src, []).append(e)
    # cycle detection over unbounded edges only
    WHITE, GREY, BLACK = 0, 1, 2
    color = {b: WHITE for b in reachable}
    for root in sorted(reachable):
        if color[root] != WHITE:
            continue
        stack: list[tuple[int, int]] = [(root, 0)]
        color[root] = GREY
        while stack:
            node, i = stack[-1]
            out = free.get(node, [])
            if i < len(out):
                stack[-1] = (node, i + 1)
                e = out[i]
                if color.get(e.dst, BLACK) == GREY:
                    raise UnboundedCycle(e)
                if color.get(e.dst, BLACK) == WHITE:
                    color[e.dst] = GREY
                    stack.append((e.dst, 0))
            else:
                color[node] = BLACK
                stack.pop()


def enumerate_paths(cfg: Cfg, max_paths: int = 100_000) -> list[ProgramPath]:
    """Exhaustively list every bound-respecting entry->exit path.

    The oracle for the flow solver; raises PathLimitExceeded past max_paths
    and UnboundedCycle when a cycle carries no bound.
    """
    check_bounded(cfg)
    paths: list[ProgramPath] = []
    counts: dict[Edge, int] = {}
    sequence: list[int] = [cfg.entry]

    def visit(block: int) -> None:
        if block in cfg.exits:
            paths.append(ProgramPath(tuple(sequence), dict(counts)))
            if len(paths) > max_paths:
                raise PathLimitExceeded(f"more than {max_paths} paths")
            return
        for e in cfg.successors(block):
            bound = cfg.loop_bounds.get(e)
            if bound is not None and counts.get(e, 0) >= bound:
                continue
            counts[e] = counts.get(e, 0) + 1
            sequence.append(e.dst)
            visit(e.dst)
            sequence.pop()
            counts[e] -= 1
            if counts[e] == 0:
                del counts[e]

    visit(cfg.entry)
    return paths
