"""Exception hierarchy shared across the toolkit.

Every error carries a stable ``code`` (its class name) so the CLI and the
HTTP service can render machine-readable payloads without string matching.
"""

from __future__ import annotations


class TriboundError(Exception):
    """Base class for all toolkit errors."""

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_json_dict(self) -> dict:
        return {"error": self.code, "detail": str(self)}


# --- parsing -------------------------------------------------------------

class ParseError(TriboundError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownOpcode(ParseError):
    pass


class ArityMismatch(ParseError):
    pass


class UnknownOperand(ParseError):
    pass


class DuplicateLabel(ParseError):
    pass


class DanglingBranchTarget(ParseError):
    pass


class MalformedDirective(ParseError):
    pass


# --- control flow --------------------------------------------------------

class UnstructuredFlow(TriboundError):
    pass


class UnboundedCycle(TriboundError):
    def __init__(self, edge):
        self.edge = edge
        super().__init__(f"cycle through edge {edge} carries no loop bound")


class PathLimitExceeded(TriboundError):
    pass


# --- pattern database ----------------------------------------------------

class EmptyCorpus(TriboundError):
    pass


class CorpusTooSmall(TriboundError):
    pass


class GranularityMismatch(TriboundError):
    pass


# --- simulation ----------------------------------------------------------

class FuelExhausted(TriboundError):
    pass


class InvalidMemoryAccess(TriboundError):
    pass


class EmptyRange(TriboundError):
    pass


class NoValidObservations(TriboundError):
    pass


class SequenceShapeError(TriboundError):
    """Sequence handed to the measurement rig breaks the one-trailing-branch rule."""


class UnknownSemantics(TriboundError):
    """Mnemonic parses under the ISA table but the simulator has no semantics for it."""


# --- flow solving --------------------------------------------------------

class Infeasible(TriboundError):
    pass


class Unbounded(TriboundError):
    pass


# --- annotations ---------------------------------------------------------

class UnknownLabel(TriboundError):
    pass


class ConflictingMarks(TriboundError):
    pass


class MalformedAnnotation(TriboundError):
    pass


class NonPositivePeriod(TriboundError):
    pass
