"""Domain exceptions shared across the engine."""

from __future__ import annotations


class PervadiaError(Exception):
    """Base class for all engine errors."""


class UnknownEntityError(PervadiaError):
    pass


class UnknownParentError(PervadiaError):
    pass


class InvalidKindPlacementError(PervadiaError):
    pass


class PermissionDeniedError(PervadiaError):
    pass


class TimeRegressionError(PervadiaError):
    pass


class NoFixYetError(PervadiaError):
    pass


class MalformedRegionError(PervadiaError):
    pass


class CorruptSnapshotError(PervadiaError):
    pass


class JournalGapError(PervadiaError):
    pass


class UnboundSessionError(PervadiaError):
    pass


class TimeReconciliationError(PervadiaError):
    pass


class UnknownActuatorError(PervadiaError):
    pass


class UnknownThingError(PervadiaError):
    pass


class UnsupportedCommandError(PervadiaError):
    pass


class AuthFailedError(PervadiaError):
    pass


class ProtocolError(PervadiaError):
    pass


class ParseError(PervadiaError):
    """Rule or protocol text that does not parse; carries line/column."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class RuleCycleError(PervadiaError):
    pass


class UnknownViewError(PervadiaError):
    pass


class InvalidScenarioError(PervadiaError):
    pass
