"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class RefagentError(Exception):
    """Base class for all engine-domain errors."""


class ParseError(RefagentError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class DuplicateType(RefagentError):
    def __init__(self, fqn: str):
        super().__init__(f"duplicate type declaration: {fqn}")
        self.fqn = fqn


class UnknownType(RefagentError):
    def __init__(self, fqn: str):
        super().__init__(f"unknown type: {fqn}")
        self.fqn = fqn


class TargetOverBudget(RefagentError):
    def __init__(self, fqn: str, estimated: int, budget: int):
        super().__init__(
            f"{fqn} estimated at {estimated} tokens exceeds budget {budget}"
        )
        self.fqn = fqn
        self.estimated = estimated
        self.budget = budget


class UndefinedRate(RefagentError):
    """Raised when a rate denominator is zero."""


class UnknownMetricName(RefagentError):
    def __init__(self, name: str):
        super().__init__(f"coefficient references unknown metric: {name}")
        self.name = name


class BackendError(RefagentError):
    def __init__(self, status: int, body: str):
        super().__init__(f"backend failure (status {status}): {body[:200]}")
        self.status = status
        self.body = body


class PlaybookExhausted(RefagentError):
    pass


class ReplayMiss(RefagentError):
    def __init__(self, digest: str):
        super().__init__(f"no recorded response for request digest {digest}")
        self.digest = digest


class NoCodeBlock(RefagentError):
    pass


class PlanParseError(RefagentError):
    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ToolError(RefagentError):
    def __init__(self, exit_detail: str):
        super().__init__(exit_detail)
        self.exit_detail = exit_detail


class GeneratorUnavailable(RefagentError):
    pass


class SchemaError(RefagentError):
    def __init__(self, path: str, detail: str):
        super().__init__(f"{path}: {detail}")
        self.path = path
        self.detail = detail


class MissingRange(RefagentError):
    pass


class ArityMismatch(RefagentError):
    pass


class AllZeroDifferences(RefagentError):
    pass


class BaselineFailure(RefagentError):
    pass


class IncompleteJournal(RefagentError):
    pass
