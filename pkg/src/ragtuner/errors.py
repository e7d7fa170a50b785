"""Exception hierarchy shared across the package.

Every error raised on purpose derives from :class:`RagTunerError`, which the
CLI maps to exit code 1.
"""

from __future__ import annotations


class RagTunerError(Exception):
    """Base class for domain errors."""


# -- element store ---------------------------------------------------------


class StoreError(RagTunerError):
    pass


class DuplicateDomain(StoreError):
    pass


class MissingDimension(StoreError):
    pass


class UnknownDomain(StoreError):
    pass


class UnknownElement(StoreError):
    pass


class SelfLink(StoreError):
    pass


class DimensionMismatch(StoreError):
    pass


class UnindexedDomain(StoreError):
    pass


class FrozenStore(StoreError):
    """Raised on any write after the store has been frozen for querying."""


class SnapshotError(StoreError):
    pass


# -- orchestration language ------------------------------------------------


class SpecError(RagTunerError):
    pass


class SpecSyntaxError(SpecError):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


class SchemaError(SpecError):
    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
        self.message = message


class DuplicateTunablePath(SchemaError):
    pass


class MissingAssignment(SpecError):
    def __init__(self, path: str):
        super().__init__(f"no value assigned to tunable {path!r}")
        self.path = path


class OutOfBounds(SpecError):
    def __init__(self, path: str, value: object):
        super().__init__(f"value {value!r} is outside the declared range of {path!r}")
        self.path = path
        self.value = value


# -- runtime -----------------------------------------------------------------


class RuntimeFailure(RagTunerError):
    pass


class DuplicateKind(RuntimeFailure):
    pass


class UnknownComponent(RuntimeFailure):
    pass


class UnresolvedTunable(RuntimeFailure):
    pass


class ContractMismatch(RuntimeFailure):
    pass


class DomainAccessViolation(RuntimeFailure):
    pass


class StageFailure(RuntimeFailure):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause!r}")
        self.stage = stage
        self.cause = cause


# -- providers ---------------------------------------------------------------


class ProviderError(RagTunerError):
    def __init__(self, status: int | None, body: str = ""):
        super().__init__(f"provider returned status {status}: {body[:200]}")
        self.status = status
        self.body = body[:200]


class ProviderTimeout(ProviderError):
    def __init__(self, message: str = "request timed out"):
        RagTunerError.__init__(self, message)
        self.status = None
        self.body = ""


class EmptySeeds(RagTunerError):
    pass


class ParseError(RagTunerError):
    """Malformed line in a JSONL input (dataset or trace)."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


# -- evaluation --------------------------------------------------------------


class EvaluationError(RagTunerError):
    pass


class DuplicateQid(EvaluationError):
    pass


class EmptyGold(EvaluationError):
    pass


class MissingQuery(EvaluationError):
    def __init__(self, qid: str):
        super().__init__(f"run has no record for query {qid!r}")
        self.qid = qid


# -- tuner -------------------------------------------------------------------


class IncompatibleTrace(RagTunerError):
    pass


class DegenerateInputs(RagTunerError):
    pass
