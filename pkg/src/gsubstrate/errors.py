"""Exception hierarchy.

Every error raised on bad data derives from :class:`GSubError`, which the CLI
maps to exit status 1. Each class carries a stable ``code`` string.
"""

from __future__ import annotations


class GSubError(ValueError):
    code = "error"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.details = details

    def __str__(self) -> str:
        msg = super().__str__()
        return msg if msg.startswith(self.code) else f"{self.code}: {msg}"


class InvalidGraphError(GSubError):
    code = "invalid-graph"

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(v.message for v in self.violations))


class UnknownNodeError(GSubError):
    code = "unknown-node"


class PreconditionError(GSubError):
    code = "precondition-violation"


class EmptyGraphError(GSubError):
    code = "empty-graph"


class EmptyCorpusError(GSubError):
    code = "empty-corpus"


class SchemaSyntaxError(GSubError):
    code = "syntax-error"

    def __init__(self, message: str, position, expected: str | None = None):
        self.position = position
        self.expected = expected
        text = f"{message} at {position}"
        if expected:
            text += f" (expected {expected})"
        super().__init__(text)


class SchemaSemanticError(GSubError):
    code = "semantic-error"


class UnrepresentableLabelError(GSubError):
    code = "unrepresentable-label"


class NegativeWeightError(GSubError):
    code = "negative-weight"


class MissingWeightError(GSubError):
    code = "missing-weight"


class NotBipartiteError(GSubError):
    code = "not-bipartite"

    def __init__(self, odd_cycle):
        self.odd_cycle = list(odd_cycle)
        super().__init__("odd cycle " + " - ".join(self.odd_cycle))


class InconsistentPartLabelsError(GSubError):
    code = "inconsistent-part-labels"


class TooLargeError(GSubError):
    code = "too-large"


class NoValidPerturbationError(GSubError):
    code = "no-valid-perturbation"


class UnsampleableQueryError(GSubError):
    code = "unsampleable-query"


class NoComponentLargeEnoughError(GSubError):
    code = "no-component-large-enough"


class NoValidNegativeError(GSubError):
    code = "no-valid-negative"


class EmptyDescriptionError(GSubError):
    code = "empty-description"


class UnknownModalityError(GSubError):
    code = "unknown-modality"


class NoGenerationSourceError(GSubError):
    code = "no-generation-source"


class InvalidScheduleError(GSubError):
    code = "invalid-schedule"


class EmptyGoldCorpusError(GSubError):
    code = "empty-gold-corpus"


class EmptyCandidateCorpusError(GSubError):
    code = "empty-candidate-corpus"


class MalformedPredictionFileError(GSubError):
    code = "malformed-prediction-file"

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class CorpusParseError(GSubError):
    code = "parse-error"

    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class InvalidRecordError(GSubError):
    code = "invalid-record"

    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class ManifestMismatchError(GSubError):
    code = "manifest-mismatch"
