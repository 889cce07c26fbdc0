"""
Exception hierarchy for the multHP toolkit
"""

from typing import Iterable, Optional


class MultHPError(Exception):
    """Base class for all toolkit errors"""

    category = "error"


class ValidationError(MultHPError):
    """Input values violate a documented constraint"""

    category = "validation"


class InvalidArgumentError(ValidationError, ValueError):
    """An argument is outside its documented range"""


class AnnotationValidationError(ValidationError):
    """Span annotations are out of bounds or overlap"""

    def __init__(self, message: str, offenders: Optional[Iterable] = None):
        self.offenders = list(offenders or [])
        if self.offenders:
            listed = ", ".join(str(o) for o in self.offenders)
            message = f"{message}: {listed}"
        super().__init__(message)


class LabelValidationError(ValidationError):
    """An external path-type label is not bridge or comparison"""


class PolicyValidationError(ValidationError):
    """A budget policy is malformed"""


class ConfigError(ValidationError):
    """Run configuration is invalid or references missing files"""


class CorpusIngestionError(MultHPError):
    """A document cannot be ingested into the index"""

    category = "ingestion"


class EmptyIndexError(MultHPError):
    """Probability requested from an index with no documents"""

    category = "index"


class IndexFormatError(MultHPError):
    """Index file is truncated or corrupt"""

    category = "index"


class IndexVersionError(IndexFormatError):
    """Index file carries an unsupported format version"""


class ImportFormatError(MultHPError):
    """A dataset file could not be parsed"""

    category = "input"

    def __init__(self, path: str, reason: str, line: Optional[int] = None,
                 column: Optional[int] = None, offset: Optional[int] = None):
        self.path = path
        self.line = line
        self.column = column
        self.offset = offset
        where = ""
        if line is not None:
            where = f" at line {line}, column {column} (offset {offset})"
        super().__init__(f"cannot parse {path}{where}: {reason}")


class SchemaError(MultHPError):
    """A JSON-lines record does not follow the expected schema"""

    category = "input"

    def __init__(self, path: str, line: int, reason: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {reason}")


class AlignmentError(MultHPError):
    """Scores and runs do not cover the same questions"""

    category = "alignment"


class UndefinedCorrelationError(MultHPError):
    """A correlation coefficient is undefined for the given vectors"""

    category = "metric"

    def __init__(self, metric: str, reason: str):
        self.metric = metric
        super().__init__(f"{metric} is undefined: {reason}")


EXIT_CODES = {
    "validation": 3,
    "input": 4,
    "ingestion": 4,
    "index": 5,
    "alignment": 6,
    "metric": 7,
}


def exit_code_for(error: BaseException) -> int:
    """Map an error to the CLI exit code of its category"""
    return EXIT_CODES.get(getattr(error, "category", ""), 1)
