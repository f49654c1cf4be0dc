"""Exception hierarchy.

Errors fall into two families so the CLI can map them onto exit codes:
``DataError`` (bad input files, schemas, encodings, splits) and
``TrainingError`` (anything raised while fitting a model).
"""


class CCRALError(Exception):
    """Base class for all package errors."""


class DataError(CCRALError, ValueError):
    pass


class TrainingError(CCRALError, RuntimeError):
    pass


class SchemaError(DataError):
    pass


class UnknownKind(SchemaError):
    pass


class FileUnreadable(DataError):
    pass


class HeaderMismatch(DataError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__(f"columns missing from header: {', '.join(self.missing)}")


class EmptyTable(DataError):
    pass


class ConstantTreatment(DataError):
    pass


class LayoutMismatch(DataError):
    pass


class InfeasibleSplit(DataError):
    pass


class MalformedReport(DataError):
    pass


class DimensionMismatch(CCRALError, ValueError):
    pass


class NonBinaryTreatmentValue(CCRALError, ValueError):
    pass


class MatchingInfeasible(TrainingError):
    pass


class SingleClassTraining(TrainingError):
    pass


class DivergedLoss(TrainingError):
    pass


class AlphaOutOfRange(CCRALError, ValueError):
    pass


class LengthMismatch(CCRALError, ValueError):
    pass


class EmptyInput(CCRALError, ValueError):
    pass


class SingleClassInput(CCRALError, ValueError):
    pass


class PartialFailure(CCRALError):
    """Some experiment repeats failed; ``errors`` maps repeat index to message."""

    def __init__(self, errors, report=None):
        self.errors = dict(errors)
        self.report = report
        super().__init__(f"{len(self.errors)} repeat(s) failed")
