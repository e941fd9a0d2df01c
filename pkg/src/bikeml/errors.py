"""Exception types raised across the toolkit.

Every error that callers are expected to catch has its own class so that
the CLI can map failures onto stable exit codes.
"""


class BikemlError(Exception):
    """Base class for all toolkit errors."""


# Domain / state machine

class UnknownStation(BikemlError):
    pass


class BikeNotDocked(BikemlError):
    pass


class BikeNotInTransit(BikemlError):
    pass


class StationFull(BikemlError):
    pass


# Data generation and parsing

class InvalidConfig(BikemlError):
    pass


class MalformedRow(BikemlError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


# Learners

class InsufficientData(BikemlError):
    pass


class NonFiniteLoss(BikemlError):
    pass


class DimensionMismatch(BikemlError):
    pass


class IndexOutOfRange(BikemlError):
    pass


class NegativeComponent(BikemlError):
    pass


class EmptyVector(BikemlError):
    pass


class SingularSystem(BikemlError):
    pass


class SpectralRadiusFailure(BikemlError):
    pass


class UntrainedModel(BikemlError):
    pass


class SchemaMismatch(BikemlError):
    """A model or query document does not match the expected schema."""


# Evaluation

class TooFewSamples(BikemlError):
    pass


class LengthMismatch(BikemlError):
    pass


class UnknownClass(BikemlError):
    pass


# Feature model

class InvalidModel(BikemlError):
    pass


class MissingReport(BikemlError):
    pass


class InvalidWeights(BikemlError):
    pass
