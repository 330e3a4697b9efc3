"""Exception types shared across the package."""


class EigenpowerError(Exception):
    """Base class for all structured errors raised by this package."""


class ShapeError(EigenpowerError):
    """Dimension, arity or width mismatch."""


class DegeneracyError(EigenpowerError):
    """A norm or inner product that must be positive collapsed to (near) zero."""


class SolverDivergedError(EigenpowerError):
    """Training produced a non-finite loss; carries the records seen so far."""

    def __init__(self, message, epoch, records):
        super().__init__(message)
        self.epoch = epoch
        self.records = records


class ConfigError(EigenpowerError):
    """Invalid experiment configuration; carries every violation found."""

    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = list(violations)
