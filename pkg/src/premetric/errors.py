"""Exception hierarchy shared by every module."""


class PreMetricError(ValueError):
    """Base class for invalid inputs and failed constructions."""


class MalformedInput(PreMetricError):
    pass


class AsymmetricInput(PreMetricError):
    pass


class NegativeEntry(PreMetricError):
    pass


class NonzeroDiagonal(PreMetricError):
    pass


class AllZero(PreMetricError):
    pass


class PointSetMismatch(PreMetricError):
    pass


class InvalidGroup(PreMetricError):
    """A multiplication table that fails a group axiom.

    ``witness`` holds the offending indices (row, triple, ...).
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class DegenerateMetric(PreMetricError):
    pass


class NotATDFunction(PreMetricError):
    """The deficiency profile cannot be corrected at the attempted resolution.

    Attributes
    ----------
    level : int or None
        Dyadic level at which the construction (or the pre-flight check) broke.
    witness : dict
        JSON-ready description of the failure.
    partial : dict or None
        The sequence built so far, keyed by ``"k/2^n"`` strings.
    """

    def __init__(self, message, level=None, witness=None, partial=None):
        super().__init__(message)
        self.level = level
        self.witness = witness or {}
        self.partial = partial
