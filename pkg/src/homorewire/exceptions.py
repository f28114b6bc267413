"""Exception and warning types raised across the package."""


class HomorewireError(Exception):
    """Base class for domain errors."""


class ParseError(HomorewireError):
    def __init__(self, line, column, reason, path=None):
        self.line = line
        self.column = column
        self.reason = reason
        self.path = path
        where = f"{path}:" if path else ""
        super().__init__(f"{where}line {line}, column {column!r}: {reason}")


class ReferentialError(HomorewireError):
    pass


class ConflictingNodeRow(HomorewireError):
    pass


class UnknownEndpoint(HomorewireError):
    pass


class DuplicateNodeId(HomorewireError):
    pass


class NonPositiveWeight(HomorewireError):
    pass


class UnknownNode(HomorewireError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown node"


class InsufficientData(HomorewireError):
    pass


class NotRewirable(HomorewireError):
    pass


class EmptyView(HomorewireError):
    pass


class InsufficientEnsemble(HomorewireError):
    pass


class EmptySourceGroup(HomorewireError):
    pass


class InsufficientPriceData(HomorewireError):
    pass


class NoMatchablePairs(HomorewireError):
    pass


class NoKnownRaceStays(HomorewireError):
    pass


class InvalidSpec(HomorewireError, ValueError):
    pass


class HomorewireWarning(UserWarning):
    pass


class DegenerateBins(HomorewireWarning):
    pass


class NotConverged(HomorewireWarning):
    pass


class DegenerateTerciles(HomorewireWarning):
    pass


class DegenerateDifferences(HomorewireWarning):
    pass


class DegenerateVariance(HomorewireWarning):
    pass


class EmptyViewWarning(HomorewireWarning):
    pass


class EmptyDatasetWarning(HomorewireWarning):
    pass
