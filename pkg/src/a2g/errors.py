"""Exception hierarchy shared by all a2g modules."""


class A2GError(ValueError):
    """Base class for validation-type failures (CLI exit status 1)."""


# urbgen
class NonPositiveStreet(A2GError):
    pass


class CellOverflow(A2GError):
    pass


class PlacementExhausted(A2GError):
    pass


class HighwayTooLarge(A2GError):
    pass


# geomlos
class DegenerateLink(A2GError):
    pass


class EndpointInsideBuilding(A2GError):
    pass


class EmptyDataset(A2GError):
    pass


# plosmod / lsfmod tables
class UnknownCombination(A2GError):
    pass


class InsufficientBins(A2GError):
    pass


class NonConvergence(A2GError):
    pass


class HeightOutOfRange(A2GError):
    pass


# extract
class InsufficientSpread(A2GError):
    pass


class TooFewSamples(A2GError):
    pass


# validate
class EmptyInput(A2GError):
    pass


class GridMismatch(A2GError):
    pass


class MissingPathloss(A2GError):
    pass
