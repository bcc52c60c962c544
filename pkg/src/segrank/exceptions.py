"""Exception hierarchy shared by every segrank module."""


class SegRankError(Exception):
    """Base class for all errors raised by segrank."""


# volume I/O

class NiftiError(SegRankError, ValueError):
    pass


class BadMagic(NiftiError):
    pass


class UnsupportedDatatype(NiftiError):
    pass


class NonIntegralLabels(NiftiError):
    pass


class TruncatedStream(NiftiError):
    pass


class IoFailure(SegRankError, OSError):
    pass


# metrics

class UnknownLabel(SegRankError, ValueError):
    pass


class GridMismatch(SegRankError, ValueError):
    pass


class DimMismatch(GridMismatch):
    pass


class SpacingMismatch(GridMismatch):
    pass


class EmptyMask(SegRankError, ValueError):
    """Raised when an operation needs at least one set voxel (or surface point)."""


class BothEmpty(EmptyMask):
    pass


class EitherEmpty(EmptyMask):
    pass


class EmptyReference(SegRankError, ValueError):
    pass


# ranking

class EmptyRecords(SegRankError, ValueError):
    pass


class AllMissing(SegRankError, ValueError):
    pass


class TeamSetMismatch(SegRankError, ValueError):
    pass


class EmptySubset(SegRankError, ValueError):
    pass


# stats / cohort

class NoCases(SegRankError, ValueError):
    pass


class DegenerateCategories(SegRankError, ValueError):
    pass


class EmptySample(SegRankError, ValueError):
    pass


class EmptySplit(SegRankError, ValueError):
    pass


class ParseError(SegRankError, ValueError):
    pass


class DuplicateCase(ParseError):
    pass


class SchemaError(SegRankError, ValueError):
    pass


class MissingInput(SegRankError, FileNotFoundError):
    pass
