"""Exception hierarchy.

``InputError`` subclasses signal malformed files or violated preconditions
(CLI exit code 2); ``NumericError`` subclasses signal a computation that has
no defined answer on otherwise well-formed input (CLI exit code 3).
"""


class TerrascopeError(ValueError):
    pass


class InputError(TerrascopeError):
    pass


class NumericError(TerrascopeError):
    pass


# file formats
class MissingHeaderKey(InputError):
    pass


class CellCountMismatch(InputError):
    pass


class NonNumericCell(InputError):
    pass


class RotatedGridUnsupported(InputError):
    pass


class UnsupportedMagic(InputError):
    pass


class TruncatedPayload(InputError):
    pass


class WrongLineCount(InputError):
    pass


class NonNumericLine(InputError):
    pass


class MalformedCsv(InputError):
    pass


# shape / parameter preconditions
class DimensionMismatch(InputError):
    pass


class EmptyInput(InputError):
    pass


class GridTooSmall(InputError):
    pass


class TooFewPoints(InputError):
    pass


class UnsortedCuts(InputError):
    pass


class SeedOutOfBounds(InputError):
    pass


class SeedOnNodata(InputError):
    pass


class TooFewObservations(InputError):
    pass


class NonpositiveDistance(InputError):
    pass


class NegativeValue(InputError):
    pass


class EmptyTheme(InputError):
    pass


class InvalidParameter(InputError):
    pass


# numeric failures
class DegenerateTransform(NumericError):
    pass


class CollinearPoints(NumericError):
    pass


class DegenerateRange(NumericError):
    pass


class DegenerateCovariance(NumericError):
    pass


class TooFewDistinctSamples(NumericError):
    pass


class AllZeroValues(NumericError):
    pass


class EmptyWeights(NumericError):
    pass


class NoValidPixels(NumericError):
    pass
