"""Exceptions raised throughout the agtrack package

Everything derives from AgtrackError so callers (and the command line) can
catch the package's failures in one place.
"""

__all__ = ['AgtrackError', 'InvalidBox', 'TooSmall', 'OutOfBounds',
           'EmptyMap', 'ShapeMismatch', 'StaleCache', 'EpochOutOfRange',
           'EmptyBatch', 'TooManyRows', 'InputLengthMismatch',
           'ZeroGroundTruth', 'ParseError', 'NonPositiveBox',
           'ScenarioInfeasible', 'ConfigError', 'FormatError']


class AgtrackError(Exception):
    """Base class for every error raised by agtrack"""


class InvalidBox(AgtrackError):
    """A box with non-positive size or non-finite coordinates"""


class TooSmall(AgtrackError):
    """An image pyramid level would shrink below the minimum size"""


class OutOfBounds(AgtrackError):
    """A point has no valid tracking window"""


class EmptyMap(AgtrackError):
    """A feature map with no channels or no cells"""


class ShapeMismatch(AgtrackError):
    """Array shapes that do not agree"""


class StaleCache(AgtrackError):
    """A forward cache that does not belong to the gradient it is used with"""


class EpochOutOfRange(AgtrackError):
    """An epoch outside of the learning-rate schedule"""


class EmptyBatch(AgtrackError):
    """Training was asked to run over no samples"""


class TooManyRows(AgtrackError):
    """An assignment problem with more rows than columns"""


class InputLengthMismatch(AgtrackError):
    """Per-frame inputs of a sequence that are not aligned"""


class ZeroGroundTruth(AgtrackError):
    """A metric that needs ground truth was given none"""


class ParseError(AgtrackError):
    """A malformed line in a text file

    Attributes:
        line (int): the 1-based line number the error was found on
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = 'line %d: %s' % (line, message)
        AgtrackError.__init__(self, message)
        self.line = line


class NonPositiveBox(ParseError):
    """A box with zero or negative width or height in an input file"""


class ScenarioInfeasible(AgtrackError):
    """A synthetic scenario whose objects cannot fit the image"""


class ConfigError(AgtrackError):
    """A bad key or value in a configuration file"""


class FormatError(AgtrackError):
    """A binary file with the wrong magic bytes or a truncated body"""
