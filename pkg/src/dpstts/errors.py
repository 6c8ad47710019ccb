"""Exception hierarchy.

Every concrete error carries a distinct ``exit_code`` so the command line
front end can map failures to process exit statuses without a lookup table.
"""


class DPSTTSError(Exception):
    exit_code = 1


class PointOutOfDomain(DPSTTSError, ValueError):
    exit_code = 10


class CubeOutOfGrid(DPSTTSError, ValueError):
    exit_code = 11


class NonMonotonicTime(DPSTTSError, ValueError):
    exit_code = 12


class UnsortedTimestamps(DPSTTSError, ValueError):
    exit_code = 13


class EmptyAfterFiltering(DPSTTSError, ValueError):
    exit_code = 14


class MalformedRecord(DPSTTSError, ValueError):
    exit_code = 20

    def __init__(self, message, rejects=()):
        super().__init__(message)
        self.rejects = list(rejects)


class EmptyDataset(DPSTTSError, ValueError):
    exit_code = 21


class InvalidBudget(DPSTTSError, ValueError):
    exit_code = 30


class NonNeighborTransition(DPSTTSError, ValueError):
    exit_code = 40


class CorruptModelFile(DPSTTSError):
    exit_code = 41


class VersionMismatch(DPSTTSError):
    exit_code = 42


class DimensionMismatch(DPSTTSError, ValueError):
    exit_code = 50


class NotADistribution(DPSTTSError, ValueError):
    exit_code = 51


class TooFewItems(DPSTTSError, ValueError):
    exit_code = 52


class ConfigError(DPSTTSError, ValueError):
    exit_code = 60


class FewerThanKPatterns(UserWarning):
    """Raised as a warning: fewer distinct patterns exist than were requested."""
