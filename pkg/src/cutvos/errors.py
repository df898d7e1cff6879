"""Error taxonomy shared by all modules.

Every toolkit failure subclasses :class:`ToolkitError` and carries a stable
``code`` string (its class name) that the CLI reports on exit code 2.
"""


class ToolkitError(Exception):
    """Base class for all data/contract errors raised by the toolkit."""

    @property
    def code(self) -> str:
        return type(self).__name__


# dataset
class MissingFrame(ToolkitError):
    pass


class DimensionMismatch(ToolkitError):
    pass


class EmptyTrack(ToolkitError):
    pass


class GapOrOverlap(ToolkitError):
    pass


class UnknownTransitionType(ToolkitError):
    pass


class OutOfRangeIndex(ToolkitError):
    pass


class ZeroDuration(ToolkitError):
    pass


# imgops
class NonFiniteParams(ToolkitError):
    pass


class InvalidHorizon(ToolkitError):
    pass


# tma
class DonorUnavailable(ToolkitError):
    pass


class IncompatibleDonorSize(ToolkitError):
    pass


class TimelineTooShort(ToolkitError):
    pass


class ConfigKeyError(ToolkitError):
    pass


# metrics
class EmptyShotList(ToolkitError):
    pass


class MissingTypeLabel(ToolkitError):
    pass


# shotdetect
class EmptyWindow(ToolkitError):
    pass


class OutOfRange(ToolkitError):
    pass


# localcues
class EmptyMask(ToolkitError):
    pass


class KTooLarge(ToolkitError):
    pass


class BadFeatureFile(ToolkitError):
    pass


# harness
class ContractViolation(ToolkitError):
    pass


class MissingOracleMask(ToolkitError):
    pass
