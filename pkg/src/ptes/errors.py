"""Exception hierarchy.

Input problems derive from :class:`InputError` so the CLI can map them to
exit code 2 without catching solver failures.
"""


class PtesError(Exception):
    pass


class InputError(PtesError, ValueError):
    pass


class DegenerateCycle(InputError):
    """Temperature set gives a non-positive work term in the COP ratio."""


class DomainError(InputError):
    pass


class InvalidBreakpoints(InputError):
    pass


class UnsupportedSpec(InputError):
    pass


class FitDiverged(PtesError):
    pass


class CapabilityDominanceError(PtesError):
    """A capability function exceeded one that should dominate it."""


class LengthMismatch(InputError):
    pass


class LedgerUnderflow(PtesError):
    pass


class MissingHours(InputError):
    pass


class NonMonotonicTimestamps(InputError):
    pass


class NonNumericPrice(InputError):
    pass


class EmptyCluster(PtesError):
    pass


class InconsistentNetwork(InputError):
    pass
