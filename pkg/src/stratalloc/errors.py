"""Exception hierarchy shared by all modules."""


class AllocationError(Exception):
    """Base class for every error raised by stratalloc."""


class InfeasibleProblem(AllocationError, ValueError):
    """Problem data violate the bound / total-size preconditions."""


class OverlappingSets(AllocationError, ValueError):
    pass


class PartitionCoversAll(AllocationError, ValueError):
    """The set function is undefined because L and U cover every stratum."""


class UnknownLabel(AllocationError, KeyError):
    pass


class NonPositiveAllocation(AllocationError, ValueError):
    pass


class ZeroVariance(AllocationError, ValueError):
    pass


class NonPositiveLambda(AllocationError, ValueError):
    pass


class BracketFailure(AllocationError, RuntimeError):
    pass


class MalformedAllocation(AllocationError, ValueError):
    pass


class TooManyStrata(AllocationError, ValueError):
    pass


class SumMismatch(AllocationError, ValueError):
    pass


class DegenerateRange(AllocationError, ValueError):
    pass
