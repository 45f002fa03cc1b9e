"""Exception types shared by the numerical modules and mapped to CLI exit codes."""


class PartitionOfUnityError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(PartitionOfUnityError, ValueError):
    """Malformed, non-finite or dimensionally inconsistent input."""


class RangeError(InvalidInputError):
    """A parameter lies outside a configured range (|j| > J_max, n > N_max)."""


class RefusalError(PartitionOfUnityError, ValueError):
    """A construction precondition does not hold, so no guarantee can be given."""


class QuadratureError(PartitionOfUnityError, RuntimeError):
    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(f"{message} (estimate={estimate!r}, error_bound={error_bound!r})")
        self.estimate = estimate
        self.error_bound = error_bound


class VerificationError(PartitionOfUnityError, RuntimeError):
    """A guaranteed property failed on a sampled grid."""
