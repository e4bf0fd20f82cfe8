"""Exception types shared across the package."""


class DsregError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(DsregError):
    """Array shapes are inconsistent with the declared group layout."""


class BudgetInvalid(DsregError):
    """Sparsity budget violates 1 <= s <= m or 1 <= s0 <= d."""


class CapExceeded(DsregError):
    """An exact enumeration would exceed the configured cap.

    Callers should fall back to a sampling / bounding mode.
    """

    def __init__(self, count, cap, what="enumeration"):
        self.count = int(count)
        self.cap = int(cap)
        super().__init__(f"{what} needs {self.count} items, cap is {self.cap}")


class WeightOrder(DsregError):
    """A weight sequence is not non-increasing (or has negative entries)."""


class GammaRange(DsregError):
    """Tuning constant gamma must lie strictly inside (0, 1)."""


class SigmaUnknown(DsregError):
    """Theoretical tuning requested but the problem carries no noise scale."""


class NoConvergence(DsregError):
    """An iterative routine hit its iteration cap before certifying its tolerance."""


class ConditionViolated(DsregError):
    """A precondition on the design matrix (normalization / eigenvalue) fails."""


class EpsRange(DsregError):
    """Covering radius must lie in (0, 1/2)."""


class ConfigInvalid(DsregError):
    """Experiment configuration failed schema or consistency validation."""


class MissingArtifact(DsregError):
    """Expected experiment output file is absent."""


class ParseError(DsregError):
    """A machine-readable artifact is malformed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
