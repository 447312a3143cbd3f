"""Exception hierarchy shared across the package."""


class RdslabError(Exception):
    """Base class for all package errors."""


class ConfigError(RdslabError):
    """Bad user configuration (CLI exit code 2)."""


class GridError(RdslabError):
    """A time is off the sampling grid or outside the stored horizon."""


class BlowUpError(RdslabError):
    """State norm exceeded the configured cap during integration."""

    def __init__(self, time, norm, cap):
        super().__init__(f"state norm {norm:.3e} exceeded cap {cap:.3e} at t={time}")
        self.time = time
        self.norm = norm
        self.cap = cap


class RankCollapseError(RdslabError):
    """QR frame lost rank during a block chain."""

    def __init__(self, block, value):
        super().__init__(f"rank collapse in block {block}: |R_ii| = {value:.3e}")
        self.block = block


class GapError(RdslabError):
    """Gap parameters incompatible with a spectrum (unclassifiable exponent)."""


class SeparationError(RdslabError):
    """Spectral groups too close to separate subspaces reliably."""


class IllConditionedFrameError(RdslabError):
    """Union of Oseledets frames is numerically degenerate."""

    def __init__(self, cond):
        super().__init__(f"frame union condition number {cond:.3e} exceeds 1e8")
        self.cond = cond


class UnboundedGrowthError(RdslabError):
    """A trichotomy bound ratio keeps growing with the horizon."""


class LowerBoundViolation(RdslabError):
    """Unstable lower-bound constant indistinguishable from zero."""


class NonContractionError(RdslabError):
    """Lyapunov-Perron map is not a contraction (rho' >= 1)."""

    def __init__(self, rho_prime):
        super().__init__(f"fixed-point map is not a contraction: rho' = {rho_prime:.4f} >= 1")
        self.rho_prime = rho_prime


class NotConvergedError(RdslabError):
    """Fixed-point iteration exhausted max_iter."""

    def __init__(self, iterations, last_update, last_ratio):
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(last update {last_update:.3e}, last ratio {last_ratio:.3f})"
        )
        self.iterations = iterations
        self.last_update = last_update
        self.last_ratio = last_ratio


class NotSettledError(RdslabError):
    """Trajectory transient has not decayed at the requested sample time."""


class DegenerateFitError(RdslabError):
    """Least-squares design matrix is degenerate (e.g. all amplitudes zero)."""
