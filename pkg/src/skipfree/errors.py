"""Exception hierarchy shared by the numerical modules."""


class SkipFreeError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SkipFreeError, ValueError):
    """Input violates a documented precondition (shape, sign, stochasticity)."""


class DomainError(SkipFreeError, ValueError):
    """Argument outside the domain of the operation (e.g. z <= 0)."""


class StructureError(SkipFreeError):
    """Matrix structure is unsuitable, typically reducibility."""


class AssumptionError(SkipFreeError):
    """A structural modelling assumption fails (zero up/down blocks, ...)."""


class IterationLimitError(SkipFreeError):
    """Iteration budget exhausted. ``best`` carries the last/best estimate."""

    def __init__(self, message, best=None, iterations=None):
        super().__init__(message)
        self.best = best
        self.iterations = iterations


class NoSolutionError(SkipFreeError):
    """Fixed-point iterates diverged; no finite minimal solution (gamma* > 1)."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class NearSingularError(SkipFreeError):
    """I - H is (numerically) singular because spr(H) is too close to one."""

    def __init__(self, message, spr=None):
        super().__init__(message)
        self.spr = spr


class NoRootError(SkipFreeError):
    """chi(z) = 1 has no real solution because the infimum exceeds one."""

    def __init__(self, message, gamma_star=None):
        super().__init__(message)
        self.gamma_star = gamma_star


class EmptyRegionError(NoRootError):
    """The region {s : chi(e^s) <= 1} is empty."""


class UnderflowError(SkipFreeError):
    """Occupation values in a fit window are zero or below representable range."""
