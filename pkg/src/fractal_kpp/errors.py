"""Exception hierarchy shared by all modules."""


class FractalKPPError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FractalKPPError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ResourceError(FractalKPPError):
    """A request would exceed representable or memory limits."""


class DegenerateStencilError(FractalKPPError):
    """No usable neighbour exists for a difference quotient."""


class DivergenceError(FractalKPPError, ArithmeticError):
    """A time integration produced non-finite values."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time

    def __reduce__(self):
        return type(self), (str(self), self.time)


class EvaluationError(FractalKPPError, ArithmeticError):
    """A right-hand side evaluated to a non-finite value."""


class AlignmentError(FractalKPPError):
    """Two sampled objects do not share the same grid."""


class ResolutionError(FractalKPPError):
    """A spatial grid is too coarse or too short for the requested quantity."""


class ConfigError(FractalKPPError):
    """Invalid experiment configuration; carries every problem found."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors) if self.errors else "invalid configuration")

    def __reduce__(self):
        return type(self), (self.errors,)


class DeltaRegimeError(FractalKPPError):
    """The Green function is requested at coincident staircase times (identity map)."""


class StageError(FractalKPPError):
    """A pipeline failure tagged with the fractality parameter and stage that raised it."""

    def __init__(self, alpha: float, stage: str, cause: BaseException):
        super().__init__(f"alpha={alpha:.6g}, stage {stage}: {type(cause).__name__}: {cause}")
        self.alpha = alpha
        self.stage = stage
        self.cause = cause

    def __reduce__(self):
        return type(self), (self.alpha, self.stage, self.cause)
