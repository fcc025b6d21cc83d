class IKGError(Exception):
    """Base class for every error raised by the ikg package."""


class ConfigError(IKGError, ValueError):
    """Invalid instance, goal, policy parameters or experiment configuration."""


class GridTooLargeError(ConfigError):
    """Brute-force allocation requested on a grid that cannot be enumerated."""


class DegenerateStateError(IKGError, ValueError):
    """Posterior that cannot be evaluated (unsampled arm, bad index or shape)."""


class ConvergenceError(IKGError, ArithmeticError):
    """A root solve failed to bracket or left residuals above tolerance."""

    def __init__(self, message: str, residuals: dict[str, float] | None = None):
        super().__init__(message)
        self.residuals = dict(residuals or {})

    def __str__(self) -> str:
        base = super().__str__()
        if not self.residuals:
            return base
        parts = ", ".join(f"{k}={v:.3e}" for k, v in self.residuals.items())
        return f"{base} ({parts})"
