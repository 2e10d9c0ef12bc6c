class ConfigurationError(ValueError):
    """Invalid parameters or an unrealizable scenario."""


class InfeasibleError(RuntimeError):
    """No precoder meets the user-SINR targets within the power budget."""


class MaxIterationsError(RuntimeError):
    """The convex solver stopped at its iteration limit without a solution."""
