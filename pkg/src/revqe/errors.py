"""Exception types shared across the package."""


class ContractError(ValueError):
    """A caller violated an operation's precondition."""


class CapacityError(RuntimeError):
    """A register or wire count exceeds the simulator cap."""


class NumericalError(RuntimeError):
    """Numerical breakdown: norm underflow, non-convergence, etc."""


class TrainingError(RuntimeError):
    """Training aborted (e.g. non-finite gradient)."""


class PostSelectionError(RuntimeError):
    """Post-selection kept zero samples."""


class ConfigError(ValueError):
    """A run configuration failed schema validation."""
