"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes do not conform; message names the op and extents."""


class ContractError(ValueError):
    """A documented precondition was violated by the caller."""


class CapacityError(RuntimeError):
    """A sampler or generator was asked for more than the source holds."""


class SizeError(ValueError):
    """Input too large for an exhaustive routine."""


class ConfigError(ValueError):
    """Bad key or value in a run configuration."""


class CheckpointError(ValueError):
    """Checkpoint file malformed or incompatible with the model shapes."""


class NumericAbort(RuntimeError):
    """Training hit a non-finite loss; carries last lr and gradient norm."""

    def __init__(self, message, last_lr=None, last_grad_norm=None):
        super().__init__(message)
        self.last_lr = last_lr
        self.last_grad_norm = last_grad_norm
