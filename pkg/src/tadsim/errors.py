class ConfigError(ValueError):
    """Invalid scenario or parameter configuration."""

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems) if problems else [message]


class SimulationFault(RuntimeError):
    """Internal contract violation: the simulation cannot continue."""
