"""Exception types that map to CLI exit codes."""


class ConfigError(ValueError):
    """Invalid or unknown configuration keys/values (exit code 2)."""


class GateError(RuntimeError):
    """A quality gate failed, e.g. classifier accuracy below threshold (exit code 3)."""


class NumericalError(RuntimeError):
    """Non-finite values encountered during optimization or evaluation (exit code 4)."""
