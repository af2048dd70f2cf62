class ConfigError(ValueError):
    """Invalid run configuration or initial data."""


class SolverError(RuntimeError):
    """A numerical solve diverged."""
