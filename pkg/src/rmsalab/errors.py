"""Exception types shared across the package."""


class TopologyError(ValueError):
    """Raised for malformed or invalid topology descriptions."""


class ConfigError(ValueError):
    """Raised for unparseable or out-of-range run configuration."""


class ContractViolation(RuntimeError):
    """Internal-state misuse that indicates a bug in the caller.

    Examples: allocating over occupied slots, releasing an unknown
    lightpath. These are never recoverable within a run.
    """
