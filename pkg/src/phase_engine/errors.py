"""Exception hierarchy and the top-level error handler."""

import logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_INVARIANT = 3


class PhaseEngineError(Exception):
    """Base class for every error raised by the engine."""


class ConfigError(PhaseEngineError):
    """A run configuration value violates its constraint."""

    def __init__(self, key: str, constraint: str) -> None:
        self.key = key
        self.constraint = constraint
        super().__init__(f"{key}: {constraint}")


class DomainError(PhaseEngineError, ValueError):
    """An operation was called outside its precondition."""


class NumericalInstabilityError(PhaseEngineError):
    """A fixed-step integrator drifted past its conservation check."""


class UnsupportedStateError(PhaseEngineError):
    """The initial state cannot be evolved with the given propagator record."""


class InvariantViolation(PhaseEngineError):
    """A numerical invariant checked by the validator failed."""


def error_handler(error: BaseException, context: str) -> int:
    """Log an error raised while running a subcommand and map it to an exit code."""
    if isinstance(error, ConfigError):
        logger.error(f"Invalid configuration for '{context}': {error}")
        return EXIT_CONFIG
    if isinstance(error, InvariantViolation):
        logger.error(f"Validation failed in '{context}': {error}")
        return EXIT_INVARIANT
    logger.error(f"Exception while running '{context}': {error}")
    return EXIT_RUNTIME
