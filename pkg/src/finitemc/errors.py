"""Exception hierarchy shared across the package.

Every failure the library raises deliberately derives from FiniteMcError, so
callers (and the CLI) can distinguish domain failures from programming bugs.
"""

from __future__ import annotations


class FiniteMcError(Exception):
    """Base class for all errors raised by this package."""


class InputDomainError(FiniteMcError, ValueError):
    """An argument violates a documented precondition."""


class CapabilityError(FiniteMcError):
    """The value's declared family or metadata does not support the request."""


class SingularMatrixError(FiniteMcError):
    """A linear system has a numerically vanishing pivot."""


class InfeasibleProgramError(FiniteMcError):
    """A linear program has no feasible point."""


class UnboundedProgramError(FiniteMcError):
    """A linear program's objective is unbounded below."""


class KernelIntegrityError(FiniteMcError):
    """A kernel evaluator failed a Markov-kernel consistency check."""


class StructuralChainError(FiniteMcError):
    """The finite chain lacks a unique absorbing communicating class."""


class ConvergenceError(FiniteMcError):
    """An iterative method exceeded its iteration budget."""


class InvertibilityError(FiniteMcError):
    """The approximation operator is numerically singular (a sensitivity LP
    optimum is nonpositive or below threshold)."""


class RegimeError(FiniteMcError):
    """Model parameters are outside the regime required by the operation."""


class ConfigError(FiniteMcError):
    """A configuration or plan file is malformed or contains unknown keys."""
