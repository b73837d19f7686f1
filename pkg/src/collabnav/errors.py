"""Exception types shared across the package."""

from __future__ import annotations


class CollabNavError(Exception):
    """Base class for all package errors."""


class ParseError(CollabNavError):
    """Input text could not be parsed."""


class ValidationError(CollabNavError):
    """Parsed input violates a structural invariant.

    ``violations`` holds one human-readable message per offending element.
    """

    def __init__(self, violations: list[str] | str):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ConflictError(CollabNavError):
    """An observation contradicts an edge status that is already known."""

    def __init__(self, edge: int, known, observed):
        self.edge = edge
        self.known = known
        self.observed = observed
        super().__init__(f"edge {edge}: known {known.value}, observed {observed.value}")


class PlanningStuck(CollabNavError):
    """Some agent can make no progress toward its goal."""


class LimitExceeded(CollabNavError):
    """An instance is too large for an exhaustive routine."""


class ProtocolError(CollabNavError):
    """Executor called in a state where the request makes no sense."""


class SceneError(CollabNavError):
    """The continuous scene cannot host the graph."""

    def __init__(self, violations: list[str] | str):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ConfigError(CollabNavError):
    """A trial or CLI configuration is invalid."""
