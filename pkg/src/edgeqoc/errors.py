"""Exception hierarchy shared by the simulation, table and allocation layers."""


class EdgeQocError(Exception):
    """Base class for all package errors."""


class InvalidConfigError(EdgeQocError, ValueError):
    """A configuration object violates one of its invariants."""


class SimulationError(EdgeQocError):
    """A simulation could not be carried out or evaluated."""


class InfeasibleError(EdgeQocError):
    """No allocation satisfies the resource constraints.

    ``constraint`` names the binding rule, e.g. ``"aggregate-uplink"``.
    """

    def __init__(self, message: str, constraint: str = "packing"):
        super().__init__(message)
        self.constraint = constraint


class SchemeInfeasibleError(InfeasibleError):
    """Resources fit, but the scheme's extra requirement cannot be met."""


class SearchSpaceTooLargeError(EdgeQocError):
    """Exhaustive enumeration refused because the space exceeds the guard."""
