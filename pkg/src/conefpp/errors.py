"""Exception types shared across the package."""


class ConefppError(Exception):
    """Base class for package errors."""


class BudgetExceeded(ConefppError):
    """Exploration hit the site cap before certifying an answer.

    Carries the partial information available at abort time: a valid
    lower bound on the quantity being computed and the number of sites
    settled.
    """

    def __init__(self, lower_bound, explored, message=None, partial=None):
        self.lower_bound = lower_bound
        self.explored = explored
        self.partial = partial
        super().__init__(
            message or f"site cap hit after {explored} sites; "
                       f"cost lower bound {lower_bound}")


class Unreachable(ConefppError):
    """The target is not connected to the sources inside the region."""


class EmptySlice(ConefppError):
    """A requested hyperplane slice contains no region sites."""


class NoDetours(ConefppError):
    """No edge-disjoint detour bundle fits inside the region."""


class WitnessNotFound(ConefppError):
    """No interior witness satisfies the boundary-site search contract."""


class IsolatedSite(ConefppError):
    """The site has no incident edges inside the region."""


class DegenerateShape(ConefppError):
    """A direction's time-constant interval includes zero."""


class NoPlot(ConefppError):
    """The result record has no associated plot renderer."""


class ValidationError(ConefppError):
    """A configuration document failed validation."""
