class PotlabError(Exception):
    """Base class for input/precondition errors raised by potlab."""


class EmptyBoundary(PotlabError):
    """The space has no Dirichlet boundary (or a boundary-free component): Green operators do not exist."""


class TailDiverges(PotlabError):
    """A radial integral over the ambient volume profile does not converge."""


class NotApplicable(PotlabError):
    """Preconditions for a probe are not met on this model (reported, not a failure)."""


class NoAdmissibleBalls(PotlabError):
    """No ball of the requested family fits inside the interior."""
