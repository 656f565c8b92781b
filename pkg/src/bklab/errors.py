"""Exception hierarchy.

Two families matter operationally: configuration/validation problems
(exit code 2 in the CLI) and numerical failures discovered at runtime
(exit code 3).
"""


class BklabError(ValueError):
    """Invalid input, configuration or precondition violation."""


class GridError(BklabError):
    pass


class DomainError(BklabError):
    pass


class AliasingGuardError(BklabError):
    """tau exceeds pi*N/(8*L^2); the oscillating phase is unresolved."""


class NormError(BklabError):
    pass


class MollifierResolutionError(BklabError):
    """Requested cut-off scale is below 4h and cannot be mollified."""


class NumericalError(RuntimeError):
    """A computation failed for numerical (not configuration) reasons."""


class FixedPointDivergenceError(NumericalError):
    """Picard iteration diverged; tau is below the contraction threshold."""


class SingularSystemError(NumericalError):
    """Dirichlet system singular: q sits at an interior eigenvalue."""
