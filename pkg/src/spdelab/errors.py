"""Exception hierarchy shared across the package."""


class SpdeLabError(Exception):
    """Base class for all package-specific failures."""


class ScenarioError(SpdeLabError):
    """Malformed or inconsistent scenario configuration."""


class AssemblyError(SpdeLabError):
    """Operator or grid assembly rejected the inputs."""


class EigenSolveError(SpdeLabError):
    """Principal eigenpair computation failed or did not converge."""


class CovarianceError(SpdeLabError):
    """Covariance matrix is not (numerically) positive semidefinite."""


class JumpMeasureError(SpdeLabError):
    """Jump intensity measure is unusable (non-finite moments, bad window)."""


class CoefficientError(SpdeLabError):
    """Coefficient family evaluation or declaration problem."""
