"""Exception hierarchy shared across the package."""


class AlodsimError(Exception):
    """Base class for all errors raised by this package."""


class SceneParseError(AlodsimError):
    """Scene document is malformed or missing a required field."""


class SceneValidationError(AlodsimError):
    """Scene document parsed but violates an invariant."""


class InfeasibleTargetError(AlodsimError):
    """Requested decay target cannot be realized by the geometry."""


class DegenerateGeometryError(AlodsimError):
    """Geometry degenerates (e.g. coincident source and receiver)."""


class InsufficientDecayError(AlodsimError):
    """Decay curve does not span the range required by the estimator."""


class MatchInfeasibleError(AlodsimError):
    """Spectral matching impossible (e.g. empty spectrum in range)."""


class RateMismatchError(AlodsimError):
    """Sample rates of the operands differ."""
