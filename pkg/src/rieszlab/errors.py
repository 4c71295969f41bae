"""Exception hierarchy shared across the library.

The CLI maps these onto exit codes: ConfigError -> 2, NumericalError -> 3,
UnsupportedInputError -> 4.
"""


class RieszLabError(Exception):
    """Base class for all library errors."""


class ConfigError(RieszLabError):
    """Malformed run configuration or command-line input."""


class NumericalError(RieszLabError):
    """An iteration or quadrature failed to reach its tolerance."""


class UnsupportedInputError(RieszLabError):
    """Input is structurally valid but outside the supported feature set."""


class PreconditionError(RieszLabError):
    """An operation was called with inputs violating its contract."""


class RankDeficiencyError(NumericalError):
    """Chart Jacobian (or fitted frame) has rank below the manifold dimension."""


class PatchRadiusError(NumericalError):
    """Requested graph-patch radius exceeds graph representability."""


class TopologyError(UnsupportedInputError):
    """Mesh is not closed/consistently oriented where the operation needs it."""


class OrientationError(UnsupportedInputError):
    """Orientation data is missing or inconsistent."""


class SingularPairError(PreconditionError):
    """Two evaluation points coincide where a distinct pair is required."""


class SingularMapError(PreconditionError):
    """Moebius map is singular on the surface (inversion center on it)."""


class ProfileFitError(NumericalError):
    """Radial profile Taylor fit residual exceeded its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PoleError(PreconditionError):
    """Evaluation requested exactly at a pole of a closed-form beta function.

    Carries the residue of the simple pole so callers can regularize.
    """

    def __init__(self, message, residue):
        super().__init__(message)
        self.residue = residue
