"""Exception and warning types shared across the package."""


class MFTorusError(Exception):
    """Base class for all package errors."""


class NonFiniteValue(MFTorusError):
    """A field contains NaN or infinite node values."""


class NonZeroMean(MFTorusError):
    """A right-hand side that must have zero mean does not."""


class CoincidentPoints(MFTorusError):
    """Two points coincide (mod lattice) where they must be distinct."""


class DomainViolation(MFTorusError):
    """The state left the admissible set: the weighted exponential mass
    ``int K~ e^u`` is non-positive."""


class Overflow(MFTorusError):
    """Evaluation too close to a negative-order cone point."""


class BadOrder(MFTorusError):
    """Concentration order outside its admissible open interval."""


class SingularOverlap(MFTorusError):
    """A bubble support point is too close to a cone point."""


class ResolutionTooCoarse(MFTorusError):
    """The grid cannot resolve the sign regions reliably (thin component,
    thin gap, or a pixel-corner tangency)."""


class MaskTouchesNodalBand(MFTorusError):
    """A subdomain mask comes within two cells of the nodal band."""


class HypothesisViolation(MFTorusError):
    """Input data fails one of the validated structural hypotheses
    (sign change with nondegenerate nodal line, or cone points off it)."""


class LambdaCritical(MFTorusError):
    """The coupling parameter sits on the critical mass set."""


class DomainExit(MFTorusError):
    """A solver step could not be backtracked into the admissible set."""


class MaxIterations(MFTorusError):
    """Iteration budget exhausted before reaching the tolerance."""


class Stagnation(MFTorusError):
    """Residual reduction stalled (less than 1% over five steps)."""


class NoBlowUp(MFTorusError):
    """Quantization report requested for a branch that never blew up."""


class ConfigError(MFTorusError):
    """Malformed run configuration; carries file/line context when known."""


class ResolutionWarning(UserWarning):
    """A feature (bubble core, spike) is sharper than the grid; computed
    quadratures are flagged as under-resolved."""


class NearDegenerate(UserWarning):
    """An eigenvalue of the second variation is within tolerance of zero;
    the Morse index may be unreliable."""
