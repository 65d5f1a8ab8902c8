"""Exception types shared across the package."""


class CaoptError(Exception):
    """Base class for all package-specific errors."""


class NumericalBreakdown(CaoptError):
    """No usable kernel vector / recombination could not meet its tolerance.

    Callers may retry with a looser tolerance.
    """


class DimensionMismatch(CaoptError):
    """Shapes of inputs do not agree."""


class Diverged(CaoptError):
    """An optimizer produced a non-finite loss or iterate."""


class DegenerateStep(CaoptError):
    """Secant Hessian requested across a step where no coordinate moved."""


class MissingLipschitz(CaoptError):
    """A partition rule needs per-coordinate Lipschitz constants."""


class WrongModel(CaoptError):
    """Operation only defined for a different loss family."""


class SingularBlockHessian(CaoptError):
    """Block Hessian solve failed even after ridge regularization."""


class ParseError(CaoptError):
    """A CSV cell could not be parsed; message carries row/column location."""


class MissingColumn(CaoptError):
    """A required CSV column is absent."""


class ConfigError(CaoptError):
    """Experiment configuration failed validation; message carries the field path."""


class FeatureCountExceeded(CaoptError):
    """Tensor-power expansion would exceed the configured column cap."""
