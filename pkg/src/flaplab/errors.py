"""Exception types raised by the numerical engines."""


class NonConvergence(ArithmeticError):
    """Adaptive quadrature exhausted its panel budget above tolerance."""


class PrecisionInsufficient(ArithmeticError):
    """Cancellation destroys more digits than the working precision carries."""


class SectorDecayViolation(ArithmeticError):
    """Ray integrand failed its asserted decay envelope at sampled nodes."""


class DegenerateDenominator(ArithmeticError):
    """Quotient denominator not resolved away from zero."""


class FlatnessNotCertified(RuntimeError):
    """Requested cutoff range exceeds the certified flatness region."""


class PositivityLost(RuntimeError):
    """Weight evaluated to a non-positive value (bad delta/eps configuration)."""


class VanishingFailed(RuntimeError):
    """Direct quadrature of the transform residual exceeded its error budget."""


class CertificateFailed(RuntimeError):
    """A pointwise certificate inequality failed; carries the violating x."""


class DemoFailed(RuntimeError):
    """A clause of the non-uniqueness demonstration failed."""


class StepCollapse(RuntimeError):
    """IVP step size too coarse for the stiffness budget at this x."""


class KernelDegenerate(RuntimeError):
    """Volterra kernel diagonal too close to zero for forward substitution."""


class IllConditioned(RuntimeError):
    """Regularized normal system exceeds the precision budget."""


class ContrastFailed(RuntimeError):
    """Uniqueness-contrast experiment failed; names the violating side."""


class NonPositiveSample(ValueError):
    """Decay fit received a sample with |g| <= 0."""
