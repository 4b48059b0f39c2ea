"""Exception types shared across the package."""


class QBecknerError(Exception):
    """Base class for all package errors."""


class NonHermitian(QBecknerError):
    """Matrix fails the Hermitian symmetry tolerance."""


class DomainViolation(QBecknerError):
    """Spectrum falls outside the domain of a scalar kernel."""


class SingularState(QBecknerError):
    """A full-rank density matrix was required."""


class NotPsd(QBecknerError):
    """Matrix has eigenvalues below the PSD clamping floor."""


class ZeroExponent(QBecknerError):
    """Power operator called with a zero exponent."""


class NotModularEigenvector(QBecknerError):
    """Jump operator is not an eigenvector of the modular operator."""


class NotDbc(QBecknerError):
    """Generator is not self-adjoint for the GNS inner product."""


class ResidualTooLarge(QBecknerError):
    """Jump decomposition discards too much weight to reproduce the generator."""


class NoJumps(QBecknerError):
    """Operation needs the jump representation, which is unavailable."""


class NotPrimitive(QBecknerError):
    """Generator has a degenerate fixed-point space."""


class NotSymmetric(QBecknerError):
    """Operation requires the tracial case sigma = I/d."""


class OptimizerDiverged(QBecknerError):
    """Constant estimation produced a non-finite ratio."""


class MissingEstimate(QBecknerError):
    """Bound ledger referenced an estimate that was not supplied."""


class IncompatibleJumps(QBecknerError):
    """Two generators do not share a common jump-operator support."""


class KernelComponent(QBecknerError):
    """Input has a component in the kernel of the Onsager operator."""


class NonPositiveCurvature(QBecknerError):
    """Check requires a strictly positive curvature bound."""


class LeftPositiveCone(QBecknerError):
    """Geodesic integration left the positive cone and could not recover."""


class UnknownFixture(QBecknerError, KeyError):
    """No fixture registered under the requested name."""


class ConfigError(QBecknerError):
    """Experiment configuration is malformed."""
