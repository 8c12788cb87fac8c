"""Exception hierarchy shared by the library and the command line."""


class SkorokhodError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDistributionError(SkorokhodError, ValueError):
    """A target law violates the standing hypotheses (centred, non-degenerate, bounded)."""


class UnboundedSupportError(InvalidDistributionError):
    """The law has unbounded support, so every domain embedding it has infinite energy."""


class NoDensityError(InvalidDistributionError):
    """An operation needs a density but the law has atoms or gaps."""


class DivergentEnergyError(SkorokhodError, ArithmeticError):
    """The energy series of a map or law was diagnosed as divergent."""


class QuadratureError(SkorokhodError, RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class AliasingError(SkorokhodError, ValueError):
    """Requested more Fourier modes than the sampling grid can resolve."""
