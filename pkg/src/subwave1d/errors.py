"""Exception hierarchy shared by all modules."""


class Subwave1DError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(Subwave1DError, ValueError):
    """Invalid geometry, material or numerical parameter."""


class UnsupportedConfigurationError(Subwave1DError):
    """The requested quantity is not defined for this configuration."""


class SingularDtnError(Subwave1DError):
    """Wave number hits a Dirichlet eigenvalue of a gap: k = n*pi/s_i."""

    def __init__(self, gap_index, n, k):
        self.gap_index = gap_index
        self.n = n
        self.k = k
        super().__init__(
            f"DtN map singular: k={k!r} equals {n}*pi/s_{gap_index} (gap {gap_index})"
        )


class DegenerateBandError(Subwave1DError):
    """A band touches another band, so its Zak phase is undefined."""

    def __init__(self, band, alpha, gap):
        self.band = band
        self.alpha = alpha
        self.gap = gap
        super().__init__(
            f"band {band} is degenerate at alpha={alpha:.6g} (eigenvalue gap {gap:.3e})"
        )


class ConvergenceError(Subwave1DError):
    """An iterative solver failed to converge."""


class ConsistencyError(Subwave1DError):
    """Internal self-check failed (e.g. a reconstructed mode is discontinuous)."""
