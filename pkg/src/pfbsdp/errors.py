"""Exception types raised across the package."""


class PfbSdpError(Exception):
    """Base class for all package-specific errors."""


class NonSquareLength(PfbSdpError, ValueError):
    """Vector length is not a perfect square, so it cannot be reshaped."""


class DimensionMismatch(PfbSdpError, ValueError):
    """Operands have incompatible dimensions."""


class ConvergenceFailure(PfbSdpError, RuntimeError):
    """Iterative eigensolver exhausted its rotation budget."""


class DisconnectedGraph(PfbSdpError, ValueError):
    """Operation requires a connected graph."""


class NotChordal(PfbSdpError, ValueError):
    """Operation requires a chordal graph."""


class DisconnectedCliqueGraph(PfbSdpError, ValueError):
    """The clique intersection graph is not connected."""


class IndexOutOfRange(PfbSdpError, ValueError):
    """A vertex index lies outside the ambient range."""


class UncoveredEntry(PfbSdpError, ValueError):
    """A sparsity-pattern entry is not covered by any clique."""


class OverlapMismatch(PfbSdpError, ValueError):
    """Overlapping clique entries disagree beyond tolerance."""


class MissingNeighborPayload(PfbSdpError, KeyError):
    """A synchronous round is missing a neighbor's message."""


class InvalidSpec(PfbSdpError, ValueError):
    """Generator parameters are inconsistent."""
