"""Exception types raised by the simulator."""


class WsDiracError(Exception):
    """Base class for all simulator errors."""


class NoBoundExcitedState(WsDiracError):
    """The lattice is too shallow to hold a second localized state in the reference well."""


class DegenerateLadder(WsDiracError):
    """The intra-well gap sits too close to an integer multiple of the Bloch frequency."""


class OutOfDomain(WsDiracError):
    """A translated state or synthesized site has no support on the grid."""


class GridMisaligned(WsDiracError):
    """Grid spacing does not divide the lattice step, or well centers are off-grid."""


class ResonanceCollision(WsDiracError):
    """Intra- and inter-ladder resonances overlap; the compiled model would mix them."""


class ZeroOverlap(WsDiracError):
    """Amplitude balancing is impossible because an overlap integral vanishes."""


class PacketTooWide(WsDiracError):
    """The requested Gaussian envelope does not fit on the lattice."""


class EdgeLeak(WsDiracError):
    """Wave-packet amplitude reached the edge of the site lattice."""


class UnstableStep(WsDiracError):
    """A propagation step changed the norm beyond tolerance without an absorber."""


class NotBimodal(WsDiracError):
    """Density snapshot does not show two separated packets."""


class NoOscillation(WsDiracError):
    """Mean-position series has no spectral peak above the noise floor."""


class ConfigError(WsDiracError):
    """Base class for scenario-configuration problems."""


class ParseError(ConfigError):
    """Configuration file is not valid TOML."""


class ValidationError(ConfigError):
    """Configuration parsed but failed schema validation."""
