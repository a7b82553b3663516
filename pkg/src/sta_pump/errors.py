"""Exception and warning types raised by the simulator.

Numerical failures (``NumericalError`` subclasses) map to CLI exit code 3,
configuration and physical-validity failures to exit code 2.
"""


class PumpError(Exception):
    """Base class for all simulator errors."""


class ConfigError(PumpError, ValueError):
    """Invalid or inconsistent configuration."""


class ValidityViolated(ConfigError):
    """Laser pulses leave the large-detuning regime."""


class NumericalError(PumpError, ArithmeticError):
    """A computation cannot proceed on the requested grid."""


class GapClosed(NumericalError):
    """The two bands touch (eps_plus == 0) at a sampled point."""


class PoleEncountered(NumericalError):
    """Azimuthal rate requested where hx == hy == 0."""


class StiffnessExceeded(NumericalError):
    """The step-size cap cannot be met within the hard step budget."""


class OracleMismatch(NumericalError):
    """Two independent routes to the same quantity disagree."""


class DegenerateVector(NumericalError):
    """A Bloch vector is too short to define a direction."""


class SeamContact(NumericalError):
    """Wavepacket probability reached the periodic seam guard band."""


class GaugeObstruction(UserWarning):
    """The preferred Wannier gauge is singular at some momenta."""
