"""Counterdiabatic Thouless pumping in the driven Rice-Mele model."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    DegenerateVector,
    GapClosed,
    GaugeObstruction,
    NumericalError,
    OracleMismatch,
    PoleEncountered,
    PumpError,
    SeamContact,
    StiffnessExceeded,
    ValidityViolated,
)
from .model import DriveParams, Scheme  # noqa: F401
from .evolution import EvolutionConfig  # noqa: F401
