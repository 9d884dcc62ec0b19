"""Bound-preserving oscillation-eliminating DG solver for the Kapila
five-equation compressible two-phase flow model with the Tammann EOS."""

from .eos import (
    PhasePair,
    ConservedState,
    PrimitiveState,
    mixture_coefficients,
    pressure,
    phase_sound_speed_sq,
    transport_sound_speed,
    wood_sound_speed_sq,
    kappa,
    check_admissible_gp,
    conserved_from_primitive,
    primitive_from_conserved,
)
from .errors import (
    KapdgError,
    NonPhysicalDensityError,
    NonHyperbolicStateError,
    SingularCompressibilityError,
    SolverFailure,
    UsageError,
)

__version__ = "0.1.0"
