"""Semiclassical inversion: JWKB mixed-data pipeline and Born relations."""

from .abel import (MixedInversionResult, abel_invert_fixed_energy,
                   abel_invert_fixed_l, forward_fixed_l, mixed_jwkb_invert,
                   reconstruct_low_k_phase, sabatier_forward)
from .born import BornInversionResult, born_extend_and_invert, born_g_from_potential
from .jwkb import jwkb_phase_shift, turning_point
from .tables import BornTransform, PhaseShiftTable, TurningPointCurve

__all__ = [
    "PhaseShiftTable",
    "TurningPointCurve",
    "BornTransform",
    "turning_point",
    "jwkb_phase_shift",
    "sabatier_forward",
    "abel_invert_fixed_energy",
    "forward_fixed_l",
    "abel_invert_fixed_l",
    "reconstruct_low_k_phase",
    "mixed_jwkb_invert",
    "MixedInversionResult",
    "born_g_from_potential",
    "born_extend_and_invert",
    "BornInversionResult",
]
