"""scatterkit: forward radial solves and inverse scattering from nodal lines
and mixed energy / angular-momentum phase-shift data.

Units: hbar = 2m = 1, so E = k^2, lengths in L, potentials in 1/L^2.
"""

__version__ = "0.1.0"

from .errors import (DomainError, IntegrationError, MonotonicityError,
                     ReconstructionError, ResolutionError, ScatterError,
                     StageError, TurningPointError)
from .potentials import (ClosedFormPotential, IntegrabilityReport,
                         PiecewiseConstantPotential, RadialPotential,
                         TabulatedPotential, bargmann_transparent,
                         check_integrability, exponential_potential,
                         gaussian_potential, potential_from_dict, square_well,
                         zero_potential)
from .radial_solver import (BoundStateSet, PhaseShiftSample,
                            RegularSolutionTrace, SolverConfig,
                            count_bound_states, integrate_regular, phase_shift)
from .nodal_lines import (InverseLine, LineDerivatives, SpectralData, ZeroLine,
                          invert_line, line_derivative_exact, spectral_data_at,
                          trace_fixed_l_line, trace_mixed_line)
from .nodal_inverse import (DiscontinuityEvent, JunctionEstimate,
                            UniquenessProbe, detect_discontinuities,
                            junction_discontinuity, reconstruct_from_rE_line,
                            reconstruct_piecewise, third_derivative_ratio,
                            wronskian_residual)
from .semiclassical import (BornInversionResult, BornTransform,
                            MixedInversionResult, PhaseShiftTable,
                            TurningPointCurve, abel_invert_fixed_energy,
                            abel_invert_fixed_l, born_extend_and_invert,
                            born_g_from_potential, forward_fixed_l,
                            jwkb_phase_shift, mixed_jwkb_invert,
                            reconstruct_low_k_phase, sabatier_forward,
                            turning_point)
