"""Affine coherent-state numerical laboratory.

Closed-form overlap kernels on the affine ("ax+b") group, reproducing
kernel Hilbert space checks, Feynman-Kac semigroup projections on a grid,
pinned-bridge Monte Carlo path integrals, and exactly solvable affine
dynamics -- working uniformly across the admissible (beta > 1/2) and weak
(0 < beta <= 1/2) coherent-state regimes.
"""

from .errors import (AffineCSError, ConfigError, InadmissibleError,
                     NumericError, ParameterError)
from .fiducial import (FiducialSpec, MomentReport, eval_fiducial, is_admissible,
                       moment, normalization_constant, uncertainty_product)
from .kernel import (KernelValue, PhasePoint, ResolutionReport, admissible_constant,
                     gram, matrix_element_D, matrix_element_Q, overlap_closed,
                     overlap_quadrature, resolution_check)
from .rkhs import (PolarizationResidual, SpanElement, eval_span, inner_product,
                   kernel_element, polarization_residual)
from .dynamics import (AffineHamiltonian, GroupElement, TimeDependentAffine,
                       exp_affine, flow_labels, group_compose, group_identity,
                       group_inverse, lower_symbol, propagator_affine,
                       propagator_affine_quadrature, sliced_short_time,
                       time_ordered_flow, upper_symbol_scale, weak_symbol_check)
from .semigroup import (DiscreteGenerator, GridField, GridSpec, RescaledLimit,
                        build_A, delta_surrogate, evolve, knu, projection_limit,
                        sample_kernel_field, toy_heat, toy_heat_grid,
                        toy_selfconsistent)
from .pathmc import (AffineSymbol, ExtrapolationResult, McEstimate, PathLattice,
                     extrapolate_nu, propagator_mc, sample_bridge,
                     stratonovich_phase, symbol_insertion_mc, toy_wiener_mc)

__version__ = "0.1.0"
