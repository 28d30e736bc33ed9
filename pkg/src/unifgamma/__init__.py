"""Gaussian sums, uniform gamma-boundedness of operator families, Laplace
transform estimates and the Weiss property for diagonal systems."""

__version__ = "0.1.0"

from .errors import (DomainError, InvalidBasisError, InvalidInputError, InvariantViolation,
                     NumericRangeError, StabilityError, UnifGammaError, UnsupportedSpaceError,
                     UnsupportedStructureError)
from .spaces import GaussianDrawConfig, SpaceSpec
from .gamma_norm import (ColumnOperator, GaussianSumEstimate, cauchy_tail_profile, gamma_norm_sq,
                         gaussian_sum_sq, mixed_gaussian_sum_sq)
from .families import (OperatorFamily, UnifGammaBoundReport, dominated_check, fatou_union_bound,
                       gamma_bound_vs_unif, permanence_convex, shift_orbit_divergence,
                       unif_gamma_lower)
from .hilbert_sequences import (HilbertSequenceSpec, gram, gram_matrix, hilbert_sequence_gaussian_transfer,
                                phi_bound, properly_spaced_margin)
from .laplace import (RepresentableOperator, gamma_rl_decay, halfplane_family, halfplane_scaling,
                      laplace_hat, poisson_kernel, sector_family)
from .weiss import (DiagonalSystem, OffDiagonalSystem, factor_four_identity, off_diagonal_contrapositive_run,
                    ou_simulate, resolvent_family_bounds, weiss_equivalence_report)
