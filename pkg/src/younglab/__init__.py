"""Numerical laboratory for the sharp Young convolution inequality and its stability."""
from .errors import *  # noqa: F401,F403
from .exponents import (ExponentTriple, SharpConstant, complete_triple, conjugate,
                        extremal_ratios, gaussian_objective, sharp_constant, sharp_factor,
                        validate_triple)
from .grid import (Deficit, Grid, SampledFunction, convolve, deficit, lp_norm,
                   read_function_csv, shift, trilinear_form, write_function_csv)
from .rearrangement import (LevelSet, distribution_function, layer_cake, rearranged_functional,
                            riesz_sobolev_gap, superlevel_comparison, superlevel_set,
                            symmetric_rearrangement)
from .normalization import (check_normalized, default_profile, dyadic_profile,
                            measure_ratio_bound_check, rescale, rescale_to_normalized)
from .intervals import (IntervalFit, best_interval, inverse_hypothesis_check,
                        level_interval_profile, tail_mass_report)
from .homomorphism import (AffineRecovery, CorruptionModel, PairSampleSet, recover_affine_three,
                           recover_character, recover_linear, rich_points)
from .gaussians import GaussianFit, GaussianTriple, evaluate_extremizer, fit_gaussian
from .recovery import (PhaseRecovery, StabilityCertificate, phase_recovery,
                       project_to_extremizer, read_certificate, recovery_pipeline)
from .slices import SliceFactorization, slice_factorize, slice_structure_report

__version__ = "0.1.0"
