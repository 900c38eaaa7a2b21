"""Relaxation functions, mild solutions and decay rates for Sonine kernel pairs."""

from .decay import (DecayFit, HypothesisError, RateTarget, fit_loglog, forced_rate_target,
                    gradient_rate_target, karamata_check, l2_rate_targets,
                    lr_rate_target_homogeneous, sigma1, sigma2, theoretical_exponent_ell)
from .grid import SampledFn, TimeGrid
from .kernels import (DeconvolutionError, KernelSpec, UnsupportedVariantError, ell_hat,
                      ell_table, eval_ell, eval_g, eval_k, integrated_ell, k_hat)
from .mlf import MLParams, mittag_leffler
from .spectral import (Field, MildSolutionRun, SeparableForcing, SpectralGrid,
                       evolve_forced, evolve_homogeneous, fractional_symbol,
                       fundamental_solution_field, lr_norm)
from .volterra import (RelaxationTable, build_relaxation_table, convolve,
                       deconvolve_first_kind, solve_relaxation_r, solve_relaxation_s)

__version__ = "0.1.0"
