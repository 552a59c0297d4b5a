"""Wavelet estimation and FANOVA testing under CAR(1) errors."""

from .car1 import (Car1Params, Signal, alpha_from_rho, derive_params, estimate_rho_lag1,
                   estimate_rho_residuals, fisher_information, simulate_car1, simulate_model,
                   stream)
from .cochrane_orcutt import (CochraneOrcuttWavelet, FitConfig, FitResult, fit, prewhiten,
                              recolor)
from .dwt import BasisName, FilterPair, WaveletCoefficients, forward_dwt, inverse_dwt, wavelet_filters
from .fanova import (Branch, FanovaDecomposition, TestConfig, TestOutcome, WaveletFanovaTest,
                     adaptive_test, decompose, nonadaptive_test)
from .shrinkage import (Regime, ShrinkageSpec, SigmaMethod, WaveletShrinkage, denoise_block,
                        denoise_linear, denoise_term_by_term, estimate_sigma)
from .simlab import StudyConfig, imse, run_study, scale_to_snr
from .testfunctions import TestFunctionName, make_test_function

__version__ = "0.1.0"
