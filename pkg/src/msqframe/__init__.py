"""Memoryless scalar quantization of random frame and compressed-sensing measurements."""
from .bounds import (ConstantsUndefinedError, TheoremConstants, gaussian_corollary_band,
                     gaussian_mu_bracket, mu_cap, mwnh_prediction, theorem1_band, wnh_prediction)
from .cs import (BpdnConvergenceError, BpdnProblem, BpdnSolution, SparseSignal, TwoStageResult,
                 bpdn_solve, rip_sample_size, support_recover, two_stage)
from .ensembles import (ConfigError, Ensemble, EnsembleSpec, FrameMatrix, SchwartzDensity,
                        gaussian_density, gaussian_mixture_density, sample_frame, substream_seed)
from .linalg import Pseudoinverse, RankDeficiencyError, pseudoinverse, singular_value_band
from .mu import MuEstimate, MuMethod, SeriesConvergenceError, mu_gaussian, mu_monte_carlo, mu_schwartz, poisson_check
from .quantizer import QuantizerConfig, quantize_scalar, quantize_vector, residual
from .recon import ReconResult, Signal, bernoulli_commutation_check, reconstruct

__version__ = "0.1.0"
