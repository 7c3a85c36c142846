"""Verification of entangled continuous-variable states with local photodetection."""

__version__ = "0.1.0"

from .analysis import (NoiseResponse, NoisyFamily, OptimizationResult, appendix_e_families, fit_noise_response,
                       infidelity, optimize_mu, passing_probability, sample_complexity, spectral_gap)
from .fock import ModeOperator, ModeState, TruncationConfig, coherent_state, overlap, tensor
from .operators import (DetectorModel, beam_splitter_apply, detector_effects, displacement,
                        multi_mode_parity_projector, parity_projectors, pnrd_acceptance)
from .protocols import MeasurementSetting, VerificationStrategy, ecs_settings, ghz_settings, strategy
from .simulate import RunConfig, RunReport, acceptance_curve, run
from .states import StateSpec, build_state, local_equivalence_transform
