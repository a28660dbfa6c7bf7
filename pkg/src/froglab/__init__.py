"""Simulation and uniqueness tooling for FROG-type pulse measurements.

The package synthesizes blind and single-pulse FROG traces, checks the
trivial ambiguities, runs a constructive uniqueness pipeline for
band-limited pulses with known power spectra, and reconstructs pulses from
traces with PCGP and a ptychographic engine.
"""

from .core import (FrogTrace, Kind, TraceGeometry, bandlimited_support, circular_shift,
                   dft_forward, dft_inverse, random_bandlimited_pulse, random_pulse)
from .forward import (NoiseModel, NoiseSpec, add_noise, gate_product, power_spectrum,
                      synthesize_trace, synthesize_trace_spectral)
from .ambiguity import (AmbiguityTransform, align_up_to_ambiguities, apply_transform,
                        check_trace_invariance)
from .uniqueness import GsOptions, check_bandlimit, verify_uniqueness
from .recon import ReconOptions, pcgp_reconstruct, ptycho_reconstruct, trace_error

__version__ = "0.1.0"

__all__ = [
    "AmbiguityTransform", "FrogTrace", "GsOptions", "Kind", "NoiseModel", "NoiseSpec",
    "ReconOptions", "TraceGeometry", "add_noise", "align_up_to_ambiguities",
    "apply_transform", "bandlimited_support", "check_bandlimit", "check_trace_invariance",
    "circular_shift", "dft_forward", "dft_inverse", "gate_product", "pcgp_reconstruct",
    "power_spectrum", "ptycho_reconstruct", "random_bandlimited_pulse", "random_pulse",
    "synthesize_trace", "synthesize_trace_spectral", "trace_error", "verify_uniqueness",
]
