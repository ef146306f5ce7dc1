"""Quantum optomechanically induced transparency at the single-photon level.

Master-equation spectra of a driven optomechanical cavity, with the
linearized (classical) predictions alongside for comparison.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .fock import ModeSpace, InvalidDimensionError
from .model import SystemParams, build_generator, classical_transmission, modified_classical_transmission
from .response import steady_state, sidebands_linear_response, sidebands_time_domain, demodulate
from .pipeline import probe_spectrum, omit_signal, fano_amplitude, crossover_sweep, temperature_sweep, transistor_run

__all__ = [
    "ModeSpace",
    "InvalidDimensionError",
    "SystemParams",
    "build_generator",
    "classical_transmission",
    "modified_classical_transmission",
    "steady_state",
    "sidebands_linear_response",
    "sidebands_time_domain",
    "demodulate",
    "probe_spectrum",
    "omit_signal",
    "fano_amplitude",
    "crossover_sweep",
    "temperature_sweep",
    "transistor_run",
]
