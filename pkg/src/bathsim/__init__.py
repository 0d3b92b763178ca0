"""Oscillator coupled to a harmonic thermostat.

Modules
-------
spectrum    continuum bath data and spectral functionals (K, w, gap kernel)
discretize  finite-mode bath built from quadrature nodes
dynamics    full oscillator + bath integration and invariant checks
reduced     memory-kernel equation for the oscillator alone
analysis    final-regime classification of trajectories
cli         configuration-driven pipeline
"""

from .analysis import ClassificationReport, ClassifierSettings, classify, fit_harmonic, windowed_peaks
from .discretize import BathInitialData, DiscreteBath, bath_initial, sample_modes, secular_lambda0
from .dynamics import SystemState, TrajectoryRecord, run
from .reduced import FluctuatingForce, MemoryKernel, build_kernel, gle_run
from .spectrum import (
    BathSpectrum,
    OscillatorModel,
    QuadratureSpec,
    compute_K,
    find_lambda0,
    gaussian_gap,
    gaussian_gapless,
    w_diamond_gap,
    w_time,
)

__version__ = "0.1.0"

__all__ = [
    "BathInitialData", "BathSpectrum", "ClassificationReport", "ClassifierSettings",
    "DiscreteBath", "FluctuatingForce", "MemoryKernel", "OscillatorModel", "QuadratureSpec",
    "SystemState", "TrajectoryRecord", "bath_initial", "build_kernel", "classify",
    "compute_K", "find_lambda0", "fit_harmonic", "gaussian_gap", "gaussian_gapless",
    "gle_run", "run", "sample_modes", "secular_lambda0", "w_diamond_gap", "w_time",
    "windowed_peaks",
]
