"""Spin-noise simulator for a radiatively coupled pair of driven atoms.

Modules: ``qcore`` (operators and Hamiltonians), ``coupling`` (field dyadic,
coupling tensors, geometry statistics), ``dynamics`` (master equation,
steady states, noisy traces), ``spectral`` (PSD estimation and lineshape
fits), ``perturbation`` (exchange-shift theory and its exact oracle),
``harness`` (configuration-driven CLI recipes).
"""

__version__ = "0.1.0"

from . import coupling, dynamics, perturbation, qcore, spectral  # noqa: F401
from .coupling import Conformation, CouplingTensors  # noqa: F401
from .dynamics import TimeTrace, simulate_ensemble, simulate_trace  # noqa: F401
from .qcore import SimulationParams  # noqa: F401
from .spectral import FitResult, Spectrum, fit_spectrum, psd  # noqa: F401
