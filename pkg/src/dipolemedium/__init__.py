"""Optical constants of dense cold atomic clouds from coupled-dipole simulations."""

__version__ = "0.1.0"

from .config import SimulationConfig, load_config, parse_config
from .dispersion import ComplexWavenumber, FitWindow, fit_wavenumber, unwrap_phase
from .errors import (
    ConfigError,
    DipoleMediumError,
    FitError,
    PlacementError,
    PoleError,
    SingularSystemError,
    ZeroSeparationError,
)
from .geometry import CloudRealization, Cylinder, Sphere, atom_count, sample_realization
from .green import dyadic_kernel, self_energy, zeeman_block
from .mie import MieInput, mie_extinction, microscopic_cross_section
from .optics import OpticalConstants, derive_constants, ioffe_regel, lorentz_lorenz, permittivity
from .profile import BinningSpec, PolarizationProfile, accumulate, bin_polarization
from .solver import ExcitationAmplitudes, ShiftedSolver, assemble_system, solve_amplitudes

__all__ = [
    "BinningSpec",
    "CloudRealization",
    "ComplexWavenumber",
    "ConfigError",
    "Cylinder",
    "DipoleMediumError",
    "ExcitationAmplitudes",
    "FitError",
    "FitWindow",
    "MieInput",
    "OpticalConstants",
    "PlacementError",
    "PolarizationProfile",
    "PoleError",
    "ShiftedSolver",
    "SimulationConfig",
    "SingularSystemError",
    "Sphere",
    "ZeroSeparationError",
    "accumulate",
    "assemble_system",
    "atom_count",
    "bin_polarization",
    "derive_constants",
    "dyadic_kernel",
    "fit_wavenumber",
    "ioffe_regel",
    "load_config",
    "lorentz_lorenz",
    "microscopic_cross_section",
    "mie_extinction",
    "parse_config",
    "permittivity",
    "sample_realization",
    "self_energy",
    "solve_amplitudes",
    "unwrap_phase",
    "zeeman_block",
]
