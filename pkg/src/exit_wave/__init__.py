"""__init__ module for exit wave."""
from importlib.metadata import version, PackageNotFoundError

from .errors import ConfigError, ExitWaveError, NumericalError, StorageError, ValidationError
from .fields import ComplexField, GridSpec, RealField, Space, modulate, spectral_transform, inverse_spectral_transform
from .wcc import FactorList, WeightMatrix, wcc_direct, wcc_factorized, xcorr_spectral
from .tcc import FactorizedKernel, OpticalParams, build_factorized_kernel, build_kernels, tcc_ishizuka_eval
from .forward import FocusSeries, SyntheticWaveSpec, make_synthetic_wave, simulate_image, simulate_series
from .objective import Objective, ReconstructionVariables, RegularizerSpec, energy, gradient_translation, gradient_wave
from .optimizer import SolverConfig, StopReason, initial_variables, minimize
from .storage import FieldStore
from .config import RunConfig, load_config

__all__ = [
    'ExitWaveError',
    'ValidationError',
    'ConfigError',
    'StorageError',
    'NumericalError',
    'GridSpec',
    'Space',
    'ComplexField',
    'RealField',
    'spectral_transform',
    'inverse_spectral_transform',
    'modulate',
    'WeightMatrix',
    'FactorList',
    'xcorr_spectral',
    'wcc_direct',
    'wcc_factorized',
    'OpticalParams',
    'FactorizedKernel',
    'tcc_ishizuka_eval',
    'build_factorized_kernel',
    'build_kernels',
    'FocusSeries',
    'SyntheticWaveSpec',
    'make_synthetic_wave',
    'simulate_image',
    'simulate_series',
    'Objective',
    'ReconstructionVariables',
    'RegularizerSpec',
    'energy',
    'gradient_wave',
    'gradient_translation',
    'SolverConfig',
    'StopReason',
    'initial_variables',
    'minimize',
    'FieldStore',
    'RunConfig',
    'load_config',
]
try:
    __version__ = version("exit-wave")
except PackageNotFoundError:
    __version__ = "0.0.0"
