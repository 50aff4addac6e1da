"""
Cusp Recovery from Far-Field Data

Recovers the corners (cusps) of a penetrable acoustic medium from far-field
measurements over a band of wavenumbers: transmission eigenvalues are found
as dips of a spectral indicator, and the Herglotz wave at a dip vanishes or
localizes at the corners.

Main Components:
- specfun: Bessel/Hankel functions and circular harmonics
- geometry: media, built-in shapes and solver grids
- forward: Lippmann-Schwinger solver and far-field synthesis
- oracle: Mie series and disk transmission eigenvalues
- spectral: truncated indicator and eigenvalue scan
- reconstruct: Herglotz waves and corner detection
- main: pipeline orchestration and execution
- cli: command line interface

Usage:
    from src.config import RunConfig
    from src.main import CuspRecoveryPipeline

    pipeline = CuspRecoveryPipeline(RunConfig().validate())
    results = pipeline.run()
"""

__version__ = "1.0.0"

from .config import RunConfig, load_config
from .errors import (
    ArchiveError, ConfigurationError, ContractViolation, CuspToolkitError,
    DomainError, ReconstructionError, SolverError,
)
from .forward import FarFieldMatrix, VolumeIntegralSolver, far_field, solve_total_field, synthesize_matrix
from .geometry import Grid, MediumSpec, builtin_medium
from .main import CuspRecoveryPipeline
from .oracle import bound_window, disk_transmission_eigs, mie_farfield, mie_field
from .reconstruct import detect_cusps, herglotz_eval, polygon_from_cusps
from .spectral import indicator, scan

__all__ = [
    'CuspRecoveryPipeline',
    'RunConfig',
    'load_config',
    'MediumSpec',
    'Grid',
    'builtin_medium',
    'VolumeIntegralSolver',
    'FarFieldMatrix',
    'solve_total_field',
    'far_field',
    'synthesize_matrix',
    'mie_field',
    'mie_farfield',
    'disk_transmission_eigs',
    'bound_window',
    'indicator',
    'scan',
    'herglotz_eval',
    'detect_cusps',
    'polygon_from_cusps',
    'CuspToolkitError',
    'ConfigurationError',
    'DomainError',
    'SolverError',
    'ContractViolation',
    'ReconstructionError',
    'ArchiveError',
]
