"""Quasi-periodic lattice BEC: mode-lattice reduction, dimers, breathers."""

__version__ = "0.1.0"

from .potential import Grid, PotentialSpec, golden_convergent, make_grid, sample_potential
from .spectrum import EigenMode, SpectrumResult, compute_spectrum
from .hopping import HoppingTensors, build_pair_tensors, overlap4, sparsify
from .dimer import (
    DimerParams,
    DimerState,
    FamilyBranch,
    dimer_params,
    fixed_points,
    integrate_dimer,
    stationary_two_mode,
    trace_families,
)
from .gpe import GPEField, TrajectoryRecord, add_noise, evolve, init_two_mode

__all__ = [
    "Grid",
    "PotentialSpec",
    "golden_convergent",
    "make_grid",
    "sample_potential",
    "EigenMode",
    "SpectrumResult",
    "compute_spectrum",
    "HoppingTensors",
    "build_pair_tensors",
    "overlap4",
    "sparsify",
    "DimerParams",
    "DimerState",
    "FamilyBranch",
    "dimer_params",
    "fixed_points",
    "integrate_dimer",
    "stationary_two_mode",
    "trace_families",
    "GPEField",
    "TrajectoryRecord",
    "add_noise",
    "evolve",
    "init_two_mode",
]
