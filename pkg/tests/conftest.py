"""Shared fixtures: the reference configuration is expensive to build, so
spectrum, tensors and the long GPE runs are computed once per session."""

import numpy as np
import pytest

from qpbec.gpe import PairObserver, WindowSet, add_noise, evolve, init_two_mode
from qpbec.hopping import build_pair_tensors
from qpbec.potential import PotentialSpec, make_grid, sample_potential
from qpbec.spectrum import compute_spectrum

PAIR_J, PAIR_K = 32, 37
GPE_SEED = 12345
NOISE_FRACTION = 0.03


@pytest.fixture(scope="session")
def paper_spec():
    return PotentialSpec.golden(9, V1=1.5, V2=2.0, theta=0.13)


@pytest.fixture(scope="session")
def paper_grid(paper_spec):
    return make_grid(paper_spec, 4096)


@pytest.fixture(scope="session")
def paper_spectrum(paper_spec, paper_grid):
    return compute_spectrum(paper_spec, paper_grid, cutoff=18.0, count=100,
                            ipr_threshold=0.05)


@pytest.fixture(scope="session")
def tensors_pos(paper_spectrum):
    """Pair tensors for g = +1; flip with .with_sign(-1) where needed."""
    return build_pair_tensors(paper_spectrum, g=+1.0)


@pytest.fixture(scope="session")
def potential_values(paper_spec, paper_grid):
    return sample_potential(paper_spec, paper_grid.x)


def _breather_run(spectrum, V, g, N, z0, phi0, T_end, seed=GPE_SEED,
                  noise=NOISE_FRACTION):
    field = init_two_mode(
        N, z0, phi0,
        spectrum.mode(PAIR_J).samples, spectrum.mode(PAIR_K).samples,
        spectrum.grid, g=g,
    )
    field = add_noise(field, noise, seed)
    windows = WindowSet.around_pair(spectrum, PAIR_J, PAIR_K, containment_factor=4.0)
    observer = PairObserver(spectrum, PAIR_J, PAIR_K, windows)
    rec = evolve(field, V, T_end, dt=1e-3, observer=observer,
                 scalar_stride=0.1, snapshot_stride=50.0)
    return rec


@pytest.fixture(scope="session")
def run_attractive_slow(paper_spectrum, potential_values):
    """g=-1, N=0.3, z0=0, phi0=pi, T=500: slow two-hump breather."""
    return _breather_run(paper_spectrum, potential_values, -1.0, 0.3, 0.0, np.pi, 500.0)


@pytest.fixture(scope="session")
def run_attractive_fast(paper_spectrum, potential_values):
    """g=-1, N=2, z0=0.451, phi0=0, T=500: breather born from the saddle."""
    return _breather_run(paper_spectrum, potential_values, -1.0, 2.0, 0.451, 0.0, 500.0)


@pytest.fixture(scope="session")
def run_repulsive_stable(paper_spectrum, potential_values):
    """g=+1, N=2, z0=0.7886, phi0=pi, T=500: persistent staggered breather."""
    return _breather_run(paper_spectrum, potential_values, +1.0, 2.0, 0.7886, np.pi, 500.0)


@pytest.fixture(scope="session")
def run_repulsive_decay(paper_spectrum, potential_values):
    """g=+1, N=8, same shape, T=100: dispersive decay regime."""
    return _breather_run(paper_spectrum, potential_values, +1.0, 8.0, 0.7886, np.pi, 100.0)
