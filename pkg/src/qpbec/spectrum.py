"""Linear eigenproblem of H = -(1/2) d^2/dx^2 + V(x) on the periodic domain.

A plane-wave Galerkin basis exp(i*2*pi*m*x/L)/sqrt(L) turns H into a sparse
Hermitian matrix: kinetic terms on the diagonal, V1/2 at offsets +-q and
(V2/2)exp(+-i*theta) at offsets +-p.  The lowest eigenpairs are synthesized
back onto the real-space grid, made real, and classified as localized or
extended by their inverse participation ratio.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .potential import Grid, PotentialSpec


@dataclass(frozen=True)
class EigenMode:
    """One normalized real eigenfunction on the grid.

    j is the 1-based energy-ascending index.  ipr = integral of phi^4
    (units 1/length).  com is the center of mass on the fundamental
    interval; com_reliable is False when the mode carries significant
    weight near the domain edge, where the periodic wrap makes the plain
    first moment misleading.  imag_residual is the L2 norm of the
    imaginary part removed by the phase rotation; values >= 1e-6 indicate
    near-degeneracy (flagged, not fatal).
    """

    j: int
    energy: float
    samples: np.ndarray = field(repr=False)
    ipr: float
    com: float
    localized: bool
    imag_residual: float
    com_reliable: bool


@dataclass(frozen=True)
class SpectrumResult:
    """Energy-ascending modes plus the localized/extended split."""

    spec: PotentialSpec
    grid: Grid
    modes: list[EigenMode]
    M: int
    mobility_edge: float | None
    first_extended_energy: float | None
    extended_coupling_estimate: float

    @property
    def energies(self) -> np.ndarray:
        return np.array([m.energy for m in self.modes])

    def mode(self, j: int) -> EigenMode:
        """1-based access matching the physics index."""
        return self.modes[j - 1]

    def localized_samples(self) -> np.ndarray:
        """(points, M) matrix of the localized mode samples."""
        return np.column_stack([m.samples for m in self.modes[: self.M]])


def wavenumber_index(spec: PotentialSpec, cutoff: float) -> np.ndarray:
    """Integer basis indices m with |2*pi*m/L| <= cutoff (plus rounding)."""
    if cutoff <= 0:
        raise ValueError(f"cutoff must be positive, got {cutoff}")
    m_max = int(np.ceil(cutoff * spec.q / 2))
    return np.arange(-m_max, m_max + 1)


def build_hamiltonian(spec: PotentialSpec, cutoff: float = 18.0) -> np.ndarray:
    """Dense Hermitian Galerkin matrix of H up to the wavenumber cutoff."""
    m = wavenumber_index(spec, cutoff)
    dim = m.size
    G = 2 * np.pi / spec.L
    H = np.zeros((dim, dim), dtype=complex)
    H[np.diag_indices(dim)] = 0.5 * (G * m) ** 2
    i = np.arange(dim)
    q, p = spec.q, spec.p
    if q < dim:
        H[i[q:], i[:-q]] += spec.V1 / 2
        H[i[:-q], i[q:]] += spec.V1 / 2
    if p < dim:
        H[i[p:], i[:-p]] += (spec.V2 / 2) * np.exp(1j * spec.theta)
        H[i[:-p], i[p:]] += (spec.V2 / 2) * np.exp(-1j * spec.theta)
    return H


def solve_modes(H: np.ndarray, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Lowest `count` eigenpairs of the Hermitian matrix, energies ascending.

    Residuals are verified against 1e-8 * ||H||_op; a failure here means the
    eigensolver did not converge.
    """
    dim = H.shape[0]
    if count > dim:
        raise ValueError(f"requested {count} eigenpairs from a {dim}-dim basis")
    evals, evecs = eigh(H)
    evals, evecs = evals[:count], evecs[:, :count]
    op_norm = np.abs(H).sum(axis=1).max()  # row-sum upper bound on ||H||_op
    res = np.linalg.norm(H @ evecs - evecs * evals, axis=0)
    if np.any(res > 1e-8 * op_norm):
        raise RuntimeError(
            f"eigensolver residual {res.max():.3e} exceeds 1e-8*||H|| = {1e-8 * op_norm:.3e}"
        )
    return evals, evecs


def synthesize(spec: PotentialSpec, grid: Grid, coeffs: np.ndarray, cutoff: float) -> np.ndarray:
    """Evaluate Galerkin eigenvectors on the grid (columns are modes)."""
    m = wavenumber_index(spec, cutoff)
    G = 2 * np.pi / spec.L
    basis = np.exp(1j * G * np.outer(grid.x, m)) / np.sqrt(spec.L)
    return basis @ coeffs


def realify(samples: np.ndarray, dx: float) -> tuple[np.ndarray, float]:
    """Rotate a complex eigenfunction onto the real axis.

    The global phase minimizing the imaginary L2 norm is alpha =
    -arg(integral of phi^2)/2.  Returns the renormalized real part with the
    sign fixed so the sample at the peak of |phi| is positive, plus the
    residual imaginary norm (large for degenerate pairs, e.g. plane waves).
    """
    s = np.sum(samples * samples) * dx
    alpha = -0.5 * np.angle(s)
    rotated = samples * np.exp(1j * alpha)
    residual = float(np.sqrt(np.sum(rotated.imag**2) * dx))
    real = rotated.real
    real = real / np.sqrt(np.sum(real**2) * dx)
    if real[np.argmax(np.abs(real))] < 0:
        real = -real
    return real, residual


def center_of_mass(samples: np.ndarray, grid: Grid) -> tuple[float, bool]:
    """First moment of phi^2 on the fundamental interval.

    Returns (X, reliable); reliable is False when more than 1% of the mass
    sits within 5% of the domain edge (wrap-around ambiguity).
    """
    rho = samples**2 * grid.dx
    X = float(np.dot(rho, grid.x))
    L = grid.length
    boundary = float(np.sum(rho[np.abs(grid.x) > 0.45 * L]))
    return X, boundary < 0.01


def extended_coupling_estimate(spec: PotentialSpec) -> float:
    """Amplitude scale 1/sqrt(L) of normalized extended states."""
    return 1.0 / np.sqrt(spec.L)


def classify(
    spec: PotentialSpec,
    grid: Grid,
    modes: list[EigenMode],
    ipr_threshold: float,
) -> SpectrumResult:
    """Split energy-sorted modes at the IPR threshold.

    The localized set must be exactly the lowest-M prefix; interleaved
    extended modes indicate a bad threshold or an unconverged solve and are
    rejected.
    """
    if not 0 < ipr_threshold < 1:
        raise ValueError(f"ipr_threshold must be in (0, 1), got {ipr_threshold}")
    energies = np.array([m.energy for m in modes])
    if np.any(np.diff(energies) < -1e-12):
        raise ValueError("modes must be sorted by energy")
    flags = np.array([m.ipr >= ipr_threshold for m in modes])
    M = int(np.sum(flags))
    if not (np.all(flags[:M]) and not np.any(flags[M:])):
        bad = np.nonzero(flags != (np.arange(len(modes)) < M))[0] + 1
        raise RuntimeError(
            f"localized modes are not an energy prefix (check modes {bad.tolist()}); "
            "inspect the spectrum before trusting the reduction"
        )
    return SpectrumResult(
        spec=spec,
        grid=grid,
        modes=modes,
        M=M,
        mobility_edge=float(energies[M - 1]) if M > 0 else None,
        first_extended_energy=float(energies[M]) if M < len(modes) else None,
        extended_coupling_estimate=extended_coupling_estimate(spec),
    )


def compute_spectrum(
    spec: PotentialSpec,
    grid: Grid,
    cutoff: float = 18.0,
    count: int = 100,
    ipr_threshold: float = 0.05,
) -> SpectrumResult:
    """Full pipeline: Galerkin solve, grid synthesis, realification, split.

    The highest requested energy must stay well below the kinetic cutoff
    energy cutoff^2/2, otherwise the basis is too small for the window.
    """
    H = build_hamiltonian(spec, cutoff)
    energies, vectors = solve_modes(H, count)
    if energies[-1] > 0.25 * cutoff**2 / 2:
        raise ValueError(
            f"energy window up to {energies[-1]:.3f} too close to the basis "
            f"cutoff energy {cutoff ** 2 / 2:.1f}; increase cutoff"
        )
    sampled = synthesize(spec, grid, vectors, cutoff)
    modes = []
    for idx in range(count):
        real, residual = realify(sampled[:, idx], grid.dx)
        ipr = float(np.sum(real**4) * grid.dx)
        com, reliable = center_of_mass(real, grid)
        modes.append(
            EigenMode(
                j=idx + 1,
                energy=float(energies[idx]),
                samples=real,
                ipr=ipr,
                com=com,
                localized=ipr >= ipr_threshold,
                imag_residual=residual,
                com_reliable=reliable,
            )
        )
    return classify(spec, grid, modes, ipr_threshold)


def apply_hamiltonian_on_grid(
    spec: PotentialSpec, grid: Grid, samples: np.ndarray
) -> np.ndarray:
    """Apply H spectrally on grid samples (independent of the Galerkin path)."""
    from .potential import sample_potential

    k = 2 * np.pi * np.fft.fftfreq(grid.points, d=grid.dx)
    kinetic = np.fft.ifft(0.5 * k**2 * np.fft.fft(samples))
    V = sample_potential(spec, grid.x)
    out = kinetic + V * samples
    return out.real if np.isrealobj(samples) else out
