"""Full mean-field evolution i dPsi/dt = [-(1/2) d^2/dx^2 + V + g|Psi|^2] Psi.

Second-order Strang splitting on the periodic grid: half-step of the local
phase exp(-i (V + g|Psi|^2) dt/2), a full kinetic step in Fourier space,
then the second local half-step.  Observables (mode projections, window
populations, currents, energy) are sampled at fixed strides into a
TrajectoryRecord.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .potential import Grid
from .spectrum import SpectrumResult


@dataclass
class GPEField:
    """Complex order parameter on the periodic grid."""

    grid: Grid
    psi: np.ndarray
    t: float = 0.0
    g: float = 0.0

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.psi) ** 2) * self.grid.dx)

    def copy(self) -> "GPEField":
        return GPEField(grid=self.grid, psi=self.psi.copy(), t=self.t, g=self.g)


def init_two_mode(
    N: float,
    z0: float,
    phi0: float,
    mode_j: np.ndarray,
    mode_k: np.ndarray,
    grid: Grid,
    g: float = 0.0,
) -> GPEField:
    """Psi = sqrt(N(1+z0)/2) phi_j + e^{i phi0} sqrt(N(1-z0)/2) phi_k.

    The modes must be orthonormal on the grid so the resulting norm is N.
    """
    if abs(z0) > 1:
        raise ValueError(f"|z0| must be <= 1, got {z0}")
    dx = grid.dx
    cross = abs(np.sum(mode_j * np.conj(mode_k)) * dx)
    if cross > 1e-8:
        raise ValueError(f"modes are not orthogonal: |<j,k>| = {cross:.2e}")
    psi = (
        np.sqrt(N * (1 + z0) / 2) * mode_j
        + np.exp(1j * phi0) * np.sqrt(N * (1 - z0) / 2) * mode_k
    ).astype(complex)
    return GPEField(grid=grid, psi=psi, t=0.0, g=g)


def add_noise(field: GPEField, amplitude_fraction: float, seed: int) -> GPEField:
    """Perturb by complex Gaussian noise proportional to the local amplitude.

    Each grid point receives an independent kick with standard deviation
    amplitude_fraction * |Psi(x)|, after which the field is rescaled so the
    total norm is restored exactly.  Deterministic for a fixed seed.
    """
    if amplitude_fraction < 0:
        raise ValueError(f"amplitude_fraction must be >= 0, got {amplitude_fraction}")
    out = field.copy()
    if amplitude_fraction == 0:
        return out
    n0 = field.norm
    rng = np.random.default_rng(seed)
    zeta = (
        rng.standard_normal(field.psi.size) + 1j * rng.standard_normal(field.psi.size)
    ) / np.sqrt(2)
    out.psi = field.psi + amplitude_fraction * np.abs(field.psi) * zeta
    out.psi *= np.sqrt(n0 / out.norm)
    return out


def _kinetic_phase(grid: Grid, dt: float) -> np.ndarray:
    k = 2 * np.pi * np.fft.fftfreq(grid.points, d=grid.dx)
    return np.exp(-0.5j * k * k * dt)


def step(field: GPEField, V: np.ndarray, dt: float) -> GPEField:
    """One Strang split step; second-order accurate in dt."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    out = field.copy()
    psi = out.psi
    psi *= np.exp(-0.5j * dt * (V + field.g * np.abs(psi) ** 2))
    psi = np.fft.ifft(_kinetic_phase(field.grid, dt) * np.fft.fft(psi))
    psi *= np.exp(-0.5j * dt * (V + field.g * np.abs(psi) ** 2))
    if not np.all(np.isfinite(psi)):
        raise FloatingPointError(f"split step produced NaN/overflow at t={field.t}")
    out.psi = psi
    out.t = field.t + dt
    return out


def current_density(field: GPEField) -> np.ndarray:
    """Superfluid current J = Im(conj(Psi) dPsi/dx) by spectral derivative."""
    k = 2 * np.pi * np.fft.fftfreq(field.grid.points, d=field.grid.dx)
    dpsi = np.fft.ifft(1j * k * np.fft.fft(field.psi))
    return np.imag(np.conj(field.psi) * dpsi)


def energy(field: GPEField, V: np.ndarray) -> float:
    """Conserved functional int (|Psi_x|^2/2 + V|Psi|^2 + g|Psi|^4/2) dx."""
    k = 2 * np.pi * np.fft.fftfreq(field.grid.points, d=field.grid.dx)
    dpsi = np.fft.ifft(1j * k * np.fft.fft(field.psi))
    dens = np.abs(field.psi) ** 2
    total = 0.5 * np.abs(dpsi) ** 2 + V * dens + 0.5 * field.g * dens**2
    return float(np.sum(total) * field.grid.dx)


def project(field: GPEField, spectrum: SpectrumResult, mu_gauge: float = 0.0) -> np.ndarray:
    """Coefficients a_j = <phi_j, Psi> e^{i mu t} over the localized modes."""
    phi = spectrum.localized_samples()
    coeffs = (phi.T @ field.psi) * field.grid.dx
    return coeffs * np.exp(1j * mu_gauge * field.t)


def pair_imbalance(field: GPEField, spectrum: SpectrumResult, j: int, k: int) -> float:
    """z = (|a_j|^2 - |a_k|^2) / (|a_j|^2 + |a_k|^2) for a 1-based pair."""
    dx = field.grid.dx
    aj = np.sum(spectrum.mode(j).samples * field.psi) * dx
    ak = np.sum(spectrum.mode(k).samples * field.psi) * dx
    pj, pk = abs(aj) ** 2, abs(ak) ** 2
    return float((pj - pk) / (pj + pk))


@dataclass(frozen=True)
class WindowSet:
    """Index masks for the per-mode windows and the containment union.

    The per-mode windows are centered on the two centers of mass with
    half-width |X_j - X_k|/2 (they touch without overlapping) and feed the
    spatial-imbalance signal.  The containment union is wider by
    `containment_factor` and measures how much norm stays near the pair.
    """

    mask_j: np.ndarray = field(repr=False)
    mask_k: np.ndarray = field(repr=False)
    mask_union: np.ndarray = field(repr=False)
    X_j: float
    X_k: float

    @classmethod
    def around_pair(
        cls,
        spectrum: SpectrumResult,
        j: int,
        k: int,
        containment_factor: float = 4.0,
    ) -> "WindowSet":
        Xj, Xk = spectrum.mode(j).com, spectrum.mode(k).com
        x = spectrum.grid.x
        half = abs(Xj - Xk) / 2
        wide = containment_factor * half
        return cls(
            mask_j=np.abs(x - Xj) <= half,
            mask_k=np.abs(x - Xk) <= half,
            mask_union=(np.abs(x - Xj) <= wide) | (np.abs(x - Xk) <= wide),
            X_j=Xj,
            X_k=Xk,
        )


@dataclass
class TrajectoryRecord:
    """Scalar time series plus sparse field snapshots from one evolution."""

    times: list[float] = field(default_factory=list)
    z: list[float] = field(default_factory=list)
    pop_j: list[float] = field(default_factory=list)
    pop_k: list[float] = field(default_factory=list)
    window_imbalance: list[float] = field(default_factory=list)
    window_fraction: list[float] = field(default_factory=list)
    norm: list[float] = field(default_factory=list)
    total_energy: list[float] = field(default_factory=list)
    leakage: list[float] = field(default_factory=list)
    peak_density: list[float] = field(default_factory=list)
    snapshot_times: list[float] = field(default_factory=list)
    snapshots: list[np.ndarray] = field(default_factory=list)
    truncated: bool = False

    def asarray(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name))


class PairObserver:
    """Standard observable set for a two-mode run."""

    def __init__(self, spectrum: SpectrumResult, j: int, k: int, windows: WindowSet):
        self.spectrum = spectrum
        self.j, self.k = j, k
        self.windows = windows
        self._phi_loc = spectrum.localized_samples()

    def record(self, field: GPEField, V: np.ndarray, rec: TrajectoryRecord):
        dx = field.grid.dx
        rho = np.abs(field.psi) ** 2
        coeffs = (self._phi_loc.T @ field.psi) * dx
        pops = np.abs(coeffs) ** 2
        pj = float(pops[self.j - 1])
        pk = float(pops[self.k - 1])
        nj = float(np.sum(rho[self.windows.mask_j]) * dx)
        nk = float(np.sum(rho[self.windows.mask_k]) * dx)
        ntot = float(np.sum(rho) * dx)
        rec.times.append(field.t)
        rec.z.append((pj - pk) / (pj + pk))
        rec.pop_j.append(pj)
        rec.pop_k.append(pk)
        rec.window_imbalance.append((nj - nk) / (nj + nk))
        rec.window_fraction.append(float(np.sum(rho[self.windows.mask_union]) * dx) / ntot)
        rec.norm.append(ntot)
        rec.total_energy.append(energy(field, V))
        rec.leakage.append(ntot - float(np.sum(pops)))
        rec.peak_density.append(float(rho.max()))


class EvolutionDiverged(FloatingPointError):
    """Raised on NaN/overflow; carries the partial record for salvage."""

    def __init__(self, message: str, record: TrajectoryRecord):
        super().__init__(message)
        self.record = record


def evolve(
    field: GPEField,
    V: np.ndarray,
    T_end: float,
    dt: float = 1e-3,
    observer: PairObserver | None = None,
    scalar_stride: float = 0.1,
    snapshot_stride: float = 5.0,
) -> TrajectoryRecord:
    """Propagate to T_end, sampling observables at the given strides.

    Mutates `field` in place (final state stays accessible).  Consecutive
    potential half-steps between samples are fused into full steps, which
    is exact because the local phase leaves |Psi| unchanged.
    """
    if T_end <= 0:
        raise ValueError(f"T_end must be positive, got {T_end}")
    steps = int(round(T_end / dt))
    scalar_every = max(1, int(round(scalar_stride / dt)))
    snap_every = max(1, int(round(snapshot_stride / dt)))
    kin = _kinetic_phase(field.grid, dt)
    g = field.g
    rec = TrajectoryRecord()

    def sample(s: int):
        if observer is not None and s % scalar_every == 0:
            observer.record(field, V, rec)
        if s % snap_every == 0:
            rec.snapshot_times.append(field.t)
            rec.snapshots.append(field.psi.copy())

    field.psi = field.psi.astype(complex, copy=True)
    sample(0)
    psi = field.psi
    t0 = field.t
    s = 0
    while s < steps:
        # advance to the next sampling point; interior half-steps of the
        # local phase merge pairwise into full steps
        nxt = min(
            ((s // scalar_every) + 1) * scalar_every,
            ((s // snap_every) + 1) * snap_every,
            steps,
        )
        span = nxt - s
        psi = psi * np.exp(-0.5j * dt * (V + g * np.abs(psi) ** 2))
        for i in range(span):
            psi = np.fft.ifft(kin * np.fft.fft(psi))
            if i < span - 1:
                psi *= np.exp(-1j * dt * (V + g * np.abs(psi) ** 2))
        psi *= np.exp(-0.5j * dt * (V + g * np.abs(psi) ** 2))
        s = nxt
        field.psi = psi
        field.t = t0 + s * dt
        if not np.all(np.isfinite(psi)):
            rec.truncated = True
            raise EvolutionDiverged(
                f"evolution diverged (NaN/overflow) at t={field.t}", rec
            )
        sample(s)
    return rec


def oscillation_period(
    times: np.ndarray,
    signal: np.ndarray,
    min_amplitude: float = 0.05,
) -> tuple[float, float] | None:
    """Dominant oscillation period from same-sign maxima spacings.

    The signal is detrended linearly; positive local maxima with prominence
    above a quarter of the peak-to-peak amplitude mark the cycles.  Returns
    (period, spread), or None for quasi-stationary signals (amplitude below
    `min_amplitude`, calibrated for imbalance-type signals in [-1, 1]) and for
    records with fewer than three qualifying maxima.
    """
    times = np.asarray(times, dtype=float)
    signal = np.asarray(signal, dtype=float)
    if times.size < 8:
        return None
    detrended = signal - np.polyval(np.polyfit(times, signal, 1), times)
    amplitude = (detrended.max() - detrended.min()) / 2
    if amplitude <= min_amplitude:
        return None
    peaks, _ = find_peaks(detrended, height=0.0, prominence=0.25 * amplitude)
    if peaks.size < 3:
        return None
    spacings = np.diff(times[peaks])
    return float(spacings.mean()), float(spacings.std())
