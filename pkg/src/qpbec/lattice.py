"""Discrete mode-lattice dynamics.

The reduced model keeps, for every mode pair (j, k), the quartic terms with
at most two distinct indices:

    i da_j/dt = (eps_j - mu) a_j + chi_j |a_j|^2 a_j
                + sum_{k != j} [ chit_jk (2|a_j|^2 a_k + a_j^2 conj(a_k))
                               + chi_jk (2|a_k|^2 a_j + a_k^2 conj(a_j))
                               + chit_kj |a_k|^2 a_k ]

Indices label energy levels, not positions.  The exact four-index sum is
also available for small mode subsets as a validation oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hopping import HoppingTensors, overlap4
from .spectrum import SpectrumResult


@dataclass
class LatticeState:
    """Complex amplitudes over a mode subset at one instant."""

    a: np.ndarray
    mu: float = 0.0
    t: float = 0.0

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.a) ** 2))


@dataclass(frozen=True)
class LatticeTrajectory:
    times: np.ndarray
    amplitudes: np.ndarray = field(repr=False)  # (samples, modes)

    @property
    def norms(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1)

    def to_csv(self, path, labels: list[int] | None = None) -> None:
        """Rows t, Re a_j, Im a_j for the selected 1-based mode labels."""
        from .dataset import write_csv

        cols = (
            list(range(self.amplitudes.shape[1]))
            if labels is None
            else [j - 1 for j in labels]
        )
        header = ["t"]
        for c in cols:
            header += [f"re_a{c + 1}", f"im_a{c + 1}"]
        rows = []
        for i in range(self.times.size):
            row = [self.times[i]]
            for c in cols:
                row += [self.amplitudes[i, c].real, self.amplitudes[i, c].imag]
            rows.append(row)
        write_csv(path, header, rows)


def monomer_mu(j: int, N: float, tensors: HoppingTensors, spectrum: SpectrumResult) -> float:
    """Chemical potential eps_j + N*chi_j of a single occupied mode."""
    if not 1 <= j <= tensors.M:
        raise ValueError(f"mode label {j} outside 1..{tensors.M}")
    if N < 0:
        raise ValueError(f"N must be >= 0, got {N}")
    return float(spectrum.mode(j).energy + N * tensors.chi_diag[j - 1])


def reduced_rhs(
    state: LatticeState,
    tensors: HoppingTensors,
    energies: np.ndarray,
) -> np.ndarray:
    """da/dt of the reduced lattice (pair couplings only).

    When the tensors were sparsified, dropped couplings are already zero in
    the arrays, so the neighbor restriction is implicit.
    """
    a = state.a
    if a.size != tensors.M or energies.size != tensors.M:
        raise ValueError("state, tensors and energies dimensions disagree")
    absq = np.abs(a) ** 2
    pair = tensors.chi_pair - np.diag(tensors.chi_diag)
    tilde = tensors.chi_tilde - np.diag(tensors.chi_diag)
    rhs = (energies - state.mu) * a + tensors.chi_diag * absq * a
    rhs += 2 * absq * (tilde @ a) + a**2 * (tilde @ np.conj(a))
    rhs += 2 * a * (pair @ absq) + np.conj(a) * (pair @ (a * a))
    rhs += tilde.T @ (absq * a)
    return -1j * rhs


class FourIndexCache:
    """On-demand chi_{j j1; j2 j3} integrals, keyed by the sorted quadruple."""

    def __init__(self, spectrum: SpectrumResult, g: float):
        self._phi = spectrum.localized_samples()
        self._grid = spectrum.grid
        self._g = g
        self._store: dict[tuple[int, int, int, int], float] = {}

    def value(self, quad: tuple[int, int, int, int]) -> float:
        key = tuple(sorted(quad))
        if key not in self._store:
            ph = self._phi
            self._store[key] = overlap4(
                ph[:, key[0]], ph[:, key[1]], ph[:, key[2]], ph[:, key[3]],
                self._grid, self._g,
            )
        return self._store[key]


def full_rhs(
    state: LatticeState,
    spectrum: SpectrumResult,
    subset: list[int],
    cache: FourIndexCache,
) -> np.ndarray:
    """Exact four-index sum of the unreduced lattice on a small mode subset.

    Cost grows as |subset|^4; this is a validation oracle, not a production
    integrator.  `subset` holds 1-based mode labels matching state.a entries.
    """
    n = len(subset)
    if n > 12:
        raise ValueError(f"full_rhs limited to 12 modes, got {n}")
    if state.a.size != n:
        raise ValueError("state size does not match subset")
    idx = [j - 1 for j in subset]
    eps = np.array([spectrum.modes[i].energy for i in idx])
    a = state.a
    rhs = (eps - state.mu) * a
    for r in range(n):
        acc = 0.0 + 0.0j
        for i1 in range(n):
            for i2 in range(n):
                for i3 in range(n):
                    chi = cache.value((idx[r], idx[i1], idx[i2], idx[i3]))
                    acc += chi * np.conj(a[i1]) * a[i2] * a[i3]
        rhs[r] += acc
    return -1j * rhs


def integrate_lattice(
    state: LatticeState,
    tensors: HoppingTensors,
    energies: np.ndarray,
    t_end: float,
    dt: float = 1e-3,
    stride: int = 10,
) -> LatticeTrajectory:
    """Fixed-step RK4 integration recording every `stride` steps.

    Negative t_end integrates backwards.  Aborts on NaN with the offending
    time stamp.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    steps = int(round(abs(t_end) / dt))
    h = dt if t_end >= 0 else -dt
    a = state.a.astype(complex)
    times = [state.t]
    out = [a.copy()]

    def rhs(vec):
        return reduced_rhs(LatticeState(a=vec, mu=state.mu), tensors, energies)

    t = state.t
    for s in range(1, steps + 1):
        k1 = rhs(a)
        k2 = rhs(a + 0.5 * h * k1)
        k3 = rhs(a + 0.5 * h * k2)
        k4 = rhs(a + h * k3)
        a = a + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = state.t + s * h
        if not np.all(np.isfinite(a)):
            raise FloatingPointError(f"lattice integration produced NaN at t={t}")
        if s % stride == 0 or s == steps:
            times.append(t)
            out.append(a.copy())
    state.a = a
    state.t = t
    return LatticeTrajectory(times=np.array(times), amplitudes=np.array(out))
