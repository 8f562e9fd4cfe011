"""Nonlinear hopping integrals between localized modes.

There is no linear hopping between orthogonal eigenmodes; all coupling comes
from the interaction term through quartic overlap integrals
g * <phi_a phi_b, phi_c phi_d>.  Only the two-mode tensors are materialized:
chi_pair[j,k] = g * int phi_j^2 phi_k^2  (symmetric) and
chi_tilde[j,k] = g * int phi_j^3 phi_k   (asymmetric in general).
Integrals with three or four distinct modes are much smaller still and are
only spot-checked, never stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .potential import Grid
from .spectrum import SpectrumResult


@dataclass(frozen=True)
class HoppingTensors:
    """Pair tensors over the M localized modes, indices 0-based internally."""

    g: float
    chi_diag: np.ndarray = field(repr=False)
    chi_pair: np.ndarray = field(repr=False)
    chi_tilde: np.ndarray = field(repr=False)
    neighbor_lists: list[list[int]] | None = None
    cutoff: float | None = None

    @property
    def M(self) -> int:
        return self.chi_diag.size

    def pair(self, j: int, k: int) -> tuple[float, float, float, float, float]:
        """(chi_j, chi_k, chi_jk, chit_jk, chit_kj) for 1-based mode labels."""
        a, b = j - 1, k - 1
        return (
            float(self.chi_diag[a]),
            float(self.chi_diag[b]),
            float(self.chi_pair[a, b]),
            float(self.chi_tilde[a, b]),
            float(self.chi_tilde[b, a]),
        )

    def restrict(self, labels: list[int]) -> "HoppingTensors":
        """Sub-tensors for a subset of 1-based mode labels (dimer oracle etc.)."""
        idx = np.array([j - 1 for j in labels])
        return HoppingTensors(
            g=self.g,
            chi_diag=self.chi_diag[idx].copy(),
            chi_pair=self.chi_pair[np.ix_(idx, idx)].copy(),
            chi_tilde=self.chi_tilde[np.ix_(idx, idx)].copy(),
        )

    def with_sign(self, g: float) -> "HoppingTensors":
        """Same integrals for the other interaction sign (entries scale with g)."""
        if g not in (+1.0, -1.0, +1, -1):
            raise ValueError(f"interaction sign must be +-1, got {g}")
        factor = g / self.g
        return replace(
            self,
            g=float(g),
            chi_diag=self.chi_diag * factor,
            chi_pair=self.chi_pair * factor,
            chi_tilde=self.chi_tilde * factor,
        )


def overlap4(fa, fb, fc, fd, grid: Grid, g: float = 1.0) -> float:
    """g * int fa*fb*fc*fd dx by the periodic rectangle rule.

    Spectrally accurate for smooth periodic integrands; all four sample
    arrays must live on the same grid.
    """
    for f in (fb, fc, fd):
        if f.shape != fa.shape or fa.shape != grid.x.shape:
            raise ValueError("overlap4 requires samples on a common grid")
    return float(g * np.sum(fa * fb * fc * fd) * grid.dx)


def build_pair_tensors(spectrum: SpectrumResult, g: float) -> HoppingTensors:
    """All M^2 entries of chi_pair and chi_tilde over the localized modes."""
    if spectrum.M < 1:
        raise ValueError("no localized modes to couple")
    phi = spectrum.localized_samples()
    dx = spectrum.grid.dx
    sq = phi**2
    chi_pair = g * (sq.T @ sq) * dx
    chi_pair = 0.5 * (chi_pair + chi_pair.T)  # kill rounding asymmetry
    chi_tilde = g * ((phi**3).T @ phi) * dx
    chi_diag = np.diag(chi_pair).copy()
    # diagonal consistency: chi_jj and chit_jj are the same integral
    np.fill_diagonal(chi_tilde, chi_diag)
    return HoppingTensors(g=float(g), chi_diag=chi_diag, chi_pair=chi_pair, chi_tilde=chi_tilde)


def sparsify(tensors: HoppingTensors, cutoff: float) -> HoppingTensors:
    """Copy with entries below `cutoff` zeroed and per-mode neighbor lists.

    Mode k is a neighbor of j when any of |chi_jk|, |chit_jk|, |chit_kj|
    reaches the cutoff.  The input tensors are left untouched.
    """
    if cutoff < 0:
        raise ValueError(f"cutoff must be >= 0, got {cutoff}")
    strength = np.maximum(
        np.abs(tensors.chi_pair),
        np.maximum(np.abs(tensors.chi_tilde), np.abs(tensors.chi_tilde.T)),
    )
    keep = strength >= cutoff
    np.fill_diagonal(keep, True)
    pair = np.where(keep, tensors.chi_pair, 0.0)
    tilde = np.where(keep, tensors.chi_tilde, 0.0)
    neighbors = [
        [k for k in np.nonzero(keep[j])[0].tolist() if k != j]
        for j in range(tensors.M)
    ]
    return HoppingTensors(
        g=tensors.g,
        chi_diag=tensors.chi_diag.copy(),
        chi_pair=pair,
        chi_tilde=tilde,
        neighbor_lists=neighbors,
        cutoff=float(cutoff),
    )


def sample_higher_order(
    spectrum: SpectrumResult,
    g: float,
    samples: int = 1000,
    seed: int = 0,
) -> float:
    """Max |overlap4| over random quadruples with >= 3 distinct modes.

    These are the terms dropped from the reduced lattice; the returned bound
    documents how small they are for a given spectrum.
    """
    rng = np.random.default_rng(seed)
    phi = spectrum.localized_samples()
    dx = spectrum.grid.dx
    M = spectrum.M
    worst = 0.0
    found = 0
    while found < samples:
        quad = rng.integers(0, M, size=4)
        if np.unique(quad).size < 3:
            continue
        found += 1
        val = abs(np.sum(phi[:, quad[0]] * phi[:, quad[1]] * phi[:, quad[2]] * phi[:, quad[3]]) * dx)
        worst = max(worst, float(val))
    return abs(g) * worst
