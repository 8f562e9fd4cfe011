"""Periodic approximants of the two-color incommensurate potential.

The potential is V1*cos(2x) + V2*cos(2*beta*x + theta) with beta the golden
ratio.  Replacing beta by a continued-fraction convergent p/q makes the
potential periodic with period pi*q, so periodic boundary conditions can be
imposed on the interval [-pi*q/2, pi*q/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# q beyond 2^52 can no longer be represented exactly through L = pi*q in
# float64, which silently breaks the periodicity contract.
_MAX_SAFE_Q = 2 ** 52


def golden_convergent(n: int) -> tuple[int, int]:
    """Return the n-th continued-fraction convergent (p, q) of (sqrt(5)+1)/2.

    Index convention: n=1 gives 2/1 (the first convergent after 1/1) and
    n=9 gives 89/55.  Successive convergents are ratios of Fibonacci numbers,
    p and q are always coprime.
    """
    if n < 1:
        raise ValueError(f"convergent order must be >= 1, got {n}")
    p, q = 1, 1
    for _ in range(n):
        p, q = p + q, p
        if q > _MAX_SAFE_Q:
            raise OverflowError(
                f"convergent order {n} gives a denominator beyond the exactly "
                f"representable integer range"
            )
    return p, q


@dataclass(frozen=True)
class PotentialSpec:
    """Parameters of one periodic approximant.

    V1, V2 are the sublattice amplitudes in recoil-energy units, theta the
    phase shift breaking spatial symmetry, and p/q the rational approximant
    of the period ratio (coprime).  The domain length is L = pi*q.
    """

    V1: float
    V2: float
    theta: float
    n: int
    p: int
    q: int

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise ValueError(f"p, q must be positive, got ({self.p}, {self.q})")
        if math.gcd(self.p, self.q) != 1:
            raise ValueError(f"p={self.p} and q={self.q} are not coprime")

    @classmethod
    def golden(cls, n: int, V1: float, V2: float, theta: float) -> "PotentialSpec":
        """Spec for the n-th golden-ratio convergent."""
        p, q = golden_convergent(n)
        return cls(V1=V1, V2=V2, theta=theta, n=n, p=p, q=q)

    @property
    def L(self) -> float:
        """Domain length pi*q."""
        return math.pi * self.q


def sample_potential(spec: PotentialSpec, x):
    """Evaluate V(x) = V1*cos(2x) + V2*cos(2*(p/q)*x + theta).

    Accepts scalars or arrays; periodic with period spec.L.
    """
    x = np.asarray(x, dtype=float)
    out = spec.V1 * np.cos(2.0 * x) + spec.V2 * np.cos(
        2.0 * (spec.p / spec.q) * x + spec.theta
    )
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L/2, L/2), sized as a power of two."""

    points: int
    dx: float
    x: np.ndarray = field(repr=False)

    @property
    def length(self) -> float:
        return self.points * self.dx


def make_grid(spec: PotentialSpec, points: int = 4096) -> Grid:
    """Build the discretization grid for a potential spec.

    `points` must be a power of two (fast transforms downstream) and at
    least 4*q so both sublattices are resolved.
    """
    if points < 4 or points & (points - 1) != 0:
        raise ValueError(f"points must be a power of two >= 4, got {points}")
    if points < 4 * spec.q:
        raise ValueError(
            f"points={points} under-resolves the approximant; need >= {4 * spec.q}"
        )
    L = spec.L
    dx = L / points
    x = -L / 2 + dx * np.arange(points)
    return Grid(points=points, dx=dx, x=x)
