"""Two-mode reduction: Hamiltonian dynamics, stationary families, thresholds.

With the ansatz

    a_j = sqrt(N(1+z)/2) exp(i(theta-phi)/2),
    a_k = sqrt(N(1-z)/2) exp(i(theta+phi)/2),   tau = N*chi_jk*t,

the populations obey the canonical pair

    dz/dtau   = (1-z^2) sin(2 phi) + sqrt(1-z^2) (eta_- z + eta_+) sin(phi)
    dphi/dtau = nu + xi_- - (1-xi_+) z - 2 z cos^2(phi)
                - (2 eta_- z^2 + eta_+ z - eta_-) cos(phi)/sqrt(1-z^2)

generated by H(z, phi) below (dz/dtau = -dH/dphi, dphi/dtau = +dH/dz).
Stationary two-mode states are found from the stationarity of the reduced
lattice itself, which is equivalent to dH/dz = 0 at sin(phi) = 0; this is
the ground truth used for family tracing and thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .hopping import HoppingTensors
from .spectrum import SpectrumResult

_MIN_PAIR_COUPLING = 1e-6


@dataclass(frozen=True)
class DimerParams:
    """Raw couplings of a mode pair plus the derived reduced parameters."""

    j: int
    k: int
    eps_j: float
    eps_k: float
    chi_j: float
    chi_k: float
    chi_jk: float
    chit_jk: float
    chit_kj: float
    g: float
    N: float

    def __post_init__(self):
        if abs(self.chi_jk) < _MIN_PAIR_COUPLING:
            raise ValueError(
                f"pair coupling chi_jk={self.chi_jk:.2e} too small; the "
                "two-mode reduction has no meaningful time unit"
            )

    @property
    def nu(self) -> float:
        return (self.eps_j - self.eps_k) / (self.chi_jk * self.N)

    @property
    def xi_plus(self) -> float:
        return (self.chi_j + self.chi_k) / (2 * self.chi_jk)

    @property
    def xi_minus(self) -> float:
        return (self.chi_j - self.chi_k) / (2 * self.chi_jk)

    @property
    def eta_plus(self) -> float:
        return (self.chit_jk + self.chit_kj) / self.chi_jk

    @property
    def eta_minus(self) -> float:
        return (self.chit_jk - self.chit_kj) / self.chi_jk

    @property
    def tau_scale(self) -> float:
        """tau = tau_scale * t; negative for attractive interactions."""
        return self.N * self.chi_jk

    @property
    def gauge_mu(self) -> float:
        """Chemical potential for which theta obeys the stated rate equation.

        Equals [mu_j(N/2) + mu_k(N/2) + N*chi_jk]/2 with the monomer
        relation mu_m(N) = eps_m + N*chi_m.
        """
        muj = self.eps_j + (self.N / 2) * self.chi_j
        muk = self.eps_k + (self.N / 2) * self.chi_k
        return 0.5 * (muj + muk + self.N * self.chi_jk)

    def with_N(self, N: float) -> "DimerParams":
        return replace(self, N=N)


def dimer_params(
    j: int,
    k: int,
    spectrum: SpectrumResult,
    tensors: HoppingTensors,
    N: float,
) -> DimerParams:
    """Assemble DimerParams for a localized pair (1-based labels)."""
    if j == k:
        raise ValueError("dimer needs two distinct modes")
    for label in (j, k):
        if not 1 <= label <= tensors.M:
            raise ValueError(f"mode {label} outside the localized set 1..{tensors.M}")
    chi_j, chi_k, chi_jk, chit_jk, chit_kj = tensors.pair(j, k)
    return DimerParams(
        j=j,
        k=k,
        eps_j=spectrum.mode(j).energy,
        eps_k=spectrum.mode(k).energy,
        chi_j=chi_j,
        chi_k=chi_k,
        chi_jk=chi_jk,
        chit_jk=chit_jk,
        chit_kj=chit_kj,
        g=tensors.g,
        N=N,
    )


@dataclass
class DimerState:
    z: float
    phi: float
    theta: float = 0.0
    tau: float = 0.0


def dimer_rhs(z: float, phi: float, p: DimerParams) -> tuple[float, float]:
    """(dz/dtau, dphi/dtau); singular at |z| = 1."""
    if abs(z) >= 1:
        raise FloatingPointError(f"population imbalance z={z} left (-1, 1)")
    root = np.sqrt(1 - z * z)
    ep, em = p.eta_plus, p.eta_minus
    dz = (1 - z * z) * np.sin(2 * phi) + root * (em * z + ep) * np.sin(phi)
    dphi = (
        p.nu
        + p.xi_minus
        - (1 - p.xi_plus) * z
        - 2 * z * np.cos(phi) ** 2
        - (2 * em * z * z + ep * z - em) * np.cos(phi) / root
    )
    return float(dz), float(dphi)


def hamiltonian(z, phi, p: DimerParams):
    """Conserved H(z, phi) of the population/phase dynamics."""
    z = np.asarray(z, dtype=float)
    phi = np.asarray(phi, dtype=float)
    root = np.sqrt(1 - z * z)
    out = (
        (1 - z * z) * np.cos(phi) ** 2
        + root * (p.eta_minus * z + p.eta_plus) * np.cos(phi)
        - 0.5 * (1 - p.xi_plus) * z * z
        + (p.nu + p.xi_minus) * z
    )
    return out if out.ndim else float(out)


def theta_rate(z: float, phi: float, p: DimerParams) -> float:
    """d(theta)/dtau in the gauge mu = p.gauge_mu, with theta(0) = 0."""
    root = np.sqrt(1 - z * z)
    ep, em = p.eta_plus, p.eta_minus
    return float(
        (ep * z * z - em * z - 2 * ep) * np.cos(phi) / root
        - 2 * np.cos(phi) ** 2
        - p.xi_minus * z
    )


@dataclass(frozen=True)
class DimerTrajectory:
    taus: np.ndarray
    z: np.ndarray
    phi: np.ndarray
    theta: np.ndarray

    def amplitudes(self, p: DimerParams) -> np.ndarray:
        """(samples, 2) complex a_j, a_k reconstructed from the ansatz."""
        aj = np.sqrt(p.N * (1 + self.z) / 2) * np.exp(1j * (self.theta - self.phi) / 2)
        ak = np.sqrt(p.N * (1 - self.z) / 2) * np.exp(1j * (self.theta + self.phi) / 2)
        return np.column_stack([aj, ak])


def integrate_dimer(
    s0: DimerState,
    p: DimerParams,
    tau_end: float,
    dtau: float = 1e-3,
    stride: int = 1,
) -> DimerTrajectory:
    """RK4 trajectory of (z, phi, theta); negative tau_end runs backwards.

    Aborts when |z| approaches 1 (the reduction is singular there; orbits on
    the separatrix level may graze it).
    """
    if abs(s0.z) >= 1:
        raise ValueError(f"|z0| must be < 1, got {s0.z}")
    if dtau <= 0:
        raise ValueError(f"dtau must be positive, got {dtau}")
    steps = int(round(abs(tau_end) / dtau))
    h = dtau if tau_end >= 0 else -dtau

    def rhs(s):
        dz, dphi = dimer_rhs(s[0], s[1], p)
        return np.array([dz, dphi, theta_rate(s[0], s[1], p)])

    s = np.array([s0.z, s0.phi, s0.theta])
    taus = [s0.tau]
    out = [s.copy()]
    for n in range(1, steps + 1):
        k1 = rhs(s)
        k2 = rhs(s + 0.5 * h * k1)
        k3 = rhs(s + 0.5 * h * k2)
        k4 = rhs(s + h * k3)
        s = s + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if abs(s[0]) >= 1 - 1e-6:
            raise FloatingPointError(
                f"trajectory reached |z|={abs(s[0]):.8f} at tau={s0.tau + n * h:.4f} "
                "(separatrix/singular)"
            )
        if n % stride == 0 or n == steps:
            taus.append(s0.tau + n * h)
            out.append(s.copy())
    arr = np.array(out)
    return DimerTrajectory(taus=np.array(taus), z=arr[:, 0], phi=arr[:, 1], theta=arr[:, 2])


@dataclass(frozen=True)
class FixedPoint:
    z: float
    sigma: int           # +1: phi = 0 (in phase), -1: phi = pi (out of phase)
    kind: str            # center | saddle | degenerate
    lambda_sq: float     # product of the off-diagonal Jacobian entries

    @property
    def phi(self) -> float:
        return 0.0 if self.sigma > 0 else np.pi


def _stationarity_mismatch(z, sigma: int, p: DimerParams):
    """dphi/dtau at sin(phi)=0, cos(phi)=sigma; roots are fixed points."""
    z = np.asarray(z, dtype=float)
    root = np.sqrt(1 - z * z)
    ep, em = p.eta_plus, p.eta_minus
    return (
        p.nu
        + p.xi_minus
        - (3 - p.xi_plus) * z
        - sigma * (2 * em * z * z + ep * z - em) / root
    )


def _jacobian_products(z: float, sigma: int, p: DimerParams) -> float:
    """lambda^2 = dF1/dphi * dF2/dz at a fixed point (Jacobian is anti-diagonal)."""
    root = np.sqrt(1 - z * z)
    ep, em = p.eta_plus, p.eta_minus
    dF1_dphi = 2 * (1 - z * z) + root * (em * z + ep) * sigma
    dF2_dz = (
        -(1 - p.xi_plus)
        - 2
        - sigma * ((4 * em * z + ep) / root + (2 * em * z * z + ep * z - em) * z / root**3)
    )
    return float(dF1_dphi * dF2_dz)


def fixed_points(
    p: DimerParams,
    scan_points: int = 10_000,
    degenerate_tol: float = 1e-10,
) -> list[FixedPoint]:
    """All fixed points of the (z, phi) flow, classified by linearization.

    Fixed points only exist at phi = 0 or pi.  A dense scan of z locates
    sign changes of dphi/dtau which are then bisected to 1e-12.  The purely
    imaginary eigenvalue pair of the anti-diagonal Jacobian marks a center,
    a real pair marks a saddle.
    """
    eps = 1e-9
    zs = np.linspace(-1 + eps, 1 - eps, scan_points)
    found: list[FixedPoint] = []
    for sigma in (+1, -1):
        vals = _stationarity_mismatch(zs, sigma, p)
        sign = np.sign(vals)
        crossings = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
        for c in crossings:
            a, b = zs[c], zs[c + 1]
            fa = _stationarity_mismatch(a, sigma, p)
            while b - a > 1e-12:
                mid = 0.5 * (a + b)
                fm = _stationarity_mismatch(mid, sigma, p)
                if fa * fm <= 0:
                    b = mid
                else:
                    a, fa = mid, fm
            z0 = 0.5 * (a + b)
            lam2 = _jacobian_products(z0, sigma, p)
            if np.sqrt(abs(lam2)) < degenerate_tol:
                kind = "degenerate"
            elif lam2 < 0:
                kind = "center"
            else:
                kind = "saddle"
            found.append(FixedPoint(z=float(z0), sigma=sigma, kind=kind, lambda_sq=lam2))
    return found


@dataclass(frozen=True)
class StationaryState:
    """One stationary two-mode solution: amplitudes sqrt(N(1+-z)/2), sigma sign."""

    z: float
    sigma: int
    N: float
    mu: float


def _mu_slopes(z, sigma: int, p: DimerParams):
    """Per-mode stationarity functions f_j, f_k with mu = eps + N*f.

    Derived by substituting real amplitudes A = sqrt(N(1+z)/2),
    B = sigma*sqrt(N(1-z)/2) into the reduced lattice and dividing out the
    amplitude; both expressions are linear in N.
    """
    z = np.asarray(z, dtype=float)
    root = np.sqrt(1 - z * z)
    fj = (
        p.chi_j * (1 + z) / 2
        + 1.5 * p.chit_jk * sigma * root
        + 1.5 * p.chi_jk * (1 - z)
        + 0.5 * p.chit_kj * sigma * (1 - z) * np.sqrt((1 - z) / (1 + z))
    )
    fk = (
        p.chi_k * (1 - z) / 2
        + 1.5 * p.chit_kj * sigma * root
        + 1.5 * p.chi_jk * (1 + z)
        + 0.5 * p.chit_jk * sigma * (1 + z) * np.sqrt((1 + z) / (1 - z))
    )
    return fj, fk


def stationary_two_mode(z: float, sigma: int, p: DimerParams) -> StationaryState:
    """Solve the two stationarity conditions for (N, mu) at given (z, sigma).

    Returns the atom number N(z) = (eps_j - eps_k)/(f_k - f_j) and the
    chemical potential mu(z) = eps_j + N*f_j.  Rejects N <= 0 (no physical
    solution there) and |f_k - f_j| ~ 0 (the divergent-N asymptotes).
    """
    if abs(z) >= 1:
        raise ValueError(f"|z| must be < 1, got {z}")
    if sigma not in (+1, -1):
        raise ValueError(f"sigma must be +-1, got {sigma}")
    fj, fk = _mu_slopes(z, sigma, p)
    denom = fk - fj
    if abs(denom) < 1e-12:
        raise ZeroDivisionError(
            f"N(z) diverges at z={z}, sigma={sigma} (stationarity slopes cross)"
        )
    N = (p.eps_j - p.eps_k) / denom
    if N <= 0:
        raise ValueError(f"no physical solution: N(z={z}, sigma={sigma}) = {N:.4f} <= 0")
    mu = p.eps_j + N * float(fj)
    return StationaryState(z=float(z), sigma=sigma, N=float(N), mu=float(mu))


@dataclass(frozen=True)
class FamilyBranch:
    """One maximal z-interval with N(z) > 0 for fixed sigma.

    branch_kind is "linear-limit" when N -> 0 at a z -> +-1 endpoint (the
    family bifurcates from a single linear mode) and "upper" otherwise
    (born at the saddle-node threshold N_th = min N over the branch).
    """

    sigma: int
    z: np.ndarray = field(repr=False)
    N: np.ndarray = field(repr=False)
    mu: np.ndarray = field(repr=False)
    stable: np.ndarray = field(repr=False)
    branch_kind: str
    N_th: float | None
    attached_mode: int | None


def _branch_segments(valid: np.ndarray) -> list[tuple[int, int]]:
    edges = np.diff(valid.astype(int))
    starts = (np.nonzero(edges == 1)[0] + 1).tolist()
    ends = (np.nonzero(edges == -1)[0] + 1).tolist()
    if valid[0]:
        starts = [0] + starts
    if valid[-1]:
        ends = ends + [valid.size]
    return list(zip(starts, ends))


def trace_families(
    p_base: DimerParams,
    sigmas: tuple[int, ...] = (+1, -1),
    z_resolution: int = 4001,
    edge: float = 1e-6,
) -> list[FamilyBranch]:
    """Sweep z over (-1, 1) and collect the stationary families per sigma.

    Stability of each sample is classified dynamically from the Jacobian at
    the corresponding (N, z) fixed point.  The saddle-node value N_th of an
    upper branch is refined by golden-section polish around the grid
    minimum.
    """
    branches: list[FamilyBranch] = []
    zs = np.linspace(-1 + edge, 1 - edge, z_resolution)
    for sigma in sigmas:
        fj, fk = _mu_slopes(zs, sigma, p_base)
        denom = fk - fj
        with np.errstate(divide="ignore", invalid="ignore"):
            N = np.where(np.abs(denom) > 1e-15, (p_base.eps_j - p_base.eps_k) / denom, np.nan)
        mu = p_base.eps_j + N * fj
        valid = np.isfinite(N) & (N > 0)
        for lo, hi in _branch_segments(valid):
            seg_z, seg_N, seg_mu = zs[lo:hi], N[lo:hi], mu[lo:hi]
            if seg_z.size < 3:
                continue
            # N -> 0 as z -> +-1 wherever N stays positive, so a segment
            # touching the scan edge is a family with a linear limit
            touches_right = hi == zs.size
            touches_left = lo == 0
            stable = np.empty(seg_z.size, dtype=bool)
            for i in range(seg_z.size):
                lam2 = _jacobian_products(seg_z[i], sigma, p_base.with_N(seg_N[i]))
                stable[i] = lam2 < 0
            if touches_right or touches_left:
                kind = "linear-limit"
                attached = p_base.j if touches_right else p_base.k
                n_th = None
            else:
                kind = "upper"
                attached = None
                n_th = _refine_min_N(seg_z, seg_N, sigma, p_base)
            branches.append(
                FamilyBranch(
                    sigma=sigma,
                    z=seg_z,
                    N=seg_N,
                    mu=seg_mu,
                    stable=stable,
                    branch_kind=kind,
                    N_th=n_th,
                    attached_mode=attached,
                )
            )
    return branches


def _refine_min_N(seg_z: np.ndarray, seg_N: np.ndarray, sigma: int, p: DimerParams) -> float:
    from scipy.optimize import minimize_scalar

    i = int(np.argmin(seg_N))
    lo = seg_z[max(i - 1, 0)]
    hi = seg_z[min(i + 1, seg_z.size - 1)]

    def n_of_z(z):
        fj, fk = _mu_slopes(z, sigma, p)
        return (p.eps_j - p.eps_k) / (fk - fj)

    res = minimize_scalar(n_of_z, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.fun)


def saddle_node_threshold(p_base: DimerParams) -> float | None:
    """Smallest N on the branches without a linear limit, if any exist."""
    uppers = [b.N_th for b in trace_families(p_base) if b.branch_kind == "upper"]
    return min(uppers) if uppers else None


def phase_portrait(
    p: DimerParams,
    phi_points: int = 400,
    z_points: int = 400,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """H sampled on a (phi, z) grid over [-pi, pi] x (-1, 1)."""
    phis = np.linspace(-np.pi, np.pi, phi_points)
    zs = np.linspace(-1 + 1e-6, 1 - 1e-6, z_points)
    P, Z = np.meshgrid(phis, zs)
    return phis, zs, hamiltonian(Z, P, p)


def eq12_comparison(p: DimerParams) -> list[dict]:
    """Residuals of two closed-form fixed-point conditions at each root.

    "derived" is nu = (3 - xi_+) z - xi_- + sigma (2 eta_- z^2 + eta_+ z -
    eta_-)/sqrt(1-z^2), the dH/dz = 0 condition consistent with the flow;
    "printed" is the variant nu = (1 - xi_+) z - xi_- + sigma (eta_+ z^2 -
    eta_- z - 2 eta_+)/sqrt(1-z^2).  Both are evaluated at the numerically
    located fixed points so their disagreement is explicit in the output.
    """
    rows = []
    for fp in fixed_points(p):
        z, sigma = fp.z, fp.sigma
        root = np.sqrt(1 - z * z)
        derived = (3 - p.xi_plus) * z - p.xi_minus + sigma * (
            2 * p.eta_minus * z * z + p.eta_plus * z - p.eta_minus
        ) / root
        printed = (1 - p.xi_plus) * z - p.xi_minus + sigma * (
            p.eta_plus * z * z - p.eta_minus * z - 2 * p.eta_plus
        ) / root
        rows.append(
            {
                "z": z,
                "sigma": sigma,
                "kind": fp.kind,
                "residual_derived": abs(p.nu - derived),
                "residual_printed": abs(p.nu - printed),
            }
        )
    return rows
