import numpy as np
import pytest

from qpbec.dimer import (
    DimerParams,
    DimerState,
    dimer_params,
    dimer_rhs,
    eq12_comparison,
    fixed_points,
    hamiltonian,
    integrate_dimer,
    phase_portrait,
    stationary_two_mode,
    theta_rate,
    trace_families,
)
from qpbec.lattice import LatticeState, integrate_lattice, reduced_rhs

from conftest import PAIR_J, PAIR_K


def synthetic_params(eps_j=0.0, eps_k=0.0, chi_j=0.0, chi_k=0.0, chi_jk=1.0,
                     chit_jk=0.0, chit_kj=0.0, g=1.0, N=1.0):
    return DimerParams(j=1, k=2, eps_j=eps_j, eps_k=eps_k, chi_j=chi_j,
                       chi_k=chi_k, chi_jk=chi_jk, chit_jk=chit_jk,
                       chit_kj=chit_kj, g=g, N=N)


@pytest.fixture(scope="module")
def params_gm1_N2(paper_spectrum, tensors_pos):
    return dimer_params(PAIR_J, PAIR_K, paper_spectrum, tensors_pos.with_sign(-1.0), N=2.0)


@pytest.fixture(scope="module")
def params_gm1_N03(paper_spectrum, tensors_pos):
    return dimer_params(PAIR_J, PAIR_K, paper_spectrum, tensors_pos.with_sign(-1.0), N=0.3)


@pytest.fixture(scope="module")
def params_gp1_N2(paper_spectrum, tensors_pos):
    return dimer_params(PAIR_J, PAIR_K, paper_spectrum, tensors_pos, N=2.0)


class TestDimerParams:
    def test_rejects_identical_modes(self, paper_spectrum, tensors_pos):
        with pytest.raises(ValueError):
            dimer_params(PAIR_J, PAIR_J, paper_spectrum, tensors_pos, N=1.0)

    def test_rejects_uncoupled_pair(self, paper_spectrum, tensors_pos):
        # distant modes have chi_jk ~ 0 and no meaningful reduction
        strength = np.abs(tensors_pos.chi_pair[PAIR_J - 1])
        weakest = int(np.argmin(strength + np.eye(89)[PAIR_J - 1])) + 1
        with pytest.raises(ValueError):
            dimer_params(PAIR_J, weakest, paper_spectrum, tensors_pos, N=1.0)

    def test_energy_mismatch(self, params_gm1_N2):
        assert params_gm1_N2.eps_j - params_gm1_N2.eps_k == pytest.approx(-0.143, abs=0.005)

    def test_scaling_with_N(self, params_gm1_N2):
        doubled = params_gm1_N2.with_N(4.0)
        assert doubled.nu == pytest.approx(params_gm1_N2.nu / 2, rel=1e-14)
        for name in ("xi_plus", "xi_minus", "eta_plus", "eta_minus"):
            assert getattr(doubled, name) == getattr(params_gm1_N2, name)

    def test_derived_values_consistent(self, params_gm1_N2):
        p = params_gm1_N2
        assert p.nu == pytest.approx((p.eps_j - p.eps_k) / (p.chi_jk * p.N), rel=1e-14)
        assert p.xi_plus == pytest.approx((p.chi_j + p.chi_k) / (2 * p.chi_jk), rel=1e-14)
        assert p.eta_minus == pytest.approx((p.chit_jk - p.chit_kj) / p.chi_jk, rel=1e-14)


class TestDimerRhs:
    def test_plain_substitution(self):
        p = synthetic_params(eps_j=0.4, eps_k=0.1, chi_j=0.3, chi_k=0.5, N=2.0)
        dz, dphi = dimer_rhs(0.0, 0.0, p)
        assert dz == 0.0
        assert dphi == pytest.approx(p.nu + p.xi_minus, rel=1e-14)

    def test_phi_parity(self, params_gm1_N2):
        rng = np.random.default_rng(0)
        for _ in range(25):
            z = rng.uniform(-0.9, 0.9)
            phi = rng.uniform(-np.pi, np.pi)
            dz1, dphi1 = dimer_rhs(z, phi, params_gm1_N2)
            dz2, dphi2 = dimer_rhs(z, -phi, params_gm1_N2)
            assert dz2 == pytest.approx(-dz1, abs=1e-14)
            assert dphi2 == pytest.approx(dphi1, abs=1e-14)

    def test_singular_at_unit_imbalance(self, params_gm1_N2):
        with pytest.raises(FloatingPointError):
            dimer_rhs(1.0, 0.3, params_gm1_N2)

    @pytest.mark.parametrize("g", [-1.0, 1.0])
    def test_canonical_structure_finite_differences(self, paper_spectrum, tensors_pos, g):
        p = dimer_params(PAIR_J, PAIR_K, paper_spectrum, tensors_pos.with_sign(g), N=1.3)
        rng = np.random.default_rng(42)
        h = 1e-6
        for _ in range(1000):
            z = rng.uniform(-0.85, 0.85)
            phi = rng.uniform(-np.pi, np.pi)
            dz, dphi = dimer_rhs(z, phi, p)
            dH_dphi = (hamiltonian(z, phi + h, p) - hamiltonian(z, phi - h, p)) / (2 * h)
            dH_dz = (hamiltonian(z + h, phi, p) - hamiltonian(z - h, phi, p)) / (2 * h)
            assert dz == pytest.approx(-dH_dphi, abs=1e-7)
            assert dphi == pytest.approx(dH_dz, abs=1e-7)


class TestHamiltonian:
    def test_zero_point(self, params_gm1_N2):
        assert hamiltonian(0.0, np.pi / 2, params_gm1_N2) == pytest.approx(0.0, abs=1e-15)

    def test_in_phase_point(self, params_gm1_N2):
        expected = 1.0 + params_gm1_N2.eta_plus
        assert hamiltonian(0.0, 0.0, params_gm1_N2) == pytest.approx(expected, rel=1e-14)

    def test_conservation_along_trajectory(self, params_gm1_N2):
        traj = integrate_dimer(DimerState(z=0.2, phi=1.0), params_gm1_N2,
                               tau_end=100.0, dtau=1e-3, stride=100)
        H = hamiltonian(traj.z, traj.phi, params_gm1_N2)
        assert np.max(np.abs(H - H[0])) < 1e-8


class TestThetaRate:
    def test_vanishing_point(self):
        p = synthetic_params(chi_j=0.2, chi_k=0.2, chit_jk=0.4, chit_kj=-0.1)
        assert theta_rate(0.3, np.pi / 2, p) == pytest.approx(0.0, abs=1e-15)

    def test_plain_substitution(self, params_gm1_N2):
        expected = -2 * params_gm1_N2.eta_plus - 2
        assert theta_rate(0.0, 0.0, params_gm1_N2) == pytest.approx(expected, rel=1e-14)

    @pytest.mark.parametrize("g", [1.0, -1.0])
    def test_reconstruction_matches_two_mode_lattice(self, paper_spectrum, tensors_pos, g):
        # end-to-end oracle: integrate (z, phi, theta), rebuild a_j(t), a_k(t)
        # and compare against the reduced lattice restricted to the pair
        tensors = tensors_pos.with_sign(g)
        N = 0.7
        p = dimer_params(PAIR_J, PAIR_K, paper_spectrum, tensors, N=N)
        z0, phi0 = 0.31, 0.7
        tau_end = 10.0 * np.sign(p.tau_scale)
        n_steps = 20000
        dtau = abs(tau_end) / n_steps
        traj = integrate_dimer(DimerState(z=z0, phi=phi0), p, tau_end, dtau)
        amps = traj.amplitudes(p)

        sub = tensors.restrict([PAIR_J, PAIR_K])
        eps = np.array([p.eps_j, p.eps_k])
        a0 = np.array(
            [
                np.sqrt(N * (1 + z0) / 2) * np.exp(-1j * phi0 / 2),
                np.sqrt(N * (1 - z0) / 2) * np.exp(+1j * phi0 / 2),
            ]
        )
        t_end = tau_end / p.tau_scale
        state = LatticeState(a=a0, mu=p.gauge_mu)
        lat = integrate_lattice(state, sub, eps, t_end, dt=abs(t_end) / n_steps, stride=1)
        assert np.max(np.abs(amps - lat.amplitudes)) < 1e-6


class TestIntegrateDimer:
    def test_center_is_stationary(self, params_gm1_N2):
        center = [fp for fp in fixed_points(params_gm1_N2) if fp.kind == "center"][0]
        traj = integrate_dimer(DimerState(z=center.z, phi=center.phi),
                               params_gm1_N2, tau_end=10.0, dtau=1e-3, stride=50)
        assert np.max(np.abs(traj.z - center.z)) < 1e-8
        assert np.max(np.abs(np.cos(traj.phi) - np.cos(center.phi))) < 1e-8

    def test_libration_near_center(self, params_gm1_N2):
        center = [fp for fp in fixed_points(params_gm1_N2) if fp.kind == "center"][0]
        dz0 = 0.01
        traj = integrate_dimer(DimerState(z=center.z + dz0, phi=center.phi),
                               params_gm1_N2, tau_end=100.0, dtau=1e-3, stride=100)
        assert np.max(np.abs(traj.z - center.z)) < 2 * dz0

    def test_saddle_escape_bounded_by_level_set(self, params_gm1_N2):
        saddle = [fp for fp in fixed_points(params_gm1_N2) if fp.kind == "saddle"][0]
        assert saddle.sigma == +1
        assert saddle.z == pytest.approx(0.45, abs=0.05)
        s0 = DimerState(z=saddle.z + 1e-6, phi=saddle.phi)
        traj = integrate_dimer(s0, params_gm1_N2, tau_end=40.0, dtau=1e-3, stride=20)
        # exponential departure from the saddle...
        assert np.max(np.abs(traj.z - saddle.z)) > 0.1
        # ...while staying pinned to the homoclinic level set
        H = hamiltonian(traj.z, traj.phi, params_gm1_N2)
        H_saddle = hamiltonian(saddle.z, saddle.phi, params_gm1_N2)
        assert np.max(np.abs(H - H_saddle)) < 1e-6

    def test_rejects_bad_start(self, params_gm1_N2):
        with pytest.raises(ValueError):
            integrate_dimer(DimerState(z=1.0, phi=0.0), params_gm1_N2, 1.0)


class TestFixedPoints:
    def test_geography_attractive_above_threshold(self, params_gm1_N2):
        fps = fixed_points(params_gm1_N2)
        assert len(fps) == 4
        centers = sorted(
            [(fp.phi, fp.z) for fp in fps if fp.kind == "center"],
            key=lambda t: (t[0], t[1]),
        )
        saddles = [(fp.phi, fp.z) for fp in fps if fp.kind == "saddle"]
        assert len(centers) == 3 and len(saddles) == 1
        assert centers[0][0] == 0.0
        assert centers[0][1] == pytest.approx(-0.80, abs=0.05)
        assert centers[1][1] == pytest.approx(-0.64, abs=0.05)
        assert centers[2][1] == pytest.approx(0.85, abs=0.05)
        assert saddles[0][0] == 0.0
        assert saddles[0][1] == pytest.approx(0.45, abs=0.05)

    def test_geography_below_threshold(self, params_gm1_N03):
        fps = fixed_points(params_gm1_N03)
        assert len(fps) == 2
        assert all(fp.kind == "center" for fp in fps)

    def test_symmetric_dimer_closed_form(self):
        # nu = xi = eta = 0 reduces the root condition to -3z = 0
        p = synthetic_params()
        fps = fixed_points(p)
        assert len(fps) == 2
        assert all(abs(fp.z) < 1e-9 for fp in fps)
        assert all(fp.kind == "center" for fp in fps)
        assert {fp.sigma for fp in fps} == {+1, -1}

    def test_vanishing_N_pushes_roots_to_edge(self, paper_spectrum, tensors_pos):
        p = dimer_params(PAIR_J, PAIR_K, paper_spectrum, tensors_pos, N=1e-4)
        fps = fixed_points(p)
        assert all(abs(fp.z) > 0.99 for fp in fps)


class TestStationaryTwoMode:
    @pytest.mark.parametrize("g,sigma,z", [
        (-1.0, +1, -0.2782), (-1.0, +1, 0.3), (-1.0, -1, -0.62),
        (+1.0, -1, -0.2782), (+1.0, -1, 0.3),
    ])
    def test_states_are_lattice_fixed_points(self, paper_spectrum, tensors_pos, g, sigma, z):
        tensors = tensors_pos.with_sign(g)
        p = dimer_params(PAIR_J, PAIR_K, paper_spectrum, tensors, N=1.0)
        st = stationary_two_mode(z, sigma, p)
        a = np.array(
            [
                np.sqrt(st.N * (1 + z) / 2),
                sigma * np.sqrt(st.N * (1 - z) / 2),
            ],
            dtype=complex,
        )
        sub = tensors.restrict([PAIR_J, PAIR_K])
        eps = np.array([p.eps_j, p.eps_k])
        rhs = reduced_rhs(LatticeState(a=a, mu=st.mu), sub, eps)
        assert np.max(np.abs(rhs)) < 1e-10

    def test_linear_limit(self, params_gm1_N2):
        # for attractive interactions the family reaching mode j is staggered
        st = stationary_two_mode(0.9999995, -1, params_gm1_N2)
        assert st.N < 1e-2
        assert st.mu == pytest.approx(params_gm1_N2.eps_j, abs=1e-2)

    def test_bifurcation_slope_matches_monomer(self, params_gm1_N2):
        # d(mu)/dN at the linear limit of the j-branch equals chi_j
        st = stationary_two_mode(0.99999999, -1, params_gm1_N2)
        slope = (st.mu - params_gm1_N2.eps_j) / st.N
        assert slope == pytest.approx(params_gm1_N2.chi_j, abs=1e-3)
        assert slope == pytest.approx(-0.589, abs=0.01)

    def test_rejects_unphysical(self, params_gm1_N2):
        with pytest.raises(ValueError):
            stationary_two_mode(-0.9, +1, params_gm1_N2)  # N < 0 on this side


class TestTraceFamilies:
    def test_saddle_node_threshold_attractive(self, params_gm1_N2):
        branches = trace_families(params_gm1_N2, z_resolution=8001)
        uppers = [b for b in branches if b.branch_kind == "upper"]
        assert len(uppers) == 1
        assert uppers[0].sigma == +1  # in-phase for attractive interactions
        assert uppers[0].N_th == pytest.approx(0.416, abs=0.03)

    def test_saddle_node_threshold_repulsive(self, params_gp1_N2):
        branches = trace_families(params_gp1_N2, z_resolution=8001)
        uppers = [b for b in branches if b.branch_kind == "upper"]
        assert len(uppers) == 1
        assert uppers[0].sigma == -1  # out-of-phase for repulsive interactions
        assert uppers[0].N_th == pytest.approx(0.401, abs=0.03)

    def test_linear_limit_branches_attach_to_both_modes(self, params_gm1_N2):
        branches = trace_families(params_gm1_N2)
        linear = [b for b in branches if b.branch_kind == "linear-limit"]
        assert {b.attached_mode for b in linear} == {PAIR_J, PAIR_K}
        for b in linear:
            edge_n = b.N[-1] if b.attached_mode == PAIR_J else b.N[0]
            assert edge_n < 5e-3

    def test_upper_branch_stability_criterion(self, params_gm1_N2, params_gp1_N2):
        # stable iff dN/dz < 0 (attractive) or dN/dz > 0 (repulsive); the
        # fold-exchange rule holds near the threshold but breaks above N ~ 12
        # where further bifurcations reshuffle stability, so test to N <= 8
        for p, sign in ((params_gm1_N2, -1.0), (params_gp1_N2, +1.0)):
            upper = [b for b in trace_families(p) if b.branch_kind == "upper"][0]
            dN = np.gradient(upper.N, upper.z)
            keep = np.zeros(upper.z.size, dtype=bool)
            keep[2:-2] = upper.N[2:-2] <= 8.0
            criterion = sign * dN[keep] > 0
            assert keep.sum() > 100
            assert np.array_equal(upper.stable[keep], criterion)

    def test_family_symmetry_under_mode_swap(self, paper_spectrum, tensors_pos):
        p = dimer_params(PAIR_J, PAIR_K, paper_spectrum, tensors_pos, N=1.0)
        q = dimer_params(PAIR_K, PAIR_J, paper_spectrum, tensors_pos, N=1.0)
        zs = np.linspace(-0.9, 0.9, 181)
        for sigma in (+1, -1):
            for z in zs:
                try:
                    a = stationary_two_mode(z, sigma, p)
                except (ValueError, ZeroDivisionError):
                    continue
                b = stationary_two_mode(-z, sigma, q)
                assert b.N == pytest.approx(a.N, rel=1e-10)
                assert b.mu == pytest.approx(a.mu, rel=1e-10)


class TestPhasePortrait:
    def test_grid_shape_and_conservation(self, params_gm1_N2):
        phis, zs, H = phase_portrait(params_gm1_N2, 100, 120)
        assert H.shape == (120, 100)
        # orbit samples live on level sets of the same H function
        traj = integrate_dimer(DimerState(z=0.1, phi=0.5), params_gm1_N2,
                               tau_end=20.0, dtau=1e-3, stride=100)
        along = hamiltonian(traj.z, traj.phi, params_gm1_N2)
        assert np.max(np.abs(along - along[0])) < 1e-8

    def test_fixed_point_counts_match_portrait_regimes(
        self, params_gm1_N03, params_gm1_N2, paper_spectrum, tensors_pos
    ):
        assert len(fixed_points(params_gm1_N03)) == 2
        assert len(fixed_points(params_gm1_N2)) == 4
        p_rep_03 = dimer_params(PAIR_J, PAIR_K, paper_spectrum, tensors_pos, N=0.3)
        p_rep_2 = dimer_params(PAIR_J, PAIR_K, paper_spectrum, tensors_pos, N=2.0)
        assert len(fixed_points(p_rep_03)) == 2
        assert len(fixed_points(p_rep_2)) == 4


class TestEq12Comparison:
    def test_derived_condition_holds_printed_does_not(self, params_gm1_N2):
        rows = eq12_comparison(params_gm1_N2)
        assert len(rows) == 4
        for row in rows:
            assert row["residual_derived"] < 1e-10
            # the printed variant is inconsistent with the flow it came from
            assert row["residual_printed"] > 1e-3
