import numpy as np
import pytest

from qbeckner import linalg as la
from qbeckner import semigroup as sg
from qbeckner import transport as tp
from qbeckner.entropy import relative_density
from qbeckner.errors import KernelComponent, NoJumps, SingularState
from qbeckner.kernels import Kernel1, kappa_alpha_kernel

from conftest import SIGMA_STAR


class TestMetricKernel:
    def test_p2_is_state_weighting(self, rng):
        rho = la.random_density(rng, 2, floor=0.05)
        K = tp.MetricKernel(rho, SIGMA_STAR, 2.0, omega=0.4)
        A = la.random_hermitian(rng, 2)
        half = la.matrix_power_hermitian(SIGMA_STAR, 0.5)
        assert la.frob(K.apply(A) - half @ A @ half) <= 1e-12

    def test_solve_inverts_apply(self, rng):
        rho = la.random_density(rng, 3, floor=0.05)
        sigma = la.random_density(rng, 3, floor=0.05)
        K = tp.MetricKernel(rho, sigma, 1.4, omega=-0.7)
        A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        assert la.frob(K.solve(K.apply(A)) - A) <= 1e-10 * la.frob(A)

    def test_matrix_is_positive_definite(self, rng):
        rho = la.random_density(rng, 2, floor=0.05)
        M = tp.MetricKernel(rho, SIGMA_STAR, 1.5, omega=0.3).matrix()
        assert la.frob(M - M.conj().T) <= 1e-10 * la.frob(M)
        assert np.min(np.linalg.eigvalsh(la.herm(M))) > 0

    def test_invariant_state_kernel_identity(self, rng):
        # [sigma]_{p,0} equals the inverse power-difference weighting
        sigma = la.random_density(rng, 3, floor=0.05)
        p = 1.6
        M = tp.MetricKernel(sigma, sigma, p, 0.0).matrix()
        kap = kappa_alpha_kernel(1.0 / p)
        inv = Kernel1("1/kappa", f=lambda x: 1.0 / kap.f(x), domain_min=0.0,
                      allow_boundary=False)
        ref = la.j_kernel_super(sigma, inv)
        assert la.frob(M - ref) <= 1e-10 * la.frob(ref)

    def test_near_one_matches_logarithmic_mean(self, rng):
        rho = la.random_density(rng, 3, floor=0.05)
        sigma = la.random_density(rng, 3, floor=0.05)
        A = la.random_hermitian(rng, 3)
        out = tp.MetricKernel(rho, sigma, 1.001, omega=0.4).apply(A)
        ref = tp.carlen_maas_apply(rho, 0.4, A)
        assert la.frob(out - ref) <= 1e-2 * la.frob(ref)

    def test_continuity_in_p(self, rng):
        rho = la.random_density(rng, 3, floor=0.05)
        sigma = la.random_density(rng, 3, floor=0.05)
        A = la.random_hermitian(rng, 3)
        base = tp.MetricKernel(rho, sigma, 1.5, 0.3).apply(A)
        moved = tp.MetricKernel(rho, sigma, 1.5 + 1e-4, 0.3).apply(A)
        assert la.frob(base - moved) <= 1e-3 * la.frob(base)

    def test_singular_state_rejected(self):
        with pytest.raises(SingularState):
            tp.MetricKernel(np.diag([1.0, 0.0]).astype(complex), SIGMA_STAR, 1.5)


class TestOnsager:
    def test_identity_in_kernel(self, dbc3, rng):
        assert la.frob(tp.onsager_apply(dbc3, la.random_density(rng, 3, floor=0.05),
                                        1.5, np.eye(3))) <= 1e-12

    def test_metric_tensor_positive(self, rng, dbc3):
        rho = la.random_density(rng, 3, floor=0.05)
        nu = la.traceless_part(la.random_hermitian(rng, 3))
        assert tp.onsager_tensor(dbc3, rho, 1.5, nu, nu) > 0

    def test_flat_pauli_half(self, rng, depol_pauli):
        # D_2 acts as division by 2 on traceless directions
        nu = la.traceless_part(la.random_hermitian(rng, 2))
        out = tp.onsager_apply(depol_pauli, np.eye(2) / 2, 2.0, nu)
        assert la.frob(out - nu / 2.0) <= 1e-12

    def test_trace_component_rejected(self, rng, dbc3):
        with pytest.raises(KernelComponent):
            tp.onsager_pinv_apply(dbc3, la.random_density(rng, 3, floor=0.05),
                                  1.5, np.eye(3))


class TestGradientFlow:
    @pytest.mark.parametrize("p", [1.3, 1.7, 2.0])
    def test_residual_small(self, rng, dbc3, p):
        rho = la.random_density(rng, 3, floor=0.05)
        assert tp.grad_flow_residual(dbc3, rho, p) <= 1e-8

    def test_stationary_point(self, depol2):
        lhs = tp.onsager_apply(depol2, SIGMA_STAR, 1.5,
                               np.zeros((2, 2), dtype=complex))
        assert la.frob(lhs) <= 1e-14
        assert la.frob(depol2.apply_dual(SIGMA_STAR)) <= 1e-12

    def test_commuting_diagonal_reduction(self, rng, depol2):
        # diagonal rho with diagonal sigma reduces to the classical identity
        rho = np.diag([0.6, 0.4]).astype(complex)
        for p in (1.3, 1.7):
            assert tp.grad_flow_residual(depol2, rho, p) <= 1e-9


class TestW2Solver:
    def test_same_endpoints_zero(self, dbc2):
        rho = np.diag([0.6, 0.4]).astype(complex)
        dist, path = tp.w2p_solve(dbc2, rho, rho, 1.5, tp.W2Opts(N=6))
        assert dist <= 1e-6
        assert max(np.abs(path.momenta).max(), 0.0) <= 1e-5

    def test_antipodal_flat_anchor(self, depol_pauli):
        r0 = np.diag([1.0, 0.0]).astype(complex)
        r1 = np.diag([0.0, 1.0]).astype(complex)
        dist, path = tp.w2p_solve(depol_pauli, r0, r1, 2.0, tp.W2Opts(N=20))
        assert dist == pytest.approx(2.0, abs=0.02)
        assert path.converged
        assert path.continuity_residual <= 1e-8
        flat = tp.flat_w22(depol_pauli, r0, r1)
        assert flat == pytest.approx(2.0, abs=1e-9)

    def test_flat_agreement_general_pair(self, rng, dbc2):
        r0 = la.random_density(rng, 2, floor=0.05)
        r1 = la.random_density(rng, 2, floor=0.05)
        dist, _ = tp.w2p_solve(dbc2, r0, r1, 2.0, tp.W2Opts(N=20))
        assert dist == pytest.approx(tp.flat_w22(dbc2, r0, r1), rel=0.01)

    def test_constant_speed(self, rng, dbc2):
        r0 = la.random_density(rng, 2, floor=0.1)
        r1 = la.random_density(rng, 2, floor=0.1)
        _, path = tp.w2p_solve(dbc2, r0, r1, 1.5, tp.W2Opts(N=12))
        ratio = max(path.action_per_step) / min(path.action_per_step)
        assert ratio <= 1.02

    def test_symmetry(self, rng, dbc2):
        r0 = la.random_density(rng, 2, floor=0.1)
        r1 = la.random_density(rng, 2, floor=0.1)
        d01, _ = tp.w2p_solve(dbc2, r0, r1, 1.5, tp.W2Opts(N=10))
        d10, _ = tp.w2p_solve(dbc2, r1, r0, 1.5, tp.W2Opts(N=10))
        assert d01 == pytest.approx(d10, rel=0.01)

    def test_triangle_inequality(self, rng, dbc2):
        states = [la.random_density(rng, 2, floor=0.1) for _ in range(3)]
        opts = tp.W2Opts(N=10)
        d01, _ = tp.w2p_solve(dbc2, states[0], states[1], 1.5, opts)
        d12, _ = tp.w2p_solve(dbc2, states[1], states[2], 1.5, opts)
        d02, _ = tp.w2p_solve(dbc2, states[0], states[2], 1.5, opts)
        assert d02 <= (d01 + d12) * 1.02

    def test_squared_distance_convexity(self, rng, dbc2):
        opts = tp.W2Opts(N=8)
        r0a, r1a = la.random_density(rng, 2, floor=0.1), la.random_density(rng, 2, floor=0.1)
        r0b, r1b = la.random_density(rng, 2, floor=0.1), la.random_density(rng, 2, floor=0.1)
        s = 0.5
        d_mix, _ = tp.w2p_solve(dbc2, (1 - s) * r0a + s * r0b,
                                (1 - s) * r1a + s * r1b, 1.5, opts)
        da, _ = tp.w2p_solve(dbc2, r0a, r1a, 1.5, opts)
        db, _ = tp.w2p_solve(dbc2, r0b, r1b, 1.5, opts)
        assert d_mix**2 <= ((1 - s) * da**2 + s * db**2) * 1.02

    def test_trace_distance_lower_bound(self, rng, dbc2):
        r0 = la.random_density(rng, 2, floor=0.05)
        r1 = la.random_density(rng, 2, floor=0.05)
        for p in (1.3, 2.0):
            dist, _ = tp.w2p_solve(dbc2, r0, r1, p, tp.W2Opts(N=10))
            C = tp.trace_distance_prefactor(dbc2, p)
            assert la.trace_norm(r1 - r0) <= C * dist * (1 + 1e-9)

    def test_no_jumps_rejected(self):
        L = sg.random_dbc(SIGMA_STAR, 0, 0, seed=1)
        with pytest.raises(NoJumps):
            tp.w2p_solve(L, np.eye(2) / 2, SIGMA_STAR, 1.5)


class TestInverseKernelConvexity:
    def test_joint_convexity_along_segments(self, rng):
        sigma = la.random_density(rng, 3, floor=0.05)
        rho_a = la.random_density(rng, 3, floor=0.05)
        rho_b = la.random_density(rng, 3, floor=0.05)
        Xa = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        Xb = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))

        def val(s):
            K = tp.MetricKernel((1 - s) * rho_a + s * rho_b, sigma, 1.5, 0.3)
            return K.quad_inverse((1 - s) * Xa + s * Xb)

        for s in (0.25, 0.5, 0.75):
            assert val(s) <= (1 - s) * val(0.0) + s * val(1.0) + 1e-9


class TestGeodesics:
    def test_zero_velocity_is_constant(self, rng, dbc2):
        rho = la.random_density(rng, 2, floor=0.1)
        traj = tp.geodesic_shoot(dbc2, rho, np.zeros((2, 2), dtype=complex),
                                 1.5, T=0.5, steps=10)
        assert la.frob(traj[-1].rho - rho) <= 1e-12

    def test_hamiltonian_conserved(self, rng, dbc2):
        rho = la.random_density(rng, 2, floor=0.15)
        U = 0.05 * la.traceless_part(la.random_hermitian(rng, 2))
        traj = tp.geodesic_shoot(dbc2, rho, U, 1.5, T=0.5, steps=25)
        H0 = tp.geodesic_hamiltonian(dbc2, traj[0].rho, traj[0].U, 1.5)
        HT = tp.geodesic_hamiltonian(dbc2, traj[-1].rho, traj[-1].U, 1.5)
        assert abs(HT - H0) <= 1e-6 * H0

    def test_kernel_choice_agreement(self, rng, dbc2):
        rho = la.random_density(rng, 2, floor=0.15)
        U = 0.1 * la.traceless_part(la.random_hermitian(rng, 2))
        outs = [tp._geodesic_rhs(dbc2, rho, U, 1.5, c)[1] for c in ("1", "2", "sym")]
        assert la.frob(outs[0] - outs[1]) <= 1e-10 * max(la.frob(outs[0]), 1e-300)
        assert la.frob(outs[0] - outs[2]) <= 1e-10 * max(la.frob(outs[0]), 1e-300)

    def test_endpoint_consistency_with_solver(self, rng, dbc2):
        # shoot along the solved path's initial velocity and land near the target
        r0 = la.random_density(rng, 2, floor=0.1)
        r1 = la.random_density(rng, 2, floor=0.1)
        p = 1.5
        dist, path = tp.w2p_solve(dbc2, r0, r1, p, tp.W2Opts(N=16))
        N = path.momenta.shape[0]
        nu0 = la.traceless_part((path.states[1] - path.states[0]) * N)
        gbar0 = la.psd_project(0.5 * (path.states[0] + path.states[1])) \
            + 1e-12 * np.eye(2)
        U0 = tp.onsager_pinv_apply(dbc2, gbar0, p, nu0, check_trace=False)
        traj = tp.geodesic_shoot(dbc2, r0, U0, p, T=1.0, steps=40)
        end = la.herm(traj[-1].rho)
        end = end / np.trace(end).real
        gap, _ = tp.w2p_solve(dbc2, end, r1, p, tp.W2Opts(N=10))
        assert gap <= 0.05 * dist

    def test_traceful_velocity_rejected(self, rng, dbc2):
        with pytest.raises(KernelComponent):
            tp.geodesic_shoot(dbc2, np.eye(2) / 2, np.eye(2, dtype=complex),
                              1.5, T=0.1, steps=2)
