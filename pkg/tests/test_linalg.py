import numpy as np
import pytest

from qbeckner import kernels as kn
from qbeckner import linalg as la
from qbeckner.errors import DomainViolation, NonHermitian, NotPsd, SingularState

from conftest import PAULI, SIGMA_STAR, random_pd


class TestEigh:
    def test_diagonal_input(self):
        w, V = la.herm_eigh(SIGMA_STAR)
        assert np.allclose(w, [0.25, 0.75])
        assert np.allclose(np.abs(V), [[0, 1], [1, 0]])  # permutation of identity

    def test_pauli_x_spectrum(self):
        w, _ = la.herm_eigh(PAULI["x"])
        assert np.allclose(w, [-1.0, 1.0])

    def test_reconstruction(self, rng):
        H = la.random_hermitian(rng, 4)
        w, V = la.herm_eigh(H)
        assert la.frob((V * w) @ V.conj().T - H) <= 1e-10 * la.frob(H)
        assert la.frob(V.conj().T @ V - np.eye(4)) <= 1e-12 * 4

    def test_non_hermitian_rejected(self, rng):
        A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        with pytest.raises(NonHermitian):
            la.herm_eigh(A)


class TestMatrixFunction:
    def test_identity_kernel(self, rng):
        A = la.random_hermitian(rng, 3)
        assert np.allclose(la.matrix_function(A, kn.identity_kernel()), A)

    def test_diagonal_square_root(self):
        A = np.diag([4.0, 9.0]).astype(complex)
        assert np.allclose(la.matrix_function(A, kn.power_kernel(0.5)),
                           np.diag([2.0, 3.0]))

    def test_power_against_independent_eig_routine(self, rng):
        import scipy.linalg
        A = random_pd(rng, 3)
        p = 1.5
        out = la.matrix_function(A, kn.power_kernel(p - 1.0))
        w, V = scipy.linalg.eigh(A)  # LAPACK driver independent of np.linalg.eigh
        ref = (V * w ** (p - 1.0)) @ V.conj().T
        assert la.frob(out - ref) <= 1e-12 * la.frob(ref)

    def test_domain_violation(self):
        with pytest.raises(DomainViolation):
            la.matrix_function(np.diag([1.0, 0.0]).astype(complex), kn.log_kernel())


class TestSuperoperators:
    def test_vectorization_convention(self, rng):
        A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        B = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        X = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        out = la.apply_super(la.sandwich_super(A, B), X)
        assert la.frob(out - A @ X @ B) <= 1e-13 * la.frob(A @ X @ B)
        out = la.apply_super(la.left_super(A), X)
        assert la.frob(out - A @ X) <= 1e-13 * la.frob(A @ X)

    def test_modular_flat_state_is_identity(self):
        M = la.modular_super(np.eye(3) / 3)
        assert la.frob(M - np.eye(9)) <= 1e-12

    def test_modular_eigenvalue_on_matrix_unit(self):
        E01 = np.zeros((2, 2), dtype=complex)
        E01[0, 1] = 1.0
        out = la.apply_super(la.modular_super(SIGMA_STAR), E01)
        assert la.frob(out - 3.0 * E01) <= 1e-12

    def test_gamma_power_of_identity(self):
        out = la.apply_super(la.gamma_power_super(SIGMA_STAR, 1.0), np.eye(2))
        assert la.frob(out - SIGMA_STAR) <= 1e-12

    def test_singular_state_rejected(self):
        with pytest.raises(SingularState):
            la.modular_super(np.diag([1.0, 0.0]).astype(complex))


class TestDoubleSum:
    def test_constant_kernel_is_identity(self, rng):
        A, B = random_pd(rng, 3), random_pd(rng, 3)
        X = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        k2 = kn.Kernel2("one", f=lambda x, y: np.ones(np.broadcast(x, y).shape))
        assert la.frob(la.double_sum_apply(k2, A, B, X) - X) <= 1e-12 * la.frob(X)

    def test_left_variable_kernel_is_left_multiplication(self, rng):
        A, B = random_pd(rng, 3), random_pd(rng, 3)
        X = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        g = kn.power_kernel(2.0)
        k2 = kn.Kernel2("g(x)", f=lambda x, y: g.f(x) + 0.0 * y)
        out = la.double_sum_apply(k2, A, B, X)
        assert la.frob(out - la.matrix_function(A, g) @ X) <= 1e-11 * la.frob(out)

    def test_chain_rule(self, rng):
        # V f(B) - f(A) V = f^[1](A, B)(V B - A V)
        A, B = random_pd(rng, 4, 5.0), random_pd(rng, 4, 5.0)
        V = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        f = kn.power_kernel(2.0)
        dd = kn.divided_difference(f)
        lhs = V @ la.matrix_function(B, f) - la.matrix_function(A, f) @ V
        rhs = la.double_sum_apply(dd, A, B, V @ B - A @ V)
        assert la.frob(lhs - rhs) <= 1e-10 * max(la.frob(lhs), 1.0)

    def test_divided_difference_monotone_under_domination(self, rng):
        # X_i <= c Y_i pushes the quadratic form the other way, with c^(2-p)
        p, c = 1.5, 1.8
        fp = kn.fp_divdiff_kernel(p)
        X1, X2 = random_pd(rng, 3), random_pd(rng, 3)
        Y1 = (X1 + random_pd(rng, 3)) / c
        Y2 = (X2 + random_pd(rng, 3)) / c
        A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        lhs = np.real(la.hs_inner(A, la.double_sum_apply(fp, Y1, Y2, A)))
        rhs = c ** (2.0 - p) * np.real(la.hs_inner(A, la.double_sum_apply(fp, X1, X2, A)))
        assert lhs <= rhs * (1.0 + 1e-10)

    def test_positive_kernel_defines_inner_product(self, rng):
        A, B = random_pd(rng, 3), random_pd(rng, 3)
        dd = kn.divided_difference(kn.power_kernel(2.0))  # x + y > 0 on PD spectra
        for _ in range(5):
            X = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
            val = np.real(la.hs_inner(X, la.double_sum_apply(dd, A, B, X)))
            assert val > 0.0


class TestPartialDividedDifference:
    def test_separable_kernel_reduces(self, rng):
        A, B = random_pd(rng, 4, 5.0), random_pd(rng, 4, 5.0)
        X = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        Y = la.random_hermitian(rng, 4)
        f2 = kn.product_kernel(kn.power_kernel(1.0), kn.power_kernel(3.0))
        out = la.partial_divdiff_apply(f2, 2, A, B, X, Y)
        gdd = kn.divided_difference(kn.power_kernel(3.0))
        ref = A @ X @ la.double_sum_apply(gdd, B, B, Y)
        assert la.frob(out - ref) <= 1e-12 * la.frob(ref)

    def test_time_derivative_chain_rule(self, rng):
        A, B = random_pd(rng, 4, 5.0), random_pd(rng, 4, 5.0)
        Ad, Bd = la.random_hermitian(rng, 4), la.random_hermitian(rng, 4)
        C = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        th = kn.theta_p_kernel(1.5)
        h = 1e-5
        fd = (la.double_sum_apply(th, A + h * Ad, B + h * Bd, C)
              - la.double_sum_apply(th, A - h * Ad, B - h * Bd, C)) / (2 * h)
        an = la.partial_divdiff_apply(th, 1, A, B, Ad, C) \
            + la.partial_divdiff_apply(th, 2, A, B, C, Bd)
        assert la.frob(fd - an) <= 1e-6 * la.frob(an)

    def test_degenerate_spectrum(self, rng):
        A = np.diag([2.0, 2.0, 3.0, 3.0]).astype(complex)
        B = random_pd(rng, 4, 5.0)
        Ad, Bd = la.random_hermitian(rng, 4), la.random_hermitian(rng, 4)
        C = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        th = kn.theta_p_kernel(1.3)
        h = 1e-5
        fd = (la.double_sum_apply(th, A + h * Ad, B + h * Bd, C)
              - la.double_sum_apply(th, A - h * Ad, B - h * Bd, C)) / (2 * h)
        an = la.partial_divdiff_apply(th, 1, A, B, Ad, C) \
            + la.partial_divdiff_apply(th, 2, A, B, C, Bd)
        assert la.frob(fd - an) <= 1e-6 * la.frob(an)


class TestInnerProducts:
    def test_flat_state_reduces_to_hilbert_schmidt(self, rng):
        d = 3
        X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        Y = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        hs = la.hs_inner(X, Y) / d
        flat = np.eye(d) / d
        for s in (0.3, 0.5, 1.0):
            assert la.s_inner(X, Y, flat, s) == pytest.approx(hs, rel=1e-12)
        assert la.f_inner(X, Y, flat, kn.power_kernel(0.7)) == pytest.approx(hs, rel=1e-12)

    def test_identity_normalization(self, rng):
        sigma = la.random_density(rng, 3, floor=0.05)
        for s in (0.2, 0.5, 1.0):
            assert la.s_inner(np.eye(3), np.eye(3), sigma, s) == pytest.approx(1.0)

    def test_conjugate_symmetry_and_positivity(self, rng):
        sigma = la.random_density(rng, 3, floor=0.05)
        X = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        Y = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        k = kn.phi_p_kernel(1.5)
        assert la.f_inner(X, Y, sigma, k) == pytest.approx(
            np.conj(la.f_inner(Y, X, sigma, k)))
        assert np.real(la.f_inner(X, X, sigma, k)) > 0


class TestAltInequality:
    @pytest.mark.parametrize("r", [0.3, 0.5, 0.9])
    @pytest.mark.parametrize("q", [1.0, 2.0])
    def test_alt(self, rng, r, q):
        A, B = random_pd(rng, 3, 1.0), random_pd(rng, 3, 1.0)
        A, B = la.psd_project(A, floor=np.inf), la.psd_project(B, floor=np.inf)
        Ar = la.matrix_power_hermitian(A, r)
        Br = la.matrix_power_hermitian(B, r)
        lhs = np.real(np.trace(la.matrix_power_hermitian(la.herm(Br @ Ar @ Br), q)))
        rhs = np.real(np.trace(la.matrix_power_hermitian(la.herm(B @ A @ B), r * q)))
        assert lhs <= rhs * (1.0 + 1e-10)


class TestPsdAndSerialization:
    def test_psd_project_clamps_small_negatives(self):
        A = np.diag([1.0, -0.5e-10]).astype(complex)
        out = la.psd_project(A)
        assert np.min(np.linalg.eigvalsh(out)) >= 0.0

    def test_psd_project_rejects_large_negatives(self):
        with pytest.raises(NotPsd):
            la.psd_project(np.diag([1.0, -1e-6]).astype(complex))

    def test_matrix_json_round_trip(self, rng):
        A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        assert np.array_equal(la.matrix_from_json(la.matrix_to_json(A)), A)

    def test_abs_power(self, rng):
        A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        out = la.abs_power(A, 1.0)
        sv = np.linalg.svd(A, compute_uv=False)
        assert np.trace(out).real == pytest.approx(np.sum(sv), rel=1e-10)
