import math

import numpy as np
import pytest

from taulattice import (CouplingVector, pfaffian, skew_moment_matrix,
                        symmetric_moment_table, tau_coupling_derivative,
                        tau_orthogonal, tau_unitary)
from taulattice.errors import IllConditioned, OddDimension

SQRT_PI = math.sqrt(math.pi)
SQRT_2PI = math.sqrt(2.0 * math.pi)


class TestSymmetricMoments:
    def test_gaussian_values(self, gauss_moments):
        mu = gauss_moments.mu
        # mu_{2k} = (2k-1)!! sqrt(2 pi); odd moments vanish
        assert abs(mu[0] - SQRT_2PI) < 1e-12 * SQRT_2PI
        assert abs(mu[2] - SQRT_2PI) < 1e-12 * SQRT_2PI
        assert abs(mu[4] - 3.0 * SQRT_2PI) < 1e-11 * SQRT_2PI
        assert abs(mu[6] - 15.0 * SQRT_2PI) < 1e-10 * SQRT_2PI
        # symmetric grid: odd moments cancel to roundoff of the even neighbours
        assert np.max(np.abs(mu[1:9:2])) < 1e-10
        assert np.all(np.abs(mu[1::2]) <= 1e-14 * mu[2::2])

    def test_parity_flag_zeroes_odd(self):
        t = CouplingVector.from_mapping({2: -0.1}, parity_even_only=True)
        table = symmetric_moment_table(t, 8)
        assert np.all(table.mu[1::2] == 0.0)

    def test_hankel_degree_guard(self, gauss_moments):
        with pytest.raises(ValueError):
            gauss_moments.hankel(14)

    def test_degree_cap(self, t0):
        with pytest.raises(ValueError):
            symmetric_moment_table(t0, 42)


class TestTauUnitary:
    def test_closed_forms_at_zero(self, t0):
        # tau_n = (2 pi)^{n/2} prod_{j<n} j!
        expect = {1: SQRT_2PI, 2: 2.0 * math.pi,
                  3: 2.0 * (2.0 * math.pi) ** 1.5,
                  4: 12.0 * (2.0 * math.pi) ** 2}
        for n, val in expect.items():
            assert abs(tau_unitary(t0, n) - val) < 1e-10 * val

    def test_tau_zero_is_one(self, t0):
        assert tau_unitary(t0, 0) == 1.0

    def test_quadratic_coupling_scaling(self, t0):
        # rho = exp(-(1-2 t2) z^2/2): tau_n picks up (1-2 t2)^{-n^2/2}
        t = CouplingVector.from_mapping({2: -0.15})
        s = 1.3
        for n in (1, 2, 3):
            expect = tau_unitary(t0, n) * s ** (-n * n / 2.0)
            assert abs(tau_unitary(t, n) - expect) < 1e-10 * expect


class TestSkewMoments:
    def test_gaussian_block_values(self, t0):
        m = skew_moment_matrix(t0, 4).m
        expect = {(0, 1): SQRT_PI, (0, 3): 2.5 * SQRT_PI,
                  (1, 2): -0.5 * SQRT_PI, (2, 3): 1.75 * SQRT_PI,
                  (0, 2): 0.0, (1, 3): 0.0}
        for (i, j), val in expect.items():
            assert abs(m[i, j] - val) < 2e-12, (i, j)
        assert np.max(np.abs(m + m.T)) == 0.0

    def test_size_must_be_even(self, t0):
        with pytest.raises(ValueError):
            skew_moment_matrix(t0, 5)


class TestPfaffian:
    def test_canonical_block(self):
        J = np.zeros((6, 6))
        for i in range(3):
            J[2 * i, 2 * i + 1] = 1.0
            J[2 * i + 1, 2 * i] = -1.0
        assert abs(pfaffian(J) - 1.0) < 1e-14

    def test_squares_to_determinant(self, rng):
        for dim in (2, 4, 6, 8):
            A = rng.standard_normal((dim, dim))
            S = A - A.T
            det = np.linalg.det(S)
            assert abs(pfaffian(S) ** 2 - det) < 1e-9 * max(abs(det), 1.0)

    def test_odd_dimension_rejected(self):
        with pytest.raises(OddDimension):
            pfaffian(np.zeros((3, 3)))

    def test_non_antisymmetric_rejected(self):
        with pytest.raises(ValueError):
            pfaffian(np.eye(4))

    def test_singular_matrix(self):
        S = np.zeros((4, 4))
        S[0, 1], S[1, 0] = 1.0, -1.0
        assert pfaffian(S) == 0.0


class TestTauOrthogonal:
    def test_closed_forms_at_zero(self, t0):
        assert abs(tau_orthogonal(t0, 2) - SQRT_PI) < 1e-12
        assert abs(tau_orthogonal(t0, 4) - math.pi / 2.0) < 1e-12
        assert abs(tau_orthogonal(t0, 6) - 0.75 * math.pi ** 1.5) < 1e-11

    def test_quadratic_coupling_scaling(self):
        # two_n = 2: tau scales as (1-2 t2)^{-3/2}
        t = CouplingVector.from_mapping({2: -0.2})
        expect = SQRT_PI * 1.4 ** -1.5
        assert abs(tau_orthogonal(t, 2) - expect) < 1e-11 * expect

    def test_odd_size_rejected(self, t0):
        with pytest.raises(ValueError):
            tau_orthogonal(t0, 3)


class TestCouplingDerivatives:
    def test_first_order_translation_vanishes(self, t0):
        for n in (1, 2, 3):
            d = tau_coupling_derivative("unitary", n, t0, {1: 1})
            assert abs(d) < 1e-9 * tau_unitary(t0, n)

    def test_second_t1_derivative_unitary(self, t0):
        # d^2/dt1^2 tau_n = n tau_n at zero couplings
        for n in (1, 2, 3):
            tau_n = tau_unitary(t0, n)
            d = tau_coupling_derivative("unitary", n, t0, {1: 2})
            assert abs(d - n * tau_n) < 1e-7 * tau_n

    def test_second_t1_derivative_orthogonal(self, t0):
        d = tau_coupling_derivative("orthogonal", 2, t0, {1: 2})
        assert abs(d - 2.0 * SQRT_PI) < 1e-7

    def test_t2_derivative_orthogonal(self, t0):
        # tau_2(t2) = sqrt(pi) (1-2 t2)^{-3/2}: slope 3 sqrt(pi) at zero
        d = tau_coupling_derivative("orthogonal", 2, t0, {2: 1})
        assert abs(d - 3.0 * SQRT_PI) < 1e-8

    def test_order_cap(self, t0):
        with pytest.raises(ValueError):
            tau_coupling_derivative("unitary", 2, t0, {1: 3, 2: 2})

    def test_unknown_ensemble(self, t0):
        with pytest.raises(ValueError):
            tau_coupling_derivative("symplectic", 2, t0, {1: 1})


def test_tau_unitary_ill_conditioned_raises(t0):
    # handcrafted table whose order-3 Hankel is indefinite
    from taulattice import SymmetricMomentTable
    table = SymmetricMomentTable(np.array([1.0, 0.0, 1.0, 0.0, 0.5]), t0)
    with pytest.raises(IllConditioned):
        tau_unitary(t0, 3, table=table)
