import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dellsys.elliptic import theta_series
from dellsys.errors import NearSingular, SeriesInversionError
from dellsys.spectrum import (
    Partition,
    SymmetricPolynomial,
    _monomial_values,
    commutativity_check,
    eigenvalue_H1,
    eigenvalue_formula,
    gl2_first_hamiltonian_closed,
    monomial_sym,
    operator_coefficient_matrices,
    operator_matrix_in_m_basis,
    partitions,
    schur,
    schur_in_m_basis,
    series_inv,
    series_mul,
    shift_set,
    trig_coefficient,
    triangularity_defect,
)

Q, T = 0.63 + 0.11j, 0.47 - 0.08j
unit_disc = st.builds(
    lambda r, a: r * np.exp(2j * np.pi * a), st.floats(0.2, 0.9), st.floats(0.0, 1.0)
)


class TestPartitions:
    def test_validation(self):
        with pytest.raises(ValueError):
            Partition((1, 2))
        with pytest.raises(ValueError):
            Partition((2, -1))
        assert Partition((2, 1, 0, 0)).parts == (2, 1)
        assert Partition((2, 1)).padded(4) == (2, 1, 0, 0)
        with pytest.raises(ValueError):
            Partition((1, 1, 1)).padded(2)

    def test_dominance(self):
        assert Partition((2, 0)).dominates(Partition((1, 1)))
        assert not Partition((1, 1)).dominates(Partition((2,)))
        assert not Partition((3, 3)).dominates(Partition((4, 1, 1)))
        assert not Partition((4, 1, 1)).dominates(Partition((3, 3)))
        assert not Partition((2,)).dominates(Partition((1,)))

    def test_enumeration(self):
        assert [p.parts for p in partitions(4, 2)] == [(2, 2), (3, 1), (4,)]
        assert len(partitions(4, 4)) == 5
        assert partitions(0, 3) == [Partition(())]

    def test_order_refines_dominance(self):
        for d, N in [(4, 3), (5, 3), (6, 4)]:
            basis = partitions(d, N)
            for i, a in enumerate(basis):
                for b in basis[:i]:
                    assert not b.dominates(a) or a == b


class TestSymmetricFunctions:
    def test_monomial_examples(self):
        assert monomial_sym((0, 0), [2, 3]) == 1
        assert monomial_sym((1, 0), [2, 3]) == 5
        assert monomial_sym((1, 1), [2, 3]) == 6

    def test_schur_examples(self):
        assert schur((0, 0), [2, 3]) == pytest.approx(1)
        assert schur((1, 0), [2 + 1j, 3]) == pytest.approx(5 + 1j)

    def test_schur_guard(self):
        with pytest.raises(NearSingular):
            schur((1,), [2, 2])

    def test_schur_triangular(self):
        for N in (2, 3):
            for d in range(1, 5):
                for lam in partitions(d, N):
                    s = schur_in_m_basis(lam, N)
                    assert abs(s.coeffs[lam] - 1) < 1e-10
                    for mu, c in s.coeffs.items():
                        if abs(c) > 1e-10:
                            assert lam.dominates(mu)
                        # integrality of Kostka numbers
                        assert abs(c - round(c.real)) < 1e-9

    def test_homogeneous(self):
        with pytest.raises(ValueError):
            SymmetricPolynomial({(1,): 1, (2,): 1}, 2)

    def test_evaluation(self, rng):
        s = schur_in_m_basis((2, 1), 3)
        x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        assert s(x) == pytest.approx(schur((2, 1), x), rel=1e-10)


class TestSeries:
    def test_scalar_inverse(self):
        a = np.array([2.0, 1.0, -0.5])
        inv = series_inv(a, 4)
        prod = series_mul(a, inv, 4)
        np.testing.assert_allclose(prod, [1, 0, 0, 0, 0], atol=1e-15)

    def test_matrix_inverse(self, rng):
        a = rng.standard_normal((3, 2, 2)) + np.eye(2) * 3
        prod = series_mul(a, series_inv(a, 2), 2)
        np.testing.assert_allclose(prod[0], np.eye(2), atol=1e-14)
        np.testing.assert_allclose(prod[1:], 0, atol=1e-14)

    def test_singular_leading(self):
        with pytest.raises(SeriesInversionError):
            series_inv(np.array([0.0, 1.0]), 2)
        with pytest.raises(SeriesInversionError):
            series_inv(np.zeros((2, 2, 2)), 2)


class TestOperator:
    def test_N1(self):
        for k in range(4):
            basis, A = operator_matrix_in_m_basis(0.7, Q, T, 0.1, 1, k, 3)
            assert A.shape == (1, 1)
            # theta_omega truncated at omega^3: terms n in [-2, 3]
            want = sum((-0.7 * Q ** k) ** n * 0.1 ** ((n * n - n) // 2) for n in range(-2, 4))
            assert A[0, 0] == pytest.approx(want, rel=1e-10)

    @pytest.mark.parametrize("N,d", [(2, 2), (2, 4), (3, 3), (3, 4)])
    @pytest.mark.parametrize("omega", [0.0, 0.1])
    def test_triangular_with_eigenvalues(self, N, d, omega):
        u = 0.8 - 0.3j
        mats = operator_coefficient_matrices(N, d, Q, T, 3)
        A = mats.at(u, omega)
        assert triangularity_defect(mats.basis, A) < 1e-10
        for i, lam in enumerate(mats.basis):
            ev = eigenvalue_formula(u, lam, Q, T, omega, N, 3)
            assert abs(A[i, i] - ev) < 1e-10 * abs(ev)

    def test_simultaneous_triangularity(self):
        mats = operator_coefficient_matrices(3, 3, Q, T, 2)
        for (k, m), A in mats.blocks.items():
            assert triangularity_defect(mats.basis, A) < 1e-10 or np.max(np.abs(A)) < 1e-12

    def test_degree_preserved_fresh_points(self, rng):
        # the fitted matrix reproduces the operator action at points it never saw
        N, d, K = 2, 3, 2
        u, omega = 0.6 + 0.2j, 0.1
        mats = operator_coefficient_matrices(N, d, Q, T, K)
        A = mats.at(u, omega)
        X = np.exp(0.2 * rng.standard_normal((7, N))) * np.exp(2j * np.pi * rng.uniform(size=(7, N)))
        for b, lam in enumerate(mats.basis):
            act = np.zeros(X.shape[0], complex)
            for n in shift_set(N, K):
                w = sum((k * k - k) // 2 for k in n)
                act += (omega ** w) * (-u) ** sum(n) * trig_coefficient(n, X, T) * _monomial_values(
                    lam, X * Q ** np.asarray(n)[None, :])
            fit = sum(A[a, b] * _monomial_values(mu, X) for a, mu in enumerate(mats.basis))
            assert np.max(np.abs(act - fit)) < 1e-10 * np.max(np.abs(act))


class TestEigenvalues:
    def test_omega_zero_product(self):
        lam = Partition((2, 1))
        u = 0.7
        want = np.prod([1 - u * T ** (3 - 1 - i) * Q ** lam.padded(3)[i] for i in range(3)])
        assert eigenvalue_formula(u, lam, Q, T, 0.0, 3, 2) == pytest.approx(want, rel=1e-14)

    def test_N1_trivial_partition(self):
        u, omega = 0.6, 0.05
        got = eigenvalue_formula(u, (), Q, T, omega, 1, 8)
        assert got == pytest.approx(theta_series(u, omega), rel=1e-12)

    def test_zero(self):
        lam = Partition((2, 1))
        u = 1 / (T ** 1 * Q ** 2)
        assert abs(eigenvalue_formula(u, lam, Q, T, 0.0, 2, 2)) < 1e-14

    def test_gl2_closed_form(self):
        h = eigenvalue_H1((1, 0), Q, T, 2, 1)
        np.testing.assert_allclose(h, gl2_first_hamiltonian_closed(Q, T), rtol=1e-12)

    @given(unit_disc, unit_disc)
    def test_gl2_closed_form_property(self, q, t):
        h = eigenvalue_H1((1, 0), q, t, 2, 1)
        ref = gl2_first_hamiltonian_closed(q, t)
        assert np.max(np.abs(h - ref) / np.abs(ref)) < 1e-10

    def test_first_hamiltonian_omega_zero(self):
        for lam, N in [((2, 1), 3), ((3,), 2), ((1, 1, 1), 3)]:
            p = Partition(lam).padded(N)
            h = eigenvalue_H1(lam, Q, T, N, 0)
            assert h[0] == pytest.approx(-sum(T ** (N - 1 - i) * Q ** p[i] for i in range(N)), rel=1e-13)

    def test_N1(self):
        for k in range(3):
            assert eigenvalue_H1((k,), Q, T, 1, 0)[0] == pytest.approx(-Q ** k)


class TestCommutativity:
    def test_N2_d2(self):
        assert commutativity_check(Q, T, 2, 2, 2) < 1e-10

    def test_omega_zero(self):
        assert commutativity_check(Q, T, 3, 3, 0) < 1e-12

    def test_N1_exact(self):
        assert commutativity_check(Q, T, 1, 3, 2) == 0.0

    @given(unit_disc, unit_disc)
    def test_property(self, q, t):
        assert commutativity_check(q, t, 2, 2, 2) < 1e-10
