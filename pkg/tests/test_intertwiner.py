import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dellsys._linalg import lu_det
from dellsys.elliptic import Modulus
from dellsys.errors import NearSingular, VariantMismatch
from dellsys.intertwiner import (
    Positions,
    XiVariant,
    d_matrix,
    elliptic_xi_zero_check,
    g_matrix,
    normalizer,
    vandermonde_rescaled_xi,
    xi_det_from_coords,
    xi_determinant_check,
    xi_determinant_closed,
    xi_from_coords,
    xi_matrix,
)

from conftest import random_positions, random_z

ALL = list(XiVariant)
SPECTRAL = [v for v in ALL if v.spectral]


def _z(v, rng):
    return random_z(rng) if v.spectral else None


class TestPositions:
    def test_centre_of_mass(self, rng):
        for N in (1, 2, 5):
            pos = random_positions(rng, N)
            assert abs(pos.qbar.sum()) < 1e-14
            assert pos.q0 == pytest.approx(pos.q.mean())

    def test_distinct_guard(self):
        with pytest.raises(NearSingular):
            Positions([0.1, 0.1])
        with pytest.raises(NearSingular):
            Positions([0.1, 0.2], min_separation=0.5)

    def test_immutable(self):
        pos = Positions([0.1, 0.2])
        with pytest.raises(ValueError):
            pos.q[0] = 1.0

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            Positions([])

    def test_coordinates(self):
        pos = Positions([0.25])
        assert pos.x_ell[0] == pytest.approx(1j)
        assert pos.x_trig[0] == pytest.approx(np.exp(0.25))

    @given(st.lists(st.floats(-1, 1), min_size=1, max_size=6, unique=True))
    def test_qbar_sums_to_zero(self, q):
        try:
            pos = Positions(q)
        except NearSingular:
            return
        assert abs(pos.qbar.sum()) < 1e-14


class TestVariants:
    def test_spectral_flags(self):
        assert set(SPECTRAL) == {XiVariant.RATIONAL_SPECTRAL, XiVariant.TRIG_SPECTRAL, XiVariant.ELLIPTIC}

    def test_from_tag(self):
        assert XiVariant("TrigSpectral") is XiVariant.TRIG_SPECTRAL

    @pytest.mark.parametrize("v", ALL)
    def test_z_presence(self, v, mod):
        pos = Positions([0.1, -0.2])
        wrong = None if v.spectral else 0.3
        with pytest.raises(VariantMismatch):
            xi_matrix(v, wrong, pos, mod)


class TestExamples:
    def test_rational_N2(self):
        q1, q2 = 0.3 + 0.1j, -0.7
        xi = xi_matrix(XiVariant.RATIONAL, None, Positions([q1, q2]))
        np.testing.assert_allclose(xi, [[1, 1], [-q1, -q2]])
        assert lu_det(xi) == pytest.approx(q1 - q2)
        assert xi_determinant_closed(XiVariant.RATIONAL, None, Positions([q1, q2])) == pytest.approx(q1 - q2)

    def test_trig_N1(self):
        np.testing.assert_array_equal(xi_matrix(XiVariant.TRIG, None, Positions([0.4])), [[1]])

    def test_elliptic_N3(self, rng):
        mod = Modulus(0.9j)
        for _ in range(5):
            pos = random_positions(rng, 3)
            assert xi_determinant_check(XiVariant.ELLIPTIC, random_z(rng), pos, mod) < 1e-10

    def test_elliptic_simple_zero(self, rng):
        pos = random_positions(rng, 3)
        mod = Modulus(0.9j)
        assert abs(xi_determinant_closed(XiVariant.ELLIPTIC, 0.0, pos, mod)) < 1e-15
        assert elliptic_xi_zero_check(pos, mod, 0.3 + 0.1j) < 1e-9
        # simple zero: det / z has a finite nonzero limit
        d1 = xi_determinant_closed(XiVariant.ELLIPTIC, 1e-4, pos, mod) / 1e-4
        d2 = xi_determinant_closed(XiVariant.ELLIPTIC, 1e-5, pos, mod) / 1e-5
        assert abs(d1) > 1e-6 and abs(d1 - d2) / abs(d2) < 1e-6

    def test_trig_spectral_two_forms(self, rng):
        for N in (2, 3, 4):
            pos = random_positions(rng, N)
            z = random_z(rng)
            a = xi_determinant_closed(XiVariant.TRIG_SPECTRAL, z, pos, form="y")
            b = xi_determinant_closed(XiVariant.TRIG_SPECTRAL, z, pos, form="sinh")
            assert abs(a - b) / abs(a) < 1e-10

    def test_rational_spectral_zero(self, rng):
        pos = random_positions(rng, 3)
        z = complex(pos.q.sum())
        assert abs(xi_determinant_closed(XiVariant.RATIONAL_SPECTRAL, z, pos, centered=False)) < 1e-15
        assert abs(lu_det(xi_matrix(XiVariant.RATIONAL_SPECTRAL, z, pos, centered=False))) < 1e-12

    def test_rho_exponents(self):
        w = np.array([0.1, 0.2, 0.4])
        xi = xi_from_coords(XiVariant.RATIONAL_SPECTRAL, w, 0.0)
        np.testing.assert_allclose(xi[:, 0], [1, -0.1, (-0.1) ** 3])

    def test_trig_spectral_correction_row(self):
        w = np.array([0.1, -0.1])
        xi = xi_from_coords(XiVariant.TRIG_SPECTRAL, w, 0.0)
        y = np.exp(-2 * w)
        np.testing.assert_allclose(xi[1], y + 1 / y)


class TestDeterminants:
    @pytest.mark.parametrize("v", ALL)
    @pytest.mark.parametrize("N", [2, 3, 4])
    def test_lu_matches_closed(self, v, N, rng):
        mod = Modulus(0.9j)
        worst = max(xi_determinant_check(v, _z(v, rng), random_positions(rng, N), mod) for _ in range(50))
        assert worst < 1e-10

    @pytest.mark.parametrize("v", SPECTRAL)
    @pytest.mark.parametrize("N", [2, 3, 4])
    def test_zero_at_origin(self, v, N, rng):
        mod = Modulus(0.9j)
        pos = random_positions(rng, N)
        d0 = lu_det(xi_matrix(v, 0.0, pos, mod))
        dr = lu_det(xi_matrix(v, random_z(rng), pos, mod))
        assert abs(d0) < 1e-9 * abs(dr)

    @pytest.mark.parametrize("v", ALL)
    def test_swap_flips_sign(self, v, rng):
        mod = Modulus(0.9j)
        pos = random_positions(rng, 3)
        z = _z(v, rng)
        q = pos.q.copy()
        q[[0, 2]] = q[[2, 0]]
        swapped = Positions(q)
        a, b = xi_matrix(v, z, pos, mod), xi_matrix(v, z, swapped, mod)
        np.testing.assert_array_equal(a[:, [2, 1, 0]], b)
        assert lu_det(b) == pytest.approx(-lu_det(a), rel=1e-13)

    @given(st.integers(2, 4), st.integers(0, 2**32 - 1), st.sampled_from(ALL))
    def test_determinant_property(self, N, seed, v):
        rng = np.random.default_rng(seed)
        assert xi_determinant_check(v, _z(v, rng), random_positions(rng, N), Modulus(0.9j)) < 1e-10

    def test_from_coords_consistent(self, rng):
        w = rng.standard_normal(3) * 0.2
        for v in ALL:
            z = _z(v, rng)
            lu = lu_det(xi_from_coords(v, w, z, Modulus(0.9j)))
            closed = xi_det_from_coords(v, w, z, Modulus(0.9j))
            assert abs(lu - closed) <= 1e-10 * abs(closed)


class TestNormalizer:
    def test_N1(self, mod):
        pos = Positions([0.2])
        np.testing.assert_array_equal(d_matrix(pos, mod), [[1]])
        np.testing.assert_allclose(g_matrix(0.3, pos, mod), xi_matrix(XiVariant.ELLIPTIC, 0.3, pos, mod))

    def test_det_g(self, rng, mod):
        for N in (2, 3, 4):
            pos = random_positions(rng, N)
            z = random_z(rng)
            D = d_matrix(pos, mod)
            assert np.count_nonzero(D - np.diag(np.diag(D))) == 0
            lhs = lu_det(g_matrix(z, pos, mod))
            rhs = lu_det(xi_matrix(XiVariant.ELLIPTIC, z, pos, mod)) / np.prod(np.diag(D))
            assert abs(lhs - rhs) < 1e-12 * abs(rhs)

    def test_g_zero_at_origin(self, rng, mod):
        pos = random_positions(rng, 3)
        g0 = lu_det(g_matrix(0.0, pos, mod))
        gr = lu_det(g_matrix(0.3 + 0.1j, pos, mod))
        assert abs(g0) < 1e-9 * abs(gr)

    def test_coincident(self, mod):
        pos = Positions([0.2, 0.2 + 1e-12], min_separation=1e-14)
        with pytest.raises(NearSingular):
            d_matrix(pos, mod)

    def test_normalizer_elliptic(self, rng, mod):
        pos = random_positions(rng, 3)
        np.testing.assert_allclose(normalizer(XiVariant.ELLIPTIC, pos, mod), np.diag(d_matrix(pos, mod)))


def test_vandermonde_rescaling(rng):
    # rescaling columns turns prod(x_i - x_j) into a multiple of prod(1 - x_i/x_j)
    x = np.exp(0.3 * rng.standard_normal(3))
    xi = xi_from_coords(XiVariant.TRIG, np.log(x))
    re = vandermonde_rescaled_xi(xi, x)
    ratio = lu_det(re) / lu_det(xi)
    N = 3
    j = np.arange(1, N + 1)
    assert ratio == pytest.approx(np.prod(x ** ((N + 1) / 2 - j)))
