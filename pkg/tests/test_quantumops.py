import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dellsys.elliptic import Modulus
from dellsys.errors import DomainError, NearSingular
from dellsys.intertwiner import Positions, XiVariant
from dellsys.lax import ModelParams
from dellsys.quantumops import (
    O_hat_coeff,
    O_prime_coeff,
    O_prime_spectral_coeff,
    ShiftCoefficientTable,
    as_shift,
    coefficient_table,
    conjugation_check,
    direct_coeff,
    dual_degeneration_check,
    normal_ordered_det_coeff,
    normal_ordered_det_table,
    normal_ordered_product,
    o_hat_coefficient,
    pairing_apply,
    per_shift_cauchy_check,
    representation_coeff,
    shift_box,
    shift_weight,
    table_sum,
    trig_det_conjugation_route,
    trig_det_pairing_route,
    verify_conjugation,
    verify_lax_determinant,
    verify_per_shift_cauchy,
    verify_rational_determinant,
    verify_spectral_determinant,
    verify_trig_determinant,
)

from conftest import random_positions, random_z

SPECTRAL = [XiVariant.RATIONAL_SPECTRAL, XiVariant.TRIG_SPECTRAL, XiVariant.ELLIPTIC]
seeds = st.integers(0, 2**32 - 1)
small_shift = st.lists(st.integers(-2, 2), min_size=2, max_size=3)


class TestShiftIndex:
    def test_cap(self):
        assert as_shift([1, -2], cap=2) == (1, -2)
        with pytest.raises(DomainError):
            as_shift([3, 0], cap=2)

    def test_box(self):
        box = shift_box(2, 1)
        assert len(box) == 9 and box[0] == (-1, -1) and box == sorted(box)

    def test_weight(self):
        assert shift_weight(0.1, [2, -1]) == pytest.approx(0.1 * 0.1)
        assert shift_weight(0.0, [0, 1]) == 1
        assert shift_weight(0.0, [2, 0]) == 0


class TestTables:
    def test_lambda_on_read(self):
        tab = ShiftCoefficientTable({(1, 1): 2.0, (0, -1): 3.0})
        assert tab.value((1, 1), 0.5) == pytest.approx(2.0 * 0.25)
        assert tab.value((0, -1), 0.5) == pytest.approx(-6.0)
        assert tab[(5, 5)] == 0
        assert set(tab.graded()) == {2, -1}

    def test_cap_enforced(self):
        with pytest.raises(DomainError):
            ShiftCoefficientTable({(3, 0): 1.0}, cap=2)

    def test_non_finite(self):
        with pytest.raises(DomainError):
            ShiftCoefficientTable({(0,): np.nan})

    def test_product_degree_additive(self):
        a = ShiftCoefficientTable({(1, 0): 2.0, (0, 0): 1.0})
        b = ShiftCoefficientTable({(0, 1): 3.0})
        ab = normal_ordered_product(a, b)
        assert dict(ab.entries) == {(1, 1): 6.0, (0, 1): 3.0}
        assert ab.residual(normal_ordered_product(b, a)) == 0
        assert ab.normal_ordered() is ab

    def test_sum(self):
        a = ShiftCoefficientTable({(1,): 2.0})
        assert table_sum(a, a, signs=[1, -1])[(1,)] == 0

    @given(st.dictionaries(small_shift.map(lambda l: tuple(l[:2])), st.complex_numbers(max_magnitude=10, allow_nan=False)), )
    def test_product_identity(self, entries):
        tab = ShiftCoefficientTable(entries)
        unit = ShiftCoefficientTable({(0, 0): 1.0})
        assert normal_ordered_product(tab, unit).residual(tab) == 0


class TestDirectCoefficients:
    def test_N1(self):
        pr = ModelParams(omega=0.1)
        pos = Positions([0.2])
        for k in range(-2, 3):
            c = O_hat_coeff([k], pos, pr, lam=0.6)
            assert c == pytest.approx(0.1 ** ((k * k - k) // 2) * (-0.6) ** k)

    def test_zero_shift(self, rng):
        pr = ModelParams(omega=0.1)
        pos = random_positions(rng, 3)
        assert O_hat_coeff((0, 0, 0), pos, pr) == pytest.approx(1)
        for v in (XiVariant.ELLIPTIC, XiVariant.RATIONAL, XiVariant.TRIG_SPECTRAL):
            assert O_prime_coeff((0, 0, 0), pos, pr, v) == pytest.approx(1)
        for v in SPECTRAL:
            assert O_prime_spectral_coeff((0, 0, 0), 0.3 + 0.1j, pos, pr, v) == pytest.approx(1)

    def test_trig_N2(self):
        pr = ModelParams(omega=0.1, eta=0.2)
        pos = Positions([0.3, -0.1 + 0.05j])
        x, t = pos.x_trig, pr.t
        for n in [(1, 0), (2, -1), (0, 2)]:
            want = shift_weight(0.1, n) * (t ** n[0] * x[0] - t ** n[1] * x[1]) / (x[0] - x[1])
            assert O_hat_coeff(n, pos, pr, coords="trig", conjugated=True) == pytest.approx(want, rel=1e-13)

    def test_unconjugated_trig(self):
        pr = ModelParams(eta=0.2)
        pos = Positions([0.3, -0.1])
        x, t = pos.x_trig, pr.t
        n = (1, 0)  # omega = 0 keeps only shifts with n_j in {0, 1}
        want = (1 - t * x[0] / x[1]) / (1 - x[0] / x[1])
        assert O_hat_coeff(n, pos, pr, coords="trig") == pytest.approx(want, rel=1e-13)

    def test_bad_coords(self, rng):
        with pytest.raises(DomainError):
            O_hat_coeff((0, 0), random_positions(rng, 2), ModelParams(), coords="polar")

    def test_guard(self):
        with pytest.raises(NearSingular):
            o_hat_coefficient((1, 0), [1.0, 1.0 + 1e-14], 1.1, 0.0, 0.0)

    def test_dual_degeneration(self, rng):
        pr = ModelParams(omega=0.1)
        for N in (2, 3):
            assert dual_degeneration_check(random_positions(rng, N), pr) < 1e-5


class TestPairing:
    def test_examples(self):
        t = 1.3
        assert pairing_apply((0, 0), (3, 5), t) == 1
        assert pairing_apply((1, 0), (3, 5), t) == pytest.approx(t ** 3)

    @given(small_shift, small_shift, st.floats(0.5, 2.0))
    def test_multiplicative(self, k, m, t):
        L = min(len(k), len(m))
        k, m = k[:L], m[:L]
        per = np.prod([pairing_apply([a], [b], t) for a, b in zip(k, m)])
        assert pairing_apply(k, m, t) == pytest.approx(per, rel=1e-12)

    def test_routes_agree(self, rng):
        t = 1.17
        for N in (2, 3):
            x = np.exp(random_positions(rng, N).q)
            for n in shift_box(N, 2):
                a = trig_det_pairing_route(n, x, t)
                b = trig_det_conjugation_route(n, x, t)
                assert abs(a - b) <= 1e-12 * max(abs(a), 1.0)


class TestDeterminantIdentities:
    def test_trig(self, rng):
        pr = ModelParams(omega=0.1)
        for _ in range(20):
            pos = random_positions(rng, 2)
            for route in ("lu", "pairing", "conjugation"):
                assert verify_trig_determinant(pos, pr, 2, route) < 1e-10

    def test_trig_N1(self):
        assert verify_trig_determinant(Positions([0.3]), ModelParams(omega=0.1)) == 0.0

    def test_trig_bad_route(self, rng):
        with pytest.raises(DomainError):
            verify_trig_determinant(random_positions(rng, 2), ModelParams(), route="magic")

    def test_rational(self, rng):
        pr = ModelParams(omega=0.1)
        for N in (2, 3):
            for _ in range(10):
                assert verify_rational_determinant(random_positions(rng, N), pr) < 1e-10

    @pytest.mark.parametrize("v", SPECTRAL)
    def test_spectral(self, v, rng):
        pr = ModelParams(omega=0.1)
        for N in (2, 3):
            for _ in range(5):
                pos = random_positions(rng, N)
                z = random_z(rng)
                assert verify_spectral_determinant(z, pos, pr, v) < 1e-10
                assert verify_spectral_determinant(z, pos, pr, v, shifted=True) < 1e-10

    @pytest.mark.parametrize("v", list(XiVariant))
    def test_lax_determinant(self, v, rng):
        pr = ModelParams(omega=0.1)
        for _ in range(5):
            pos = random_positions(rng, 2)
            assert verify_lax_determinant(random_z(rng), pos, pr, v) < 1e-10

    def test_lax_determinant_N3(self, rng):
        pr = ModelParams(omega=0.05)
        assert verify_lax_determinant(random_z(rng), random_positions(rng, 3), pr, M=1) < 1e-9

    def test_omega_independent(self, rng):
        pos = random_positions(rng, 2)
        z = random_z(rng)
        res = [verify_lax_determinant(z, pos, ModelParams(omega=w)) for w in (0.0, 0.05, 0.2)]
        assert max(res) < 1e-10

    def test_zero_shift_is_one(self, rng):
        pos = random_positions(rng, 3)
        assert normal_ordered_det_coeff((0, 0, 0), 0.3 + 0.1j, pos, ModelParams()) == pytest.approx(1)

    @given(seeds, st.sampled_from(list(XiVariant)), st.integers(2, 3))
    def test_central_identity_property(self, seed, v, N):
        rng = np.random.default_rng(seed)
        pos = random_positions(rng, N)
        z = random_z(rng) if v.spectral else None
        pr = ModelParams(omega=0.1)
        for n in [tuple(rng.integers(-2, 3, N)) for _ in range(4)]:
            a = direct_coeff(v, n, z, pos, pr)
            b = representation_coeff(v, n, z, pos, pr)
            assert abs(a - b) <= 1e-10 * max(abs(a), abs(b))

    def test_table_expansion_matches(self, rng):
        pos = random_positions(rng, 2)
        z = random_z(rng)
        pr = ModelParams(omega=0.1)
        tab = normal_ordered_det_table(z, pos, pr, XiVariant.ELLIPTIC, M=2)
        ref = coefficient_table(lambda n: normal_ordered_det_coeff(n, z, pos, pr), 2, 2)
        assert tab.residual(ref) < 1e-12


class TestPerShiftCauchy:
    def test_box(self, rng):
        pr = ModelParams(tau=0.8j)
        for N in (2, 3):
            for _ in range(5):
                assert verify_per_shift_cauchy(random_z(rng), random_positions(rng, N), pr) < 1e-10

    def test_zero_component_rejected(self, rng):
        with pytest.raises(DomainError):
            per_shift_cauchy_check((1, 0), 0.3, random_positions(rng, 2), ModelParams())

    @given(seeds, st.lists(st.sampled_from([-2, -1, 1, 2]), min_size=2, max_size=3))
    def test_property(self, seed, n):
        rng = np.random.default_rng(seed)
        pos = random_positions(rng, len(n))
        assert per_shift_cauchy_check(n, random_z(rng), pos, ModelParams()) < 1e-10


class TestConjugation:
    def test_per_coefficient(self, rng):
        pr = ModelParams(omega=0.1, hbar=0.07)
        for N in (2, 3):
            for _ in range(5):
                assert verify_conjugation(random_positions(rng, N), pr) < 1e-10

    def test_needs_hbar(self, rng):
        with pytest.raises(DomainError):
            conjugation_check((1, 0), random_positions(rng, 2), ModelParams(hbar=0.0))

    @given(seeds, st.floats(0.03, 0.3), st.floats(-0.3, 0.3).filter(lambda h: abs(h) > 0.01))
    def test_property(self, seed, eta, hbar):
        rng = np.random.default_rng(seed)
        pr = ModelParams(eta=eta, hbar=hbar, tau=Modulus(0.9j))
        pos = random_positions(rng, 2)
        assert max(conjugation_check(n, pos, pr) for n in [(1, 0), (-1, 2), (2, 2)]) < 1e-10
