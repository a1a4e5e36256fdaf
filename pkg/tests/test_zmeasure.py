import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _util import sparse_probability, sparse_signed
from rittlab.errors import CapacityError
from rittlab.spectral import fourier_eval
from rittlab.zmeasure import (ProbabilityMeasure, SignedMeasure, TailToleranceError,
                              convolve, delta_kernel, dirac, fractional_coeffs,
                              lazy_walk, nu_alpha, parse_measure, format_measure, power,
                              read_measure, ritt_constant, symmetric_walk, tv_norm,
                              write_measure)


def atoms(m):
    return [(k, w) for k, w in m.atoms()]


class TestConvolve:
    def test_identity(self):
        a = SignedMeasure.from_atoms([(-2, 0.3), (5, -1.25)])
        assert convolve(dirac(0), a) == a

    def test_half_steps(self):
        h = SignedMeasure.from_atoms([(0, 0.5), (1, 0.5)], exact=True)
        assert atoms(convolve(h, h)) == [(0, 0.25), (1, 0.5), (2, 0.25)]

    def test_signed_difference(self):
        d = SignedMeasure.from_atoms([(0, 1.0), (1, -1.0)], exact=True)
        assert atoms(convolve(d, d)) == [(0, 1.0), (1, -2.0), (2, 1.0)]

    def test_orientation_shifts_right(self):
        # (delta_1 * a)(k) = a(k - 1)
        a = SignedMeasure.from_atoms([(0, 2.0), (3, 1.0)])
        assert atoms(convolve(dirac(1), a)) == [(1, 2.0), (4, 1.0)]

    def test_commutative_associative(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a, b, c = (sparse_signed(rng) for _ in range(3))
            ab, ba = convolve(a, b), convolve(b, a)
            assert np.allclose(ab.weights, ba.weights, rtol=0, atol=1e-12)
            l = convolve(convolve(a, b), c)
            r = convolve(a, convolve(b, c))
            assert np.array_equal(l.sites, r.sites)
            assert np.allclose(l.weights, r.weights, rtol=0, atol=1e-12)

    def test_fft_path_matches_direct(self):
        mu = nu_alpha(0.5, 300)
        d = convolve(mu, mu, method="auto")
        f = convolve(mu, mu, method="fft")
        od, vd = d.dense()
        of, vf = f.dense()
        assert od == of
        assert np.abs(vd - vf).sum() <= f.l1_error + 1e-15

    def test_capacity(self):
        a = SignedMeasure.from_atoms([(0, 1.0), (10 ** 6, 1.0)])
        with pytest.raises(CapacityError):
            convolve(a, a, capacity=1000)

    def test_young_inequality(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            a, b = sparse_signed(rng), sparse_signed(rng)
            assert tv_norm(convolve(a, b)) <= tv_norm(a) * tv_norm(b) * (1 + 1e-12)


class TestPower:
    def test_zero_power_is_delta(self):
        assert power(symmetric_walk(), 0) == dirac(0)

    def test_walk_square(self):
        assert atoms(power(symmetric_walk(), 2)) == [(-2, 0.25), (0, 0.5), (2, 0.25)]

    def test_matches_chain_bitwise(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            mu = sparse_probability(rng)
            chain = mu
            for _ in range(4):
                chain = convolve(chain, mu)
            assert power(mu, 5).identical(chain)

    def test_float_power_close_to_chain(self):
        rng = np.random.default_rng(4)
        mu = sparse_probability(rng, exact=False)
        chain = mu
        for _ in range(6):
            chain = convolve(chain, mu)
        p = power(mu, 7)
        assert np.array_equal(p.sites, chain.sites)
        assert np.allclose(p.weights, chain.weights, rtol=1e-12, atol=1e-15)


class TestNorms:
    def test_delta(self):
        assert tv_norm(dirac(0)) == 1

    def test_second_difference(self):
        d = SignedMeasure.from_atoms([(0, 1.0), (1, -2.0), (2, 1.0)])
        assert tv_norm(d) == 4


class TestFractional:
    def test_first_coefficients(self):
        fc = fractional_coeffs(0.5, 4)
        assert fc.coeffs.tolist() == [0.5, 0.125, 0.0625, 0.0390625]

    def test_partial_sum_large_K(self):
        fc = fractional_coeffs(0.5, 10 ** 6)
        assert 0.999 <= fc.coeffs.sum() <= 1.0

    @given(st.floats(0.01, 0.99), st.integers(2, 400))
    def test_positive_decreasing(self, a, K):
        c = fractional_coeffs(a, K).coeffs
        assert np.all(c > 0)
        assert np.all(np.diff(c) < 0)

    def test_nu_alpha_small(self):
        nu = nu_alpha(0.5, 4)
        assert nu.weights.tolist() == [0.5, 0.125, 0.0625, 0.0390625]
        assert nu.tail_mass == pytest.approx(0.2734375, abs=1e-15)
        assert nu.l1_error == nu.tail_mass

    def test_renormalized_mass(self):
        nu = nu_alpha(0.3, 50, renormalize=True)
        assert abs(nu.mass - 1) <= 1e-12
        assert nu.l1_error > 0

    def test_tail_strictly_decreasing(self):
        tails = [nu_alpha(0.5, K).tail_mass for K in (16, 32, 64, 128)]
        assert all(b < a for a, b in zip(tails, tails[1:]))

    def test_tail_tolerance(self):
        with pytest.raises(TailToleranceError) as e:
            nu_alpha(0.5, 16, tail_tol=1e-3)
        assert e.value.achievable > 1e-3

    def test_rejects_alpha(self):
        with pytest.raises(ValueError):
            fractional_coeffs(1.0, 4)


class TestDeltaKernel:
    def test_shift_case(self):
        k = delta_kernel(dirac(1), 3, 2)
        assert atoms(k) == [(3, 1.0), (4, -2.0), (5, 1.0)]

    def test_first_difference(self):
        mu = lazy_walk()
        k = delta_kernel(mu, 0, 1)
        assert k == SignedMeasure.delta(0) - mu

    def test_fourier_identity(self):
        rng = np.random.default_rng(5)
        ts = np.arange(64) / 64
        for _ in range(10):
            mu = sparse_probability(rng, exact=False)
            n, r = int(rng.integers(0, 6)), int(rng.integers(1, 4))
            lhs = fourier_eval(delta_kernel(mu, n, r), ts)
            m = fourier_eval(mu, ts)
            assert np.max(np.abs(lhs - m ** n * (1 - m) ** r)) <= 1e-10

    def test_fractional_remainder_certified(self):
        mu = lazy_walk()
        ts = np.linspace(0, 0.5, 33)
        k = delta_kernel(mu, 2, 1.5, frac_K=32)
        m = fourier_eval(mu, ts)
        exact = m ** 2 * (1 - m) ** 1.5
        err = np.max(np.abs(fourier_eval(k, ts) - exact))
        assert 0 < err <= k.l1_error


class TestRitt:
    def test_shift_trace(self):
        tr = ritt_constant(dirac(1), 32)
        assert tr.values.tolist() == [2.0 * n for n in range(1, 33)]

    def test_symmetric_walk_trace_exact(self):
        tr = ritt_constant(symmetric_walk(), 64)
        assert tr.method == "exact"
        assert tr.values.tolist() == [2.0 * n for n in range(1, 65)]

    def test_float_direct_matches_exact(self):
        tr = ritt_constant(symmetric_walk().as_float(), 32)
        assert tr.method == "direct"
        assert tr.values.tolist() == [2.0 * n for n in range(1, 33)]

    def test_fft_agrees_with_direct(self):
        nu = nu_alpha(0.5, 64)
        a = ritt_constant(nu, 40, method="direct")
        b = ritt_constant(nu, 40, method="fft")
        assert np.allclose(a.values, b.values, rtol=1e-9)

    def test_fractional_bounded(self):
        tr = ritt_constant(nu_alpha(0.5, 1024), 128)
        assert tr.sup < 1.1
        assert tr.octave_ratio() <= 1.05


class TestIO:
    def test_round_trip(self, tmp_path):
        mu = nu_alpha(0.5, 20)
        write_measure(mu, tmp_path / "m.txt", ["fractional"])
        back = read_measure(tmp_path / "m.txt")
        assert np.array_equal(back.weights, mu.weights)
        assert np.array_equal(back.sites, mu.sites)

    def test_format_is_tab_separated(self):
        text = format_measure(symmetric_walk(), ["walk"])
        assert text == "# walk\n-1\t0.5\n1\t0.5\n"

    def test_parse_rejects_unsorted(self):
        with pytest.raises(ValueError):
            parse_measure("2\t0.5\n1\t0.5\n")

    def test_probability_validation(self):
        with pytest.raises(ValueError):
            ProbabilityMeasure.from_atoms([(0, 0.7), (1, 0.7)])
        with pytest.raises(ValueError):
            ProbabilityMeasure.from_atoms([(0, 1.5), (1, -0.5)])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(-6, 6), st.integers(-8, 8)), min_size=1, max_size=5),
       st.lists(st.tuples(st.integers(-6, 6), st.integers(-8, 8)), min_size=1, max_size=5))
def test_exact_convolution_matches_integer_oracle(a, b):
    ma = SignedMeasure.from_atoms([(k, w / 8) for k, w in a], exact=True)
    mb = SignedMeasure.from_atoms([(k, w / 8) for k, w in b], exact=True)
    acc = {}
    for ka, wa in ma.atoms():
        for kb, wb in mb.atoms():
            acc[ka + kb] = acc.get(ka + kb, 0) + round(wa * 8) * round(wb * 8)
    want = [(k, v / 64) for k, v in sorted(acc.items()) if v]
    assert atoms(convolve(ma, mb)) == want
