import numpy as np
import pytest

from _util import quantized_cyclic, sparse_probability
from rittlab.spectral import NuAlphaSymbol, fourier_eval
from rittlab.sqfun import (QSpec, Signal, abel_domination_check, apply_measure,
                           l1_from_kernels, max_weighted_orbit, orbit, q_function)
from rittlab.zmeasure import dirac, lazy_walk, nu_alpha

NU = NuAlphaSymbol(0.5)


class TestApply:
    def test_identity(self):
        f = Signal.cyclic([1.0, -2.0, 3.5])
        assert np.array_equal(apply_measure(dirac(0), f).values, f.values)

    def test_rotation(self):
        f = Signal.cyclic([1.0, 0, 0, 0])
        assert apply_measure(dirac(1), f).values.tolist() == [0, 1, 0, 0]

    def test_window_shift(self):
        g = apply_measure(dirac(2), Signal.window([1.0, 2.0], start=-1))
        assert g.start == 1 and g.values.tolist() == [1.0, 2.0]

    def test_multiplier_identity(self):
        rng = np.random.default_rng(0)
        N = 32
        for _ in range(10):
            nu = sparse_probability(rng, spread=40, exact=False)
            f = Signal.cyclic(rng.standard_normal(N))
            out = np.fft.fft(apply_measure(nu, f).values)
            mult = fourier_eval(nu, np.arange(N) / N)
            assert np.max(np.abs(out - mult * np.fft.fft(f.values))) <= 1e-10

    def test_linearity(self):
        rng = np.random.default_rng(1)
        nu = sparse_probability(rng, exact=False)
        f, g = (Signal.cyclic(rng.standard_normal(16)) for _ in range(2))
        lhs = apply_measure(nu, f.scale(2.0) + g.scale(-3.0)).values
        rhs = 2 * apply_measure(nu, f).values - 3 * apply_measure(nu, g).values
        assert np.max(np.abs(lhs - rhs)) <= 1e-12


class TestOrbit:
    def test_routes_agree_integer_r(self):
        mu = nu_alpha(0.5, 64)
        f = quantized_cyclic(np.random.default_rng(2), 32)
        a = orbit(mu, 2, f, 40, route="spectral").values
        b = orbit(mu, 2, f, 40, route="kernel").values
        assert np.max(np.abs(a - b)) <= 1e-12

    def test_kernel_route_needs_measure(self):
        with pytest.raises(TypeError):
            orbit(NU, 1, Signal.spike_cyclic(8), 4, route="kernel")

    def test_window_orbit_matches_cyclic(self):
        mu = lazy_walk()
        w = orbit(mu, 1, Signal.spike_window(0), 5)
        c = orbit(mu, 1, Signal.spike_cyclic(64, 0).scale(1 / 64), 5)
        # the window is wide enough that wrap-around never happens
        for n in range(5):
            row = np.zeros(64)
            row[w.template.sites % 64] = w.values[n]
            assert np.allclose(row, c.values[n], atol=1e-15)


class TestQ:
    def test_zero_signal(self):
        res = q_function(NU, QSpec(1, 2, 1, n_max=16), Signal.cyclic(np.zeros(8)))
        assert np.all(res.q.values == 0)

    def test_identity_operator(self):
        res = q_function(dirac(0), QSpec(1, 2, 2, n_max=16), Signal.spike_cyclic(8))
        assert np.all(res.q.values == 0)

    def test_spike_stabilizes(self):
        f = Signal.spike_cyclic(256)
        vals = [q_function(NU, QSpec(1, 2, 1, n_max=n), f).l1() for n in (64, 128, 256)]
        rel = [abs(b - a) / b for a, b in zip(vals, vals[1:])]
        assert max(rel) < 0.05

    def test_boundary_slower(self):
        f = Signal.spike_cyclic(256)
        strict = [q_function(NU, QSpec(1, 2, 1, n_max=n), f).l1() for n in (128, 256)]
        bound = [q_function(NU, QSpec(1, 1, 1, n_max=n), f).l1() for n in (128, 256)]
        assert abs(bound[1] - bound[0]) / bound[1] > abs(strict[1] - strict[0]) / strict[1]

    def test_kernels_agree_with_spectral(self):
        mu = nu_alpha(0.5, 32)
        f = Signal.spike_cyclic(32)
        params = QSpec(0.5, 2, 1, n_max=24)
        assert l1_from_kernels(mu, params, f) == pytest.approx(q_function(mu, params, f).l1(),
                                                            rel=1e-11)

    def test_ladder_columns(self):
        res = q_function(NU, QSpec(1, 2, 1, n_max=64), Signal.spike_cyclic(16))
        assert np.all(res.partial_quarter <= res.partial_half + 1e-15)
        assert np.all(res.partial_half <= res.q.values + 1e-15)
        assert res.rows()[0][0] == 0 and len(res.rows()) == 16

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            QSpec(-1, 2, 1)
        with pytest.raises(ValueError):
            QSpec(1, 0.5, 1)


class TestMaxOrbit:
    def test_shift_spike(self):
        res = max_weighted_orbit(dirac(1), 0, 1, Signal.spike_window(0), 8)
        v = res.values
        assert v.values[(v.sites >= 1) & (v.sites <= 9)].tolist() == [1.0] * 9

    def test_fractional_decays(self):
        f = Signal.spike_cyclic(256)
        res = max_weighted_orbit(NU, 0.4, 0.5, f, 256)
        assert res.bounded_regime
        k = int(res.argmax_n[8])
        assert 1 < k < 256
        O = orbit(NU, 0.5, f, 256)
        w = O.ns ** 0.4 * np.abs(O.values[:, 8])
        assert w[-1] < w[k - 1] / 10
        assert w[k - 1] == res.values.values[8]

    def test_zero(self):
        res = max_weighted_orbit(NU, 0.4, 0.5, Signal.cyclic(np.zeros(8)), 16)
        assert np.all(res.values.values == 0)


class TestAbel:
    def test_zero_signal(self):
        rep = abel_domination_check(NU, 0.5, 1, Signal.cyclic(np.zeros(8)), 16)
        assert rep.ratio == 0 and rep.passed

    @pytest.mark.parametrize("mu,beta,r,f", [
        (NU, 0.5, 1, Signal.spike_cyclic(256)),
        (lazy_walk(), 1.0, 2, quantized_cyclic(np.random.default_rng(3), 128)),
    ])
    def test_stable_ratio(self, mu, beta, r, f):
        a = abel_domination_check(mu, beta, r, f, 256)
        b = abel_domination_check(mu, beta, r, f, 512)
        assert a.passed and b.passed
        assert a.ratio <= 4
        assert abs(b.ratio - a.ratio) / a.ratio < 0.05

    def test_integer_r_required(self):
        with pytest.raises(ValueError):
            abel_domination_check(NU, 0.5, 1.5, Signal.spike_cyclic(8), 8)
