import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _util import sparse_probability
from rittlab.errors import NumericalError
from rittlab.lemmalab import (BlockDiff, BlockMax, KernelFamily, QFamily, envelope_check,
                              extrapolate, geometric_tail_bound, ladder_verdict,
                              literal_verdict, quad_abcd, quad_blocks)
from rittlab.spectral import NuAlphaSymbol, fourier_eval
from rittlab.varosc import BlockSequence, gap_sequence
from rittlab.zmeasure import delta_kernel, dirac, lazy_walk, symmetric_walk

NU = NuAlphaSymbol(0.5)


class TestTailBound:
    @settings(max_examples=80, deadline=None)
    @given(st.floats(-3, 6), st.floats(0.05, 0.995), st.integers(1, 300))
    def test_dominates_sum(self, e, x, N):
        n = np.arange(N + 1, N + 20000, dtype=float)
        true = math.fsum(n ** e * x ** n)
        bound = geometric_tail_bound(e, np.array([x]), N)[0]
        assert math.isfinite(bound)
        if true > 1e-290:  # subnormal sums carry no relative precision
            assert bound >= true * (1 - 1e-9)

    def test_reasonably_tight(self):
        x, N, e = 0.99, 200, 1.0
        n = np.arange(N + 1, 20000, dtype=float)
        true = math.fsum(n ** e * x ** n)
        assert geometric_tail_bound(e, np.array([x]), N)[0] <= 1.05 * true

    def test_underflow_regime(self):
        # regularized incomplete gamma underflows here; the fallback must not
        b = geometric_tail_bound(3.0, np.array([0.2]), 400)[0]
        n = np.arange(401, 600, dtype=float)
        assert math.isfinite(b) and b >= math.fsum(n ** 3 * 0.2 ** n) > 0

    def test_zero_ratio(self):
        assert geometric_tail_bound(2.0, np.array([0.0]), 10)[0] == 0

    def test_rejects_unit(self):
        with pytest.raises(NumericalError):
            geometric_tail_bound(0.0, np.array([1.0]), 10)


FAMILIES = [
    QFamily(NU, 0.8, 2, 1),
    QFamily(NU, 0.3, 3, 1.5),
    BlockDiff(NU, 0.5, 1, gap_sequence(0.5, 1, 400), 2),
    BlockMax(NU, 0.5, 0.7, gap_sequence(0.5, 1, 400), 2),
]


class TestEvaluators:
    @pytest.mark.parametrize("fam", FAMILIES, ids=lambda f: f.label)
    def test_derivatives_match_differences(self, fam):
        rng = np.random.default_rng(0)
        h = 1e-6
        top = len(fam.blocks) - 1 if fam.kind == "BlockDiff" else 200
        for _ in range(100):
            n = int(rng.integers(1 if fam.kind != "BlockDiff" else 0, top))
            t = float(rng.uniform(0.01, 0.49))
            for order in (1, 2):
                fd = (fam.member(n, [t + h], order - 1) - fam.member(n, [t - h], order - 1)) / (2 * h)
                an = fam.member(n, [t], order)
                assert abs(fd - an).item() <= 1e-4 * max(abs(an).item(), 1e-12)

    def test_kernel_side_agrees(self):
        rng = np.random.default_rng(1)
        ts = np.linspace(0.02, 0.5, 25)
        for _ in range(5):
            mu = sparse_probability(rng, exact=False)
            fam = QFamily(mu, 0.7, 2, 2)
            S, tail = fam.power_sum(ts, 0, 64, certify_tail=False)
            assert np.all(tail == 0)
            direct = sum(n ** 0.7 * np.abs(fourier_eval(delta_kernel(mu, n, 2), ts)) ** 2
                         for n in range(1, 65))
            assert np.allclose(S, direct, rtol=1e-9, atol=1e-300)

    def test_certified_sum_dominates_longer_truncation(self):
        fam = QFamily(NU, 1.0, 2, 1)
        ts = np.array([0.001, 0.01, 0.2])
        for order in (0, 1, 2):
            short, _ = fam.power_sum(ts, order, 64)
            long, _ = fam.power_sum(ts, order, 4096, certify_tail=False)
            assert np.all(short >= long * (1 - 1e-12))

    def test_validation(self):
        with pytest.raises(ValueError):
            KernelFamily("Q", NU, r=0, s=2)
        with pytest.raises(ValueError):
            BlockMax(NU, 0, 1, BlockSequence([4]), 2)
        with pytest.raises(ValueError):
            KernelFamily("Other", NU, r=1, s=2)


class TestVerdicts:
    def test_geometric_decay(self):
        assert ladder_verdict(0.9 ** np.arange(12)) == "converged"

    def test_growth(self):
        assert ladder_verdict(1.2 ** np.arange(12)) == "diverging"

    def test_flat_is_gray(self):
        assert ladder_verdict(np.ones(12)) == "inconclusive"

    def test_zero(self):
        assert ladder_verdict(np.zeros(5)) == "converged"

    def test_literal_rule(self):
        assert literal_verdict(0.3 ** np.arange(8)) == "converged"
        assert literal_verdict(10.0 ** np.arange(8)) == "diverging"
        assert literal_verdict(1.2 ** np.arange(8)) == "inconclusive"

    def test_extrapolation(self):
        d = 0.5 ** np.arange(10)
        assert extrapolate(d) == pytest.approx(2.0, rel=1e-12)
        assert extrapolate(np.ones(5)) == math.inf


class TestQuad:
    def test_zero_family(self):
        r = quad_abcd(QFamily(dirac(0), 1, 2, 1), n_max=32, grid_levels=4)
        assert r.values == {"A": 0.0, "B": 0.0, "C": 0.0, "D": 0.0}
        assert set(r.verdicts.values()) == {"converged"}

    def test_periodicity_obstruction(self):
        with pytest.raises(NumericalError, match="t=0.5"):
            quad_abcd(QFamily(symmetric_walk(), 1, 2, 1), n_max=16, grid_levels=3)

    def test_singleton_blocks_reduce_exactly(self):
        blocks = BlockSequence(np.arange(1, 66))
        a = quad_blocks(BlockMax(NU, 1.0, 1, blocks, 2), n_max=64, grid_levels=5, cells=16)
        b = quad_abcd(QFamily(NU, 1.0, 2, 1), n_max=64, grid_levels=5, cells=16,
                      certify_tail=False)
        assert a.values == b.values
        for q in "ABCD":
            assert np.array_equal(a.ladder[q], b.ladder[q])

    def test_gap_blocks_converge(self):
        fam = BlockMax(NU, 0, 1, gap_sequence(0.5, 1, 1025), 2)
        r = quad_blocks(fam, n_max=1024, grid_levels=10, cells=32)
        assert r.verdicts["A"] == "converged"

    def test_heavy_weight_blocks_diverge(self):
        fam = BlockMax(NU, 3, 1, gap_sequence(0.5, 1, 1025), 2)
        r = quad_blocks(fam, n_max=1024, grid_levels=10, cells=32)
        assert r.verdicts["A"] == "diverging"

    def test_blocks_within_n_max(self):
        fam = BlockMax(NU, 0, 1, gap_sequence(0.5, 1, 200), 2)
        with pytest.raises(ValueError):
            quad_blocks(fam, n_max=100)

    def test_divergence_monotone_in_r(self):
        verdicts = [quad_abcd(QFamily(NU, 1, 2, r), n_max=512, grid_levels=10,
                              cells=32).verdicts["A"] for r in (0.8, 0.6, 0.4)]
        first = verdicts.index("diverging")
        assert all(v == "diverging" for v in verdicts[first:])

    def test_weights_variant(self):
        r = quad_abcd(QFamily(NU, 0, 2, 1), n_max=512, grid_levels=10, cells=32,
                      weights="weak")
        assert all(math.isfinite(v) for v in r.values.values())
        assert r.verdicts["A"] == "converged"
        with pytest.raises(ValueError):
            quad_abcd(QFamily(NU, 0, 2, 1), weights="other")

    def test_csv_rows(self):
        r = quad_abcd(QFamily(lazy_walk(), 0, 2, 1), n_max=64, grid_levels=3, cells=8)
        rows = r.rows()
        assert len(rows) == 12
        assert rows[0][:2] == ("A", 0)
        assert "E_site0" in r.diagnostics


class TestEnvelope:
    def test_seqest(self):
        fam = BlockDiff(NU, 0, 1, gap_sequence(0.5, 1, 4096), 2)
        r = envelope_check(fam, ("|2 sin pi t|^a", 0.5), "seqest", levels=8, gamma=0)
        assert r.holds and math.isfinite(r.empirical_C)

    def test_eqA(self):
        r = envelope_check(QFamily(NU, 0, 2, 1), ("|t|^a", 0.5), "eqA", levels=10, n_max=1024)
        assert r.holds and math.isfinite(r.empirical_C)

    def test_eqA_alpha_minus_one_branch(self):
        r = envelope_check(QFamily(NU, -1, 2, 1), ("|t|^a", 0.5), "eqA", levels=10, n_max=1024)
        assert r.holds

    def test_zero_family(self):
        r = envelope_check(QFamily(dirac(0), 0, 2, 1), ("|t|^a", 0.5), "eqA", levels=4)
        assert r.empirical_C == 0

    def test_witness_where_rhs_vanishes(self):
        # h' = 0 at t = 1/2 for the sine majorant
        r = envelope_check(QFamily(NU, 0, 2, 1), ("|2 sin pi t|^a", 0.5), "eqA", levels=4)
        assert not r.holds and r.witness_t == 0.5

    @pytest.mark.parametrize("eid", ["eqnk", "eqnkprime", "eqnk2prime"])
    def test_block_estimates(self, eid):
        fam = BlockDiff(NU, 0, 1, gap_sequence(0.5, 1, 4096), 2)
        r = envelope_check(fam, ("|t|^a", 0.5), eid, levels=8)
        assert r.holds

    def test_errors(self):
        with pytest.raises(ValueError):
            envelope_check(QFamily(NU, 0, 2, 1), ("|t|^a", 0.5), "eqZ")
        with pytest.raises(ValueError):
            envelope_check(QFamily(NU, 0, 2, 1), ("|t|^a", 0.5), "eqnk")
