"""Acceptance criteria 1-11, one PASS/FAIL line each.

Tolerances are pinned at module level; nothing here is tuned to the outcome.
"""
import filecmp
import math
from pathlib import Path

import numpy as np
import pytest

from _util import quantized_cyclic, sparse_probability
from rittlab.cli import COMMANDS, main
from rittlab.czdecomp import cz_decompose, verify_cz, weak_constant
from rittlab.lemmalab import QFamily, quad_abcd
from rittlab.spectral import (NuAlphaSymbol, check_ba, check_with_refinement, spectral_grid)
from rittlab.sqfun import QSpec, Signal, abel_domination_check, q_function
from rittlab.varosc import svariation_brute, svariation_dp
from rittlab.zmeasure import (convolve, fractional_coeffs, lazy_walk, nu_alpha, power, ritt_constant,
                              symmetric_walk)

NU = NuAlphaSymbol(0.5)
ROOT = Path(__file__).resolve().parents[1]

OCTAVE_GROWTH_MAX = 1.05
BA_DRIFT_MAX = 0.02
CZ_RECON_TOL = 1e-12
CZ_CANCEL_TOL = 1e-10
WEAK_DRIFT_MAX = 0.10
ABEL_RATIO_MAX = 4.0
ABEL_DRIFT_MAX = 0.05
POINTWISE_SLACK = 1e-12


@pytest.fixture
def verdict(capsys):
    def report(num: int, title: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[criterion {num:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        assert ok, detail
    return report


def test_c01_variation_oracle(verdict):
    rng = np.random.default_rng(101)
    bad = 0
    for i in range(200):
        x = rng.standard_normal(int(rng.integers(1, 11)))
        s = (1, 1.5, 2, 3)[i % 4]
        bad += svariation_dp(x, s).value != svariation_brute(x, s).value
    verdict(1, "s-variation DP vs brute force", bad == 0, f"{bad}/200 mismatches (exact ==)")


def test_c02_convolution_oracle(verdict):
    rng = np.random.default_rng(202)
    bad = 0
    for _ in range(20):
        mu = sparse_probability(rng, atoms=int(rng.integers(2, 6)), spread=4)
        it = power(mu, 0)
        for n in range(1, 65):
            it = convolve(it, mu)
            bad += not power(mu, n).identical(it)
    verdict(2, "convolution powers vs iterated convolution", bad == 0,
            f"{bad}/1280 powers differ bitwise")


def test_c03_fractional_coefficients(verdict):
    g = tuple(float(x) for x in fractional_coeffs(0.5, 4).coeffs)
    exact = g == (0.5, 0.125, 0.0625, 0.0390625)
    total = math.fsum(fractional_coeffs(0.5, 10 ** 6).coeffs)
    ok = exact and 0.999 <= total <= 1
    verdict(3, "fractional coefficients", ok, f"g(1/2,1..4)={g}, sum to 1e6 = {total!r}")


def test_c04_ritt_dichotomy(verdict):
    walk = ritt_constant(symmetric_walk(), 512)
    linear = np.array_equal(walk.values, 2.0 * walk.n)
    tr = ritt_constant(nu_alpha(0.5, 4096), 512)
    excess = tr.sup / tr.values[-1]
    octave = tr.octave_ratio()
    ok = linear and excess >= 1 and octave <= OCTAVE_GROWTH_MAX
    verdict(4, "Ritt dichotomy", ok,
            f"walk trace == 2n: {linear}; nu_1/2 sup/last = {excess:.4g}, "
            f"last-octave ratio = {octave:.4g} (<= {OCTAVE_GROWTH_MAX})")


def test_c05_spectral_gate(verdict):
    rep, drift = check_with_refinement(NU, "|2 sin pi t|^a", 0.5, levels=12)
    worst = max(drift.values())
    walk = check_ba(spectral_grid(symmetric_walk())).records[0]
    near_half = abs(walk.worst_t - 0.5) < 1e-3
    ok = rep.holds and len(rep.records) == 5 and worst < BA_DRIFT_MAX and \
        not walk.holds and near_half
    consts = ", ".join(f"{r.name}={r.best_constant:.4g}" for r in rep.records)
    verdict(5, "BA1/BA2 gate", ok,
            f"nu_1/2 [{consts}] max drift {worst:.2e}; walk witness t={walk.worst_t}")


def test_c06_cz_invariants(verdict):
    rng = np.random.default_rng(606)
    fails = []
    for i in range(1000):
        N = (64, 256, 1024)[i % 3]
        if i % 2:
            f = quantized_cyclic(rng, N)
        else:
            v = np.zeros(N)
            idx = rng.choice(N, size=int(rng.integers(1, 9)), replace=False)
            v[idx] = rng.integers(-40, 41, size=idx.size)
            f = Signal.cyclic(v)
        # above twice the mean of |f| the bad set cannot cover the circle
        lam = float(2 * np.abs(f.values).mean() * 10 ** rng.uniform(0.001, 1.5))
        rep = verify_cz(cz_decompose(f, lam), f)
        fmax = max(1.0, float(np.abs(f.values).max()))
        checks = {
            "reconstruction": rep["reconstruction"].value <= CZ_RECON_TOL * fmax,
            "c": rep["c"].value <= CZ_CANCEL_TOL * fmax,
            "e": rep["e"].holds, "f_inf": rep["f_inf"].holds, "f_l1": rep["f_l1"].holds,
        }
        fails += [(i, k) for k, ok in checks.items() if not ok]
    verdict(6, "CZ decomposition invariants", not fails,
            f"{len(fails)} failures over 1000 (f, lambda) pairs" + (f", first {fails[:3]}" if fails else ""))


def test_c07_sharp_regime(verdict):
    inside = quad_abcd(QFamily(NU, 0.8, 2, 1), grid_levels=12)
    outside = quad_abcd(QFamily(NU, 1, 2, 0.4), grid_levels=12)
    ok = all(v == "converged" for v in inside.verdicts.values()) and \
        all(v == "diverging" for v in outside.verdicts.values())
    verdict(7, "sharp-regime quadrature", ok,
            f"(0.8,2,1) {inside.verdicts}; (1,2,0.4) {outside.verdicts}")


def test_c08_weak_profile(verdict):
    w = []
    for N in (256, 512):
        f = Signal.spike_cyclic(N)
        w.append(weak_constant(q_function(NU, QSpec(1, 2, 1, 256), f).q, f.l1()))
    drift = abs(w[1] - w[0]) / w[0]
    verdict(8, "weak (1,1) constant under N doubling", drift < WEAK_DRIFT_MAX,
            f"C(256)={w[0]:.6g}, C(512)={w[1]:.6g}, change {drift:.2e}")


def test_c09_abel_domination(verdict):
    cases = [("nu_1/2 spike", NU, 0.5, 1, Signal.spike_cyclic(256)),
             ("lazy walk random", lazy_walk(), 1.0, 2,
              quantized_cyclic(np.random.default_rng(909), 128))]
    ok, parts = True, []
    for name, mu, beta, r, f in cases:
        a = abel_domination_check(mu, beta, r, f, 256).ratio
        b = abel_domination_check(mu, beta, r, f, 512).ratio
        drift = abs(b - a) / a
        ok &= a <= ABEL_RATIO_MAX and b <= ABEL_RATIO_MAX and drift < ABEL_DRIFT_MAX
        parts.append(f"{name}: {a:.4g} -> {b:.4g} ({drift:.1e})")
    verdict(9, "Abel domination", ok, "; ".join(parts))


def test_c10_pointwise_comparison(verdict):
    rng = np.random.default_rng(1010)
    worst, bad = 0.0, 0
    for i in range(50):
        f = quantized_cyclic(rng, 128)
        rhs = q_function(NU, QSpec(1, 2, 1, 256), f).q.values
        for s in (2, 3, 4):
            lhs = q_function(NU, QSpec(s / 2, s, 1, 256), f).q.values
            bad += int(np.sum(lhs > rhs * (1 + POINTWISE_SLACK)))
            worst = max(worst, float(np.max(lhs / rhs)))
    verdict(10, "pointwise Q comparison", bad == 0, f"{bad} violations, max ratio {worst:.6g}")


def test_c11_cli_determinism(verdict, tmp_path, capsys):
    text = (ROOT / "configs" / "nu_half_boundary.ini").read_text()
    cfg = tmp_path / "c.ini"
    cfg.write_text(text.replace("[ritt]\nN = 512", "[ritt]\nN = 128"))
    sweep = tmp_path / "s.ini"
    sweep.write_text((ROOT / "configs" / "sweep_regimes.ini").read_text()
                     .replace("grid_levels = 8", "grid_levels = 4"))
    differ = []
    for cmd in COMMANDS:
        src = sweep if cmd == "sweep" else cfg
        outs = [tmp_path / f"{cmd}-{k}" for k in (0, 1)]
        codes = [main([cmd, "--config", str(src), "--out", str(o), "--plot"]) for o in outs]
        names = sorted(p.name for p in outs[0].iterdir())
        _, mism, err = filecmp.cmpfiles(outs[0], outs[1], names, shallow=False)
        if codes != [0, 0] or mism or err or names != sorted(p.name for p in outs[1].iterdir()):
            differ.append(cmd)
    capsys.readouterr()
    verdict(11, "CLI byte determinism", not differ,
            f"{len(COMMANDS)} subcommands, non-reproducible: {differ or 'none'}")
