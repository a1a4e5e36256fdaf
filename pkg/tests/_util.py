"""Shared generators for the test suites."""
import numpy as np

from rittlab.sqfun import Signal
from rittlab.zmeasure import ProbabilityMeasure, SignedMeasure


def sparse_probability(rng, atoms=5, spread=6, exact=True):
    sites = rng.choice(np.arange(-spread, spread + 1), size=atoms, replace=False)
    w = rng.integers(1, 64, size=atoms).astype(float)
    w /= w.sum()
    # dyadic rounding keeps the exact representation short
    w = np.round(w * 2 ** 20) / 2 ** 20
    w[-1] = 1.0 - w[:-1].sum()
    return ProbabilityMeasure.from_atoms(zip(sites.tolist(), w.tolist()), exact=exact)


def sparse_signed(rng, atoms=4, spread=5):
    sites = rng.choice(np.arange(-spread, spread + 1), size=atoms, replace=False)
    w = rng.standard_normal(atoms)
    return SignedMeasure.from_atoms(zip(sites.tolist(), w.tolist()))


def quantized_cyclic(rng, N, bits=30):
    v = rng.standard_normal(N)
    return Signal.cyclic(np.round(np.ldexp(v, bits)) * 2.0 ** -bits)
