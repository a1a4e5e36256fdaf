"""Finitely supported signed measures on the integers.

A measure is stored as strictly increasing integer sites with nonzero float
weights.  Measures whose weights are all dyadic rationals can additionally
carry an exact representation ``(numerators, exponent)`` meaning
``weight_i = numerators[i] * 2**exponent``; convolution of two exact
measures is then carried out in integer arithmetic and is free of rounding.
That is what makes ``power`` bit-identical to an iterated convolution chain
and what lets the Ritt trace of the symmetric walk come out as exactly 2n.

Float measures carry an ``l1_error`` certificate: an upper bound on the
l1 distance to the object they approximate (truncation tails, pruned
weights, transform noise).
"""
from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.fft as sfft

from .errors import CapacityError

DEFAULT_CAPACITY = 1 << 22
_EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# exact dyadic helpers


def _to_dyadic(weights: Iterable[float]) -> tuple[list[int], int]:
    ratios = [float(w).as_integer_ratio() for w in weights]
    if not ratios:
        return [], 0
    k = max(q.bit_length() - 1 for _, q in ratios)
    nums = [p << (k - (q.bit_length() - 1)) for p, q in ratios]
    return _reduce(nums, -k)


def _reduce(nums: list[int], exp: int) -> tuple[list[int], int]:
    tz = None
    for n in nums:
        if n:
            t = (n & -n).bit_length() - 1
            tz = t if tz is None else min(tz, t)
            if tz == 0:
                break
    if tz:
        nums = [n >> tz for n in nums]
        exp += tz
    return nums, exp


def _from_dyadic(nums: Sequence[int], exp: int) -> np.ndarray:
    if exp >= 0:
        return np.array([float(n << exp) for n in nums], dtype=float)
    d = 1 << -exp
    # int / int is correctly rounded in Python
    return np.array([n / d for n in nums], dtype=float)


def _pack(seq: Sequence[int], slot: int) -> int:
    return int.from_bytes(b"".join(x.to_bytes(slot, "little") for x in seq), "little")


def _nonneg_conv(a: Sequence[int], b: Sequence[int]) -> list[int]:
    """Convolution of nonnegative integer sequences by Kronecker substitution."""
    n_out = len(a) + len(b) - 1
    ma, mb = max(a), max(b)
    if ma == 0 or mb == 0:
        return [0] * n_out
    bits = ma.bit_length() + mb.bit_length() + min(len(a), len(b)).bit_length() + 1
    slot = (bits + 7) // 8
    prod = _pack(a, slot) * _pack(b, slot)
    raw = prod.to_bytes(slot * n_out, "little")
    return [int.from_bytes(raw[i * slot:(i + 1) * slot], "little") for i in range(n_out)]


def _int_convolve(a: Sequence[int], b: Sequence[int]) -> list[int]:
    ap = [x if x > 0 else 0 for x in a]
    an = [-x if x < 0 else 0 for x in a]
    bp = [x if x > 0 else 0 for x in b]
    bn = [-x if x < 0 else 0 for x in b]
    n_out = len(a) + len(b) - 1
    out = [0] * n_out
    for u, v, sign in ((ap, bp, 1), (an, bn, 1), (ap, bn, -1), (an, bp, -1)):
        if any(u) and any(v):
            c = _nonneg_conv(u, v)
            if sign > 0:
                out = [x + y for x, y in zip(out, c)]
            else:
                out = [x - y for x, y in zip(out, c)]
    return out


# ---------------------------------------------------------------------------
# measure types


@dataclass(frozen=True, eq=False)
class SignedMeasure:
    """Finite signed measure on Z.

    ``sites`` is a strictly increasing int64 array and ``weights`` the
    matching nonzero float64 weights.  ``exact`` optionally holds the
    dyadic representation of the weights.
    """

    sites: np.ndarray
    weights: np.ndarray
    l1_error: float = 0.0
    exact: tuple[tuple[int, ...], int] | None = None

    def __post_init__(self):
        s = np.ascontiguousarray(self.sites, dtype=np.int64)
        w = np.ascontiguousarray(self.weights, dtype=float)
        if s.ndim != 1 or s.shape != w.shape:
            raise ValueError("sites and weights must be 1-d arrays of equal length")
        if s.size > 1 and not np.all(np.diff(s) > 0):
            raise ValueError("sites must be strictly increasing")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w == 0):
            raise ValueError("stored weights must be nonzero")
        if not (self.l1_error >= 0):
            raise ValueError("l1_error must be nonnegative")
        s.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "sites", s)
        object.__setattr__(self, "weights", w)
        if self.exact is not None:
            nums, exp = self.exact
            if len(nums) != s.size:
                raise ValueError("exact numerators do not match the sites")
            object.__setattr__(self, "exact", (tuple(nums), int(exp)))

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[int, float]], *, pruning_tol: float = 0.0,
                   exact: bool = False) -> "SignedMeasure":
        """Build from (site, weight) pairs; duplicate sites are summed.

        With ``exact=True`` the weights must be dyadic (any binary float is)
        and the measure keeps an integer representation.
        """
        acc: dict[int, float] = {}
        pairs = [(int(k), float(w)) for k, w in atoms]
        if exact:
            nums, exp = _to_dyadic([w for _, w in pairs])
            iacc: dict[int, int] = {}
            for (k, _), n in zip(pairs, nums):
                iacc[k] = iacc.get(k, 0) + n
            keys = sorted(k for k, v in iacc.items() if v != 0)
            return cls._from_exact(keys, [iacc[k] for k in keys], exp)
        for k, w in pairs:
            acc[k] = acc.get(k, 0.0) + w
        keys = sorted(acc)
        sites = np.array(keys, dtype=np.int64)
        weights = np.array([acc[k] for k in keys], dtype=float)
        return _pruned(sites, weights, pruning_tol, 0.0)

    @classmethod
    def from_dense(cls, offset: int, values: np.ndarray, *, pruning_tol: float = 0.0,
                   l1_error: float = 0.0) -> "SignedMeasure":
        """Build from a dense weight array whose first entry sits at ``offset``."""
        values = np.asarray(values, dtype=float)
        sites = np.arange(offset, offset + values.size, dtype=np.int64)
        return _pruned(sites, values, pruning_tol, l1_error)

    @classmethod
    def _from_exact(cls, sites: Sequence[int], nums: Sequence[int], exp: int,
                    **kw) -> "SignedMeasure":
        keep = [i for i, n in enumerate(nums) if n != 0]
        sites = [sites[i] for i in keep]
        nums = [nums[i] for i in keep]
        nums, exp = _reduce(list(nums), exp) if nums else ([], 0)
        return cls(np.array(sites, dtype=np.int64), _from_dyadic(nums, exp),
                   exact=(tuple(nums), exp), **kw)

    @classmethod
    def delta(cls, k: int = 0) -> "SignedMeasure":
        return cls._from_exact([int(k)], [1], 0)

    @classmethod
    def zero(cls) -> "SignedMeasure":
        return cls._from_exact([], [], 0)

    # -- views --------------------------------------------------------------

    @property
    def size(self) -> int:
        return int(self.sites.size)

    @property
    def is_zero(self) -> bool:
        return self.sites.size == 0

    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    @property
    def min_site(self) -> int:
        return int(self.sites[0])

    @property
    def max_site(self) -> int:
        return int(self.sites[-1])

    @property
    def span(self) -> int:
        return 0 if self.is_zero else self.max_site - self.min_site + 1

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    def atoms(self) -> list[tuple[int, float]]:
        return [(int(k), float(w)) for k, w in zip(self.sites, self.weights)]

    def dense(self) -> tuple[int, np.ndarray]:
        """(offset, values) over the full support window."""
        if self.is_zero:
            return 0, np.zeros(0)
        out = np.zeros(self.span)
        out[self.sites - self.min_site] = self.weights
        return self.min_site, out

    def weight(self, k: int) -> float:
        i = np.searchsorted(self.sites, k)
        if i < self.sites.size and self.sites[i] == k:
            return float(self.weights[i])
        return 0.0

    def identical(self, other: "SignedMeasure") -> bool:
        """Bitwise equality of sites and weights."""
        return (np.array_equal(self.sites, other.sites)
                and self.weights.tobytes() == other.weights.tobytes())

    def __eq__(self, other):
        if not isinstance(other, SignedMeasure):
            return NotImplemented
        return self.identical(other)

    __hash__ = None

    def __repr__(self):
        head = ", ".join(f"{k}:{w:.6g}" for k, w in self.atoms()[:6])
        more = "" if self.size <= 6 else f", ... ({self.size} atoms)"
        return f"{type(self).__name__}({head}{more})"

    # -- linear structure -----------------------------------------------------

    def _combine(self, other: "SignedMeasure", sign: int) -> "SignedMeasure":
        if self.is_exact and other.is_exact:
            (na, ea), (nb, eb) = self.exact, other.exact
            e = min(ea, eb)
            acc: dict[int, int] = {}
            for k, n in zip(self.sites.tolist(), na):
                acc[k] = acc.get(k, 0) + (n << (ea - e))
            for k, n in zip(other.sites.tolist(), nb):
                acc[k] = acc.get(k, 0) + sign * (n << (eb - e))
            keys = sorted(acc)
            return SignedMeasure._from_exact(keys, [acc[k] for k in keys], e)
        sites = np.union1d(self.sites, other.sites)
        w = np.zeros(sites.size)
        w[np.searchsorted(sites, self.sites)] += self.weights
        w[np.searchsorted(sites, other.sites)] += sign * other.weights
        keep = w != 0
        return SignedMeasure(sites[keep], w[keep],
                             l1_error=self.l1_error + other.l1_error)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return self.scale(-1.0)

    def scale(self, c: float) -> "SignedMeasure":
        c = float(c)
        if c == 0:
            return SignedMeasure.zero()
        if self.is_exact:
            cn, ce = _to_dyadic([c])
            nums, exp = self.exact
            return SignedMeasure._from_exact(self.sites.tolist(), [n * cn[0] for n in nums],
                                             exp + ce)
        return SignedMeasure(self.sites, self.weights * c, l1_error=self.l1_error * abs(c))

    def shift(self, k: int) -> "SignedMeasure":
        return SignedMeasure(self.sites + int(k), self.weights, l1_error=self.l1_error,
                             exact=self.exact)

    def as_float(self) -> "SignedMeasure":
        """Drop the exact representation (forces float arithmetic downstream)."""
        return SignedMeasure(self.sites, self.weights, l1_error=self.l1_error)


@dataclass(frozen=True, eq=False)
class ProbabilityMeasure(SignedMeasure):
    """Nonnegative measure of total mass one, up to a recorded missing tail.

    ``tail_mass`` is mass known to be missing from the stored atoms (a
    truncated infinite measure).  Validation checks
    ``|sum(weights) + tail_mass - 1| <= 1e-12``.
    """

    tail_mass: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.weights < 0):
            raise ValueError("probability measure with a negative weight")
        if not (0 <= self.tail_mass <= 1):
            raise ValueError("tail_mass must lie in [0, 1]")
        total = math.fsum(self.weights) + self.tail_mass
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"total mass {total!r} differs from 1 by more than 1e-12")

    @classmethod
    def from_measure(cls, m: SignedMeasure, tail_mass: float = 0.0) -> "ProbabilityMeasure":
        return cls(m.sites, m.weights, l1_error=m.l1_error, exact=m.exact,
                   tail_mass=tail_mass)

    @classmethod
    def from_atoms(cls, atoms, *, pruning_tol: float = 0.0, exact: bool = False,
                   tail_mass: float = 0.0) -> "ProbabilityMeasure":
        return cls.from_measure(SignedMeasure.from_atoms(atoms, pruning_tol=pruning_tol,
                                                         exact=exact), tail_mass)


def _pruned(sites: np.ndarray, weights: np.ndarray, tol: float, err: float) -> SignedMeasure:
    nz = weights != 0
    if tol > 0:
        small = nz & (np.abs(weights) < tol)
        if small.any():
            err += math.fsum(np.abs(weights[small]))
            nz &= ~small
    return SignedMeasure(sites[nz], weights[nz], l1_error=err)


# ---------------------------------------------------------------------------
# builtin measures


def dirac(k: int = 0) -> ProbabilityMeasure:
    return ProbabilityMeasure.from_measure(SignedMeasure.delta(k))


def symmetric_walk() -> ProbabilityMeasure:
    """0.5 delta_{-1} + 0.5 delta_1."""
    return ProbabilityMeasure.from_atoms([(-1, 0.5), (1, 0.5)], exact=True)


def lazy_walk() -> ProbabilityMeasure:
    """0.25 delta_{-1} + 0.5 delta_0 + 0.25 delta_1."""
    return ProbabilityMeasure.from_atoms([(-1, 0.25), (0, 0.5), (1, 0.25)], exact=True)


def lazy_shift() -> ProbabilityMeasure:
    """0.5 delta_0 + 0.5 delta_1."""
    return ProbabilityMeasure.from_atoms([(0, 0.5), (1, 0.5)], exact=True)


# ---------------------------------------------------------------------------
# algebra


def tv_norm(nu: SignedMeasure) -> float:
    """Total variation sum |w| (correctly rounded)."""
    if nu.is_exact:
        nums, exp = nu.exact
        tot = sum(abs(n) for n in nums)
        return float(tot << exp) if exp >= 0 else tot / (1 << -exp)
    return math.fsum(np.abs(nu.weights))


def _check_capacity(span: int, capacity: int):
    if span > capacity:
        raise CapacityError(f"support span {span} exceeds capacity {capacity}")


def convolve(a: SignedMeasure, b: SignedMeasure, *, pruning_tol: float = 0.0,
             capacity: int = DEFAULT_CAPACITY, method: str = "auto") -> SignedMeasure:
    """(a*b)(k) = sum_j a(j) b(k-j).

    Exact integer arithmetic when both inputs carry a dyadic representation;
    otherwise ``np.convolve`` on the dense windows, or an FFT for large
    inputs (``method="fft"`` forces it).  Transform noise below a rounding
    floor is pruned and charged to ``l1_error``.
    """
    if a.is_zero or b.is_zero:
        return SignedMeasure.zero()
    lo = a.min_site + b.min_site
    hi = a.max_site + b.max_site
    _check_capacity(hi - lo + 1, capacity)
    err = a.l1_error * tv_norm(b) + b.l1_error * tv_norm(a) + a.l1_error * b.l1_error

    if a.is_exact and b.is_exact and method in ("auto", "exact"):
        (na, ea), (nb, eb) = a.exact, b.exact
        if a.size * b.size <= 4096 or a.size < 8 or b.size < 8:
            acc: dict[int, int] = {}
            for ka, x in zip(a.sites.tolist(), na):
                for kb, y in zip(b.sites.tolist(), nb):
                    acc[ka + kb] = acc.get(ka + kb, 0) + x * y
            keys = sorted(acc)
            out = SignedMeasure._from_exact(keys, [acc[k] for k in keys], ea + eb)
        else:
            da = [0] * a.span
            for k, x in zip(a.sites.tolist(), na):
                da[k - a.min_site] = x
            db = [0] * b.span
            for k, y in zip(b.sites.tolist(), nb):
                db[k - b.min_site] = y
            prod = _int_convolve(da, db)
            out = SignedMeasure._from_exact(list(range(lo, hi + 1)), prod, ea + eb)
        if pruning_tol > 0:
            out = _pruned(out.sites, out.weights, pruning_tol, 0.0)
        if err == 0:
            return out
        return SignedMeasure(out.sites, out.weights, l1_error=err + out.l1_error,
                             exact=out.exact)

    if method == "exact":
        raise ValueError("exact convolution needs dyadic (exact) inputs")
    _, da = a.dense()
    _, db = b.dense()
    use_fft = method == "fft" or (method == "auto" and min(da.size, db.size) > 64
                                  and da.size * db.size > (1 << 22))
    if use_fft:
        n = da.size + db.size - 1
        M = sfft.next_fast_len(n, real=True)
        vals = sfft.irfft(sfft.rfft(da, M) * sfft.rfft(db, M), M)[:n]
        floor = 8 * _EPS * math.log2(M) * tv_norm(a) * tv_norm(b)
        noise = np.abs(vals) <= floor
        vals[noise] = 0.0
        err += floor * n
    else:
        vals = np.convolve(da, db)
    return SignedMeasure.from_dense(lo, vals, pruning_tol=pruning_tol, l1_error=err)


def power(mu: SignedMeasure, n: int, *, pruning_tol: float = 0.0,
          capacity: int = DEFAULT_CAPACITY, method: str = "auto") -> SignedMeasure:
    """n-fold convolution power by repeated squaring; power(mu, 0) = delta_0.

    For exact (dyadic) measures the result is bit-identical to any
    convolution chain.  Float measures agree with the chain to rounding.
    """
    n = int(n)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not mu.is_zero:
        _check_capacity(n * (mu.max_site - mu.min_site) + 1, capacity)
    kw = dict(pruning_tol=pruning_tol, capacity=capacity, method=method)
    if n == 0:
        return SignedMeasure.delta(0)
    result = None
    base = mu
    while n:
        if n & 1:
            result = base if result is None else convolve(result, base, **kw)
        n >>= 1
        if n:
            base = convolve(base, base, **kw)
    return result


# ---------------------------------------------------------------------------
# fractional differences


@dataclass(frozen=True)
class FractionalCoeffs:
    """Coefficients g(alpha, k), k = 1..K, of 1 - (1-x)^alpha."""

    alpha: float
    coeffs: np.ndarray
    tail_mass: float

    @property
    def K(self) -> int:
        return int(self.coeffs.size)


def fractional_coeffs(alpha: float, K: int) -> FractionalCoeffs:
    """g(a,1) = a, g(a,k+1) = g(a,k)(k-a)/(k+1); tail = 1 - sum."""
    alpha = float(alpha)
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0,1), got {alpha}")
    K = int(K)
    if K < 1:
        raise ValueError("K must be positive")
    k = np.arange(1, K, dtype=float)
    factors = np.empty(K)
    factors[0] = alpha
    factors[1:] = (k - alpha) / (k + 1)
    g = np.cumprod(factors)
    tail = 1.0 - math.fsum(g)
    g.setflags(write=False)
    return FractionalCoeffs(alpha, g, max(tail, 0.0))


class TailToleranceError(ValueError):
    """Truncation too short for the requested tail; ``achievable`` holds the tail reached."""

    def __init__(self, msg: str, achievable: float):
        super().__init__(msg)
        self.achievable = achievable


def nu_alpha(alpha: float, K: int, renormalize: bool = False,
             tail_tol: float | None = None) -> ProbabilityMeasure:
    """Truncation to k = 1..K of the measure with weights g(alpha, k).

    Without renormalization the missing mass is recorded as ``tail_mass``
    and ``l1_error`` equals it; renormalized weights are scaled by
    1/(1 - tail), giving an l1 distance of 2*tail to the full measure.
    """
    fc = fractional_coeffs(alpha, K)
    if tail_tol is not None and fc.tail_mass > tail_tol:
        raise TailToleranceError(
            f"K={K} leaves tail {fc.tail_mass:.3e} > tolerance {tail_tol:.3e}", fc.tail_mass)
    sites = np.arange(1, K + 1, dtype=np.int64)
    if renormalize:
        w = fc.coeffs / (1.0 - fc.tail_mass)
        return ProbabilityMeasure(sites, w, l1_error=2 * fc.tail_mass, tail_mass=0.0)
    return ProbabilityMeasure(sites, np.array(fc.coeffs), l1_error=fc.tail_mass,
                              tail_mass=fc.tail_mass)


def _binomial_row(m: int) -> list[int]:
    return [(-1) ** j * math.comb(m, j) for j in range(m + 1)]


def difference_polynomial(n: int, r: float, frac_K: int = 256) -> tuple[np.ndarray, float]:
    """Coefficients c_j of x^n (1-x)^r as a polynomial in x, and the dropped tail.

    Integer r is exact.  For fractional r the factor (1-x)^{theta} is the
    series 1 - sum_k g(theta,k) x^k cut at ``frac_K`` terms.
    """
    m = int(math.floor(r))
    theta = r - m
    row = np.array(_binomial_row(m), dtype=float)
    tail = 0.0
    if theta > 0:
        fc = fractional_coeffs(theta, frac_K)
        frac = np.concatenate([[1.0], -fc.coeffs])
        row = np.convolve(row, frac)
        tail = fc.tail_mass
    return np.concatenate([np.zeros(int(n)), row]), tail


def measure_polynomial(mu: SignedMeasure, coeffs: Sequence[float], *,
                       capacity: int = DEFAULT_CAPACITY, method: str = "auto",
                       pruning_tol: float = 0.0) -> SignedMeasure:
    """sum_j coeffs[j] mu^{*j}.

    ``method`` is "exact" (dyadic measure, integer coefficients), "direct"
    (Horner in dense float convolutions) or "fft"; "auto" chooses by cost.
    """
    c = [float(x) for x in coeffs]
    nz = [j for j, x in enumerate(c) if x != 0]
    if not nz or mu.is_zero:
        if c and c[0] != 0:
            return SignedMeasure.delta(0).scale(c[0])
        return SignedMeasure.zero()
    j0, j1 = nz[0], nz[-1]
    a, b = mu.min_site, mu.max_site
    lo = min(j0 * a, j1 * a)
    hi = max(j0 * b, j1 * b)
    _check_capacity(hi - lo + 1, capacity)
    ints = all(x == int(x) for x in c)
    if method == "auto":
        if mu.is_exact and ints:
            method = "exact"
        else:
            cost = 0.5 * j1 * j1 * max(mu.span, 1) * mu.size
            method = "direct" if cost <= 5e7 else "fft"

    if method == "exact":
        if not (mu.is_exact and ints):
            raise ValueError("exact evaluation needs a dyadic measure and integer coefficients")
        acc = SignedMeasure.delta(0).scale(c[j1]) if c[j1] else SignedMeasure.zero()
        for j in range(j1 - 1, -1, -1):
            acc = convolve(acc, mu, capacity=capacity) if not acc.is_zero else acc
            if c[j]:
                acc = acc + SignedMeasure.delta(0).scale(c[j])
        return acc

    err_mu = mu.l1_error
    norm_mu = tv_norm(mu)
    # propagated input error: sum_j |c_j| ((|mu|+e)^j - |mu|^j)
    prop = math.fsum(abs(x) * ((norm_mu + err_mu) ** j - norm_mu ** j) for j, x in enumerate(c))
    if method == "direct":
        off_mu, dmu = mu.dense()
        off, acc = 0, np.array([c[j1]])
        for j in range(j1 - 1, -1, -1):
            acc = np.convolve(acc, dmu)
            off += off_mu
            if c[j]:
                off, acc = _add_at(off, acc, 0, c[j])
        return SignedMeasure.from_dense(off, acc, pruning_tol=pruning_tol, l1_error=prop)
    if method != "fft":
        raise ValueError(f"unknown method {method!r}")
    M = sfft.next_fast_len(hi - lo + 1, real=True)
    wrap = np.zeros(M)
    np.add.at(wrap, mu.sites % M, mu.weights)
    mh = sfft.rfft(wrap)
    ph = np.full_like(mh, c[j1])
    for j in range(j1 - 1, -1, -1):
        ph = ph * mh + c[j]
    out = sfft.irfft(ph, M)
    vals = out[np.arange(lo, hi + 1) % M]
    scale = math.fsum(abs(x) * norm_mu ** j for j, x in enumerate(c))
    floor = 8 * _EPS * (math.log2(M) + j1) * scale
    vals[np.abs(vals) <= floor] = 0.0
    return SignedMeasure.from_dense(lo, vals, pruning_tol=pruning_tol,
                                    l1_error=prop + floor * vals.size)


def _add_at(offset: int, arr: np.ndarray, site: int, value: float) -> tuple[int, np.ndarray]:
    if site < offset:
        arr = np.concatenate([np.zeros(offset - site), arr])
        offset = site
    idx = site - offset
    if idx >= arr.size:
        arr = np.concatenate([arr, np.zeros(idx - arr.size + 1)])
    arr[idx] += value
    return offset, arr


def delta_kernel(mu: SignedMeasure, n: int, r: float, frac_K: int = 256, *,
                 capacity: int = DEFAULT_CAPACITY, method: str = "auto") -> SignedMeasure:
    """mu^{*n} * (delta_0 - mu)^{*r} as a signed measure.

    Integer r is exact (for dyadic mu, in integer arithmetic).  For
    fractional r the remainder of the truncated fractional series is added
    to ``l1_error`` as tail * |mu|^n * (1+|mu|)^floor(r).
    """
    n = int(n)
    if n < 0:
        raise ValueError("n must be nonnegative")
    r = float(r)
    if not r > 0:
        raise ValueError("r must be positive")
    norm = tv_norm(mu)
    if r != int(r) and norm > 1 + 1e-12:
        raise ValueError("fractional differences need |mu| <= 1")
    coeffs, tail = difference_polynomial(n, r, frac_K)
    out = measure_polynomial(mu, coeffs, capacity=capacity, method=method)
    if tail > 0:
        remainder = tail * norm ** n * (1 + norm) ** math.floor(r)
        out = SignedMeasure(out.sites, out.weights, l1_error=out.l1_error + remainder)
    return out


# ---------------------------------------------------------------------------
# Ritt trace


@dataclass(frozen=True)
class RittTrace:
    n: np.ndarray
    values: np.ndarray        # n * |mu^{*n} - mu^{*(n+1)}|_1
    running_max: np.ndarray
    method: str

    @property
    def sup(self) -> float:
        return float(self.running_max[-1])

    def octave_ratio(self) -> float:
        """max over (N/2, N] divided by max over (N/4, N/2]."""
        N = int(self.n[-1])
        hi = self.values[(self.n > N // 2)].max()
        lo = self.values[(self.n > N // 4) & (self.n <= N // 2)].max()
        return float(hi / lo)


def ritt_constant(mu: SignedMeasure, N: int, *, method: str = "auto",
                  capacity: int = DEFAULT_CAPACITY) -> RittTrace:
    """Trace n |mu^{*n} * (delta_0 - mu)|_1 for n = 1..N and its running max.

    On l1(Z) this is n times the operator norm of T^n (I - T) for the
    convolution operator of mu.  Exact measures use integer arithmetic;
    float measures use direct convolution or, for wide supports, transforms
    sized per octave of n.
    """
    N = int(N)
    if N < 1:
        raise ValueError("N must be >= 1")
    if mu.is_zero:
        vals = np.zeros(N)
        return RittTrace(np.arange(1, N + 1), vals, vals.copy(), "trivial")
    width = mu.max_site - mu.min_site
    _check_capacity((N + 1) * width + 1, capacity)
    if method == "auto":
        if mu.is_exact:
            method = "exact"
        else:
            cost = 0.5 * N * N * max(width, 1) * mu.size
            method = "direct" if cost <= 2e8 else "fft"
    vals = np.empty(N)
    if method == "exact":
        if not mu.is_exact:
            raise ValueError("exact trace needs a dyadic measure")
        cur = mu
        for n in range(1, N + 1):
            nxt = convolve(cur, mu, capacity=capacity)
            vals[n - 1] = n * tv_norm(cur - nxt)
            cur = nxt
    elif method == "direct":
        o, dmu = mu.dense()
        cur = dmu.copy()
        for n in range(1, N + 1):
            nxt = np.convolve(cur, dmu)
            a, b = n * o, (n + 1) * o
            lo = min(a, b)
            hi = max(a + cur.size, b + nxt.size)
            d = np.zeros(hi - lo)
            d[a - lo:a - lo + cur.size] += cur
            d[b - lo:b - lo + nxt.size] -= nxt
            vals[n - 1] = n * math.fsum(np.abs(d))
            cur = nxt
    elif method == "fft":
        n0 = 1
        while n0 <= N:
            n1 = min(2 * n0 - 1, N)
            M = sfft.next_fast_len((n1 + 1) * width + 1, real=True)
            wrap = np.zeros(M)
            np.add.at(wrap, mu.sites % M, mu.weights)
            mh = sfft.rfft(wrap)
            pw = mh ** n0 * (1 - mh)
            for n in range(n0, n1 + 1):
                vals[n - 1] = n * np.abs(sfft.irfft(pw, M)).sum()
                pw *= mh
            n0 = n1 + 1
    else:
        raise ValueError(f"unknown method {method!r}")
    n = np.arange(1, N + 1)
    return RittTrace(n, vals, np.maximum.accumulate(vals), method)


# ---------------------------------------------------------------------------
# text serialization


def format_measure(mu: SignedMeasure, comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    for k, w in zip(mu.sites.tolist(), mu.weights.tolist()):
        buf.write(f"{k}\t{w:.17g}\n")
    return buf.getvalue()


def parse_measure(text: str, *, exact: bool = False) -> SignedMeasure:
    atoms = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'site<TAB>weight'")
        atoms.append((int(parts[0]), float(parts[1])))
    sites = [k for k, _ in atoms]
    if any(b <= a for a, b in zip(sites, sites[1:])):
        raise ValueError("sites must be strictly increasing")
    return SignedMeasure.from_atoms(atoms, exact=exact)


def write_measure(mu: SignedMeasure, path: str | os.PathLike, comments: Sequence[str] = ()):
    with open(path, "w", newline="\n") as fh:
        fh.write(format_measure(mu, comments))


def read_measure(path: str | os.PathLike, *, exact: bool = False) -> SignedMeasure:
    with open(path) as fh:
        return parse_measure(fh.read(), exact=exact)
