"""Orbits T^n (I - T)^r f of convolution operators and functionals built on them.

Signals live either on the cyclic group Z_N (uniform probability measure,
rotation x -> x+1) or on a finite window of Z (counting measure, zero
outside).  The operator of a measure nu acts by

    (T_nu f)(x) = sum_k nu(k) f(x - k),

so delta_1 moves a spike at 0 to 1.  On Z_N the orbit is computed either by
the exact Fourier multiplier mu_hat(j/N)^n (1 - mu_hat(j/N))^r or by
applying difference kernels; both routes agree to rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, NumericalError
from .spectral import fourier_eval
from .zmeasure import DEFAULT_CAPACITY, SignedMeasure, delta_kernel


@dataclass(frozen=True, eq=False)
class Signal:
    """Function on Z_N (``modulus`` set) or on the window [start, start+len) of Z."""

    values: np.ndarray
    modulus: int | None = None
    start: int = 0

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.dtype.kind not in "fc":
            v = v.astype(float)
        if v.ndim != 1:
            raise ValueError("signal values must be 1-d")
        if self.modulus is not None:
            if self.modulus != v.size or v.size == 0:
                raise ValueError("cyclic signal needs exactly N values")
            if self.start != 0:
                raise ValueError("cyclic signals start at 0")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def cyclic(cls, values) -> "Signal":
        v = np.asarray(values)
        return cls(v, modulus=v.size)

    @classmethod
    def window(cls, values, start: int = 0) -> "Signal":
        return cls(np.asarray(values), None, int(start))

    @classmethod
    def spike_cyclic(cls, N: int, position: int = 0) -> "Signal":
        """N * 1_{position} on Z_N, so that |f|_1 = 1."""
        v = np.zeros(N)
        v[position % N] = N
        return cls.cyclic(v)

    @classmethod
    def spike_window(cls, position: int = 0) -> "Signal":
        return cls.window([1.0], position)

    @classmethod
    def random_cyclic(cls, N: int, rng: np.random.Generator) -> "Signal":
        return cls.cyclic(rng.standard_normal(N))

    @property
    def is_cyclic(self) -> bool:
        return self.modulus is not None

    @property
    def measure_weight(self) -> float:
        return 1.0 / self.modulus if self.is_cyclic else 1.0

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.start, self.start + self.size)

    def l1(self) -> float:
        return self.measure_weight * math.fsum(np.abs(self.values))

    def with_values(self, values) -> "Signal":
        return Signal(np.asarray(values), self.modulus, self.start)

    def __add__(self, other: "Signal") -> "Signal":
        if self.is_cyclic:
            if other.modulus != self.modulus:
                raise ValueError("signals on different groups")
            return self.with_values(self.values + other.values)
        lo = min(self.start, other.start)
        hi = max(self.start + self.size, other.start + other.size)
        out = np.zeros(hi - lo, dtype=np.result_type(self.values, other.values))
        out[self.start - lo:self.start - lo + self.size] += self.values
        out[other.start - lo:other.start - lo + other.size] += other.values
        return Signal.window(out, lo)

    def scale(self, c) -> "Signal":
        return self.with_values(self.values * c)


def _fold(nu: SignedMeasure, N: int) -> np.ndarray:
    folded = np.zeros(N)
    np.add.at(folded, nu.sites % N, nu.weights)
    return folded


def apply_measure(nu: SignedMeasure, f: Signal, *,
                  capacity: int = DEFAULT_CAPACITY) -> Signal:
    """(T_nu f)(x) = sum_k nu(k) f(x-k): circular on Z_N, full window on Z."""
    if nu.is_zero:
        return f.with_values(np.zeros_like(f.values)) if f.is_cyclic else \
            Signal.window(np.zeros(1, dtype=f.values.dtype), f.start)
    if f.is_cyclic:
        N = f.modulus
        folded = _fold(nu, N)
        out = np.zeros(N, dtype=np.result_type(f.values, float))
        for j in np.flatnonzero(folded):
            out += folded[j] * np.roll(f.values, j)
        return f.with_values(out)
    width = f.size + nu.span - 1
    if width > capacity:
        raise CapacityError(f"output window {width} exceeds capacity {capacity}")
    off, dense = nu.dense()
    return Signal.window(np.convolve(dense, f.values), f.start + off)


# ---------------------------------------------------------------------------
# orbits


@dataclass(frozen=True)
class Orbit:
    """Rows n = 1..n_max (plus one look-ahead row) of T^n (I-T)^r f on a common domain."""

    values: np.ndarray        # shape (n_max, P)
    next_row: np.ndarray      # T^{n_max+1} (I-T)^r f
    template: Signal          # domain of each row
    route: str

    @property
    def n_max(self) -> int:
        return int(self.values.shape[0])

    @property
    def ns(self) -> np.ndarray:
        return np.arange(1, self.n_max + 1)


def _multiplier(mu, N: int) -> np.ndarray:
    return fourier_eval(mu, np.arange(N) / N, 0)


def _diff_power(m: np.ndarray, r: float) -> np.ndarray:
    d = 1 - m
    if float(r).is_integer():
        return d ** int(r)
    out = d ** r
    return np.where(d == 0, 0.0, out)


def orbit(mu, r: float, f: Signal, n_max: int, *, frac_K: int = 256,
          route: str = "auto", capacity: int = DEFAULT_CAPACITY) -> Orbit:
    """Materialize T^n (I-T)^r f for n = 1..n_max (+1 look-ahead row).

    ``route="spectral"`` (cyclic only) uses the exact multiplier of ``mu``
    at the frequencies j/N; ``mu`` may then also be a closed-form symbol.
    ``route="kernel"`` applies delta_kernel(mu, 0, r) once and then mu
    repeatedly.
    """
    n_max = int(n_max)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if route == "auto":
        route = "spectral" if f.is_cyclic else "kernel"
    # real measures have conjugate-symmetric symbols, so real f stays real
    real = f.values.dtype.kind == "f"
    if route == "spectral":
        if not f.is_cyclic:
            raise ValueError("the spectral route needs a cyclic signal")
        N = f.modulus
        m = _multiplier(mu, N)
        base = np.fft.fft(f.values) * _diff_power(m, r)
        rows = np.empty((n_max + 1, N), dtype=float if real else complex)
        p = np.ones(N, dtype=complex)
        for n in range(1, n_max + 2):
            p = p * m
            row = np.fft.ifft(p * base)
            rows[n - 1] = row.real if real else row
        return Orbit(rows[:-1], rows[-1], f, route)
    if route != "kernel":
        raise ValueError(f"unknown route {route!r}")
    if not isinstance(mu, SignedMeasure):
        raise TypeError("the kernel route needs a finitely supported measure")
    kern = delta_kernel(mu, 0, r, frac_K, capacity=capacity)
    cur = apply_measure(kern, f, capacity=capacity)
    if f.is_cyclic:
        rows = np.empty((n_max + 1, f.modulus), dtype=cur.values.dtype)
        for n in range(1, n_max + 2):
            cur = apply_measure(mu, cur)
            rows[n - 1] = cur.values
        return Orbit(rows[:-1], rows[-1], f, route)
    a, b = mu.min_site, mu.max_site
    lo = cur.start + min(a, (n_max + 1) * a)
    hi = cur.start + cur.size - 1 + max(b, (n_max + 1) * b)
    if hi - lo + 1 > capacity:
        raise CapacityError(f"orbit window {hi - lo + 1} exceeds capacity {capacity}")
    rows = np.zeros((n_max + 1, hi - lo + 1), dtype=cur.values.dtype)
    for n in range(1, n_max + 2):
        cur = apply_measure(mu, cur, capacity=capacity)
        rows[n - 1, cur.start - lo:cur.start - lo + cur.size] = cur.values
    return Orbit(rows[:-1], rows[-1], Signal.window(np.zeros(hi - lo + 1), lo), route)


def _check_finite(arr: np.ndarray, what: str):
    bad = ~np.isfinite(arr)
    if bad.any():
        n = int(np.argmax(bad.any(axis=1))) + 1
        raise NumericalError(f"non-finite {what} at n={n}")


# ---------------------------------------------------------------------------
# square functions


@dataclass(frozen=True)
class QSpec:
    alpha: float
    s: float
    r: float
    n_max: int = 256
    frac_K: int = 256

    def __post_init__(self):
        if not self.alpha > -1:
            raise ValueError("alpha must exceed -1")
        if not self.s >= 1:
            raise ValueError("s must be >= 1")
        if not self.r > 0:
            raise ValueError("r must be positive")
        if int(self.n_max) < 1:
            raise ValueError("n_max must be >= 1")


@dataclass(frozen=True)
class QResult:
    q: Signal
    partial_quarter: np.ndarray
    partial_half: np.ndarray
    partial_three_quarter: np.ndarray
    argmax_n: np.ndarray
    tail_diagnostic: float
    tail_flag: np.ndarray      # truncated sum is 0 but the next term is not
    params: QSpec

    HEADER = ("x", "q_value", "partial_q_quarter", "partial_q_half", "argmax_n")

    def rows(self) -> list[tuple]:
        xs = self.q.sites
        return [(int(x), float(v), float(a), float(b), int(k)) for x, v, a, b, k in
                zip(xs, self.q.values, self.partial_quarter, self.partial_half, self.argmax_n)]

    def l1(self) -> float:
        return self.q.l1()


def _ladder_index(n_max: int, frac: float) -> int:
    return max(1, int(round(n_max * frac))) - 1


def q_function(mu, params: QSpec, f: Signal, *, route: str = "auto",
               orbit_data: Orbit | None = None) -> QResult:
    """Q f = (sum_{n=1}^{n_max} n^alpha |T^n (I-T)^r f|^s)^{1/s} pointwise.

    Records the partial sums at n_max/4, n_max/2 (and 3n_max/4), the n
    carrying the largest term at each point, and as ``tail_diagnostic`` the
    largest share of the s-th power sum contributed by the last quarter.
    """
    O = orbit_data or orbit(mu, params.r, f, params.n_max, frac_K=params.frac_K, route=route)
    ns = O.ns.astype(float)[:, None]
    with np.errstate(over="ignore", invalid="ignore"):
        terms = ns ** params.alpha * np.abs(O.values) ** params.s
    _check_finite(terms, "square-function term")
    S = np.cumsum(terms, axis=0)
    nm = O.n_max
    inv = 1.0 / params.s
    q = S[-1] ** inv
    quarter = S[_ladder_index(nm, 0.25)] ** inv
    half = S[_ladder_index(nm, 0.5)] ** inv
    three = S[_ladder_index(nm, 0.75)] ** inv
    argmax_n = np.where(S[-1] > 0, np.argmax(terms, axis=0) + 1, 0)
    pos = S[-1] > 0
    tail = float(np.max((S[-1][pos] - S[_ladder_index(nm, 0.75)][pos]) / S[-1][pos])) \
        if pos.any() else 0.0
    flag = (S[-1] == 0) & (O.next_row != 0)
    return QResult(O.template.with_values(q), quarter, half, three, argmax_n, tail, flag, params)


# ---------------------------------------------------------------------------
# weighted maximal orbit


@dataclass(frozen=True)
class OrbitMax:
    values: Signal
    argmax_n: np.ndarray
    sup_trace: np.ndarray     # max over points of n^beta |T^n (I-T)^r f|, per n
    bounded_regime: bool      # beta < r


def max_weighted_orbit(mu, beta: float, r: float, f: Signal, n_max: int, *,
                       frac_K: int = 256, route: str = "auto") -> OrbitMax:
    """sup_{n <= n_max} n^beta |T^n (I-T)^r f| pointwise, with the maximizing n."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    O = orbit(mu, r, f, n_max, frac_K=frac_K, route=route)
    w = O.ns.astype(float)[:, None] ** beta * np.abs(O.values)
    _check_finite(w, "weighted orbit")
    vals = w.max(axis=0)
    arg = np.where(vals > 0, np.argmax(w, axis=0) + 1, 0)
    return OrbitMax(O.template.with_values(vals), arg, w.max(axis=1), beta < r)


# ---------------------------------------------------------------------------
# Abel summation domination


@dataclass(frozen=True)
class AbelReport:
    lhs_max: float
    rhs_at_worst: float
    ratio: float
    worst_x: int
    violations: tuple[int, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return not self.violations and math.isfinite(self.ratio)


def abel_domination_check(mu, beta: float, r: int, f: Signal, n_max: int, *,
                          route: str = "auto") -> AbelReport:
    """Pointwise max_n n^beta |T^n (I-T)^r f| against Q_{beta-1,1,r} f + Q_{beta,1,r+1} f.

    All sums run over 1 <= n <= n_max.  Points with a zero right-hand side
    and a positive left-hand side are returned as violations.
    """
    if int(r) != r or r < 1:
        raise ValueError("r must be a positive integer")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    r = int(r)
    O = orbit(mu, r, f, n_max, route=route)
    O1 = orbit(mu, r + 1, f, n_max, route=route)
    ns = O.ns.astype(float)[:, None]
    lhs = (ns ** beta * np.abs(O.values)).max(axis=0)
    rhs = (ns ** (beta - 1) * np.abs(O.values)).sum(axis=0) + \
        (ns ** beta * np.abs(O1.values)).sum(axis=0)
    _check_finite(np.vstack([lhs, rhs]), "Abel sums")
    tiny = 1e-300
    viol = tuple(int(x) for x in O.template.sites[(rhs <= tiny) & (lhs > tiny)])
    ok = rhs > tiny
    if not ok.any():
        return AbelReport(float(lhs.max(initial=0.0)), 0.0, 0.0 if not viol else math.inf,
                          int(O.template.start), viol)
    ratio = np.zeros_like(lhs)
    ratio[ok] = lhs[ok] / rhs[ok]
    i = int(np.argmax(ratio))
    return AbelReport(float(lhs.max()), float(rhs[i]),
                      math.inf if viol else float(ratio[i]),
                      int(O.template.sites[i]), viol)


def l1_from_kernels(mu, params: QSpec, f: Signal) -> float:
    """|Q f|_1 on Z_N with each T^n (I-T)^r realized as an explicit kernel measure."""
    if not f.is_cyclic:
        raise ValueError("needs a cyclic signal")
    acc = np.zeros(f.modulus)
    for n in range(1, params.n_max + 1):
        k = delta_kernel(mu, n, params.r, params.frac_K)
        acc += n ** params.alpha * np.abs(apply_measure(k, f).values) ** params.s
    return f.measure_weight * math.fsum(acc ** (1 / params.s))

