"""Ergodic maximal function and Calderon-Zygmund decomposition on Z_N.

The dynamical system is the rotation x -> x+1 on Z_N with uniform
probability measure.  Window sums are correctly rounded in both maximal
function implementations, so the two agree bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.ndimage import maximum_filter1d

from .errors import DegenerateInputError
from .sqfun import Signal


@dataclass(frozen=True)
class CyclicSystem:
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")

    def tau(self, x, k: int = 1):
        return (np.asarray(x) + k) % self.N

    def measure(self, points) -> float:
        return len(points) / self.N


def _require_cyclic(f: Signal):
    if not f.is_cyclic:
        raise ValueError("needs a signal on Z_N")
    if np.iscomplexobj(f.values):
        raise ValueError("needs a real signal")


def ergodic_maximal_reference(f: Signal) -> Signal:
    """sup over cyclic windows of length <= N containing x of |window average|.

    Direct evaluation: every window sum via math.fsum, every cover explicit.
    """
    _require_cyclic(f)
    N = f.modulus
    v = f.values.tolist()
    ext = v + v
    best = np.zeros(N)
    for L in range(1, N + 1):
        b = np.array([abs(math.fsum(ext[a:a + L])) / L for a in range(N)])
        # x is covered by windows starting at x-L+1 .. x
        idx = (np.arange(N)[:, None] - np.arange(L)[None, :]) % N
        best = np.maximum(best, b[idx].max(axis=1))
    return f.with_values(best)


def _exact_prefix(values: np.ndarray):
    """Prefix sums of the doubled sequence as exact scaled integers.

    Returns (prefix, E) with values = ints * 2**-E.  Uses int64 when the
    sums fit and rescaling cannot land in the subnormal range, Python
    integers otherwise.
    """
    fin = values[values != 0]
    if fin.size == 0:
        return np.zeros(2 * values.size + 1, dtype=np.int64), 0
    frac, exps = np.frexp(fin)
    # each value is m * 2^(e-53) with |m| < 2^53; trailing zero bits of m
    # lower the scale E needed to make every value integral
    mant = np.abs(np.ldexp(frac, 53).astype(np.int64))
    tz = np.log2((mant & -mant).astype(float)).astype(np.int64)
    E = max(int((53 - exps - tz).max()), 0)
    top = int(exps.max()) + E
    N = values.size
    if top + (2 * N).bit_length() < 62 and E < 960:
        ints = np.ldexp(values, E).astype(np.int64)
        ext = np.concatenate([ints, ints])
        return np.concatenate([[0], np.cumsum(ext)]), E
    ints = []
    for x in values.tolist():
        num, den = x.as_integer_ratio()
        ints.append(num * (1 << E) // den)
    ext = ints + ints
    pre = [0]
    for x in ext:
        pre.append(pre[-1] + x)
    return np.array(pre, dtype=object), E


def ergodic_maximal(f: Signal) -> Signal:
    """Same quantity as the reference, computed from exact prefix sums."""
    _require_cyclic(f)
    N = f.modulus
    P, E = _exact_prefix(np.asarray(f.values, dtype=float))
    if P.dtype != object:
        return f.with_values(_maximal_int(P, E, N))
    scale = 1 << E
    best = np.zeros(N)
    for L in range(1, N + 1):
        S = P[L:L + N] - P[0:N]
        if S.dtype == object:
            # int / int is correctly rounded, like fsum of the window
            b = np.array([abs(x / scale) for x in S]) / L
        else:
            b = np.abs(np.ldexp(S.astype(float), -E)) / L
        # trailing window: max of b over starts a in [x-L+1, x]
        m = maximum_filter1d(b, size=L, origin=(L - 1) // 2, mode="wrap")
        np.maximum(best, m, out=best)
    return f.with_values(best)


def _maximal_int(P: np.ndarray, E: int, N: int, rows: int = 1 << 22) -> np.ndarray:
    """Block-vectorized form of the window loop for int64 prefix sums.

    For a start a, the best average over windows [a, a+L) with L >= d is a
    reverse running max over L; x sees d = (x - a) mod N + 1.
    """
    Ls = np.arange(1, N + 1)
    xs = np.arange(N)
    best = np.zeros(N)
    step = max(1, rows // N)
    for a0 in range(0, N, step):
        a = np.arange(a0, min(N, a0 + step))
        S = P[a[:, None] + Ls[None, :]] - P[a][:, None]
        avg = np.abs(np.ldexp(S.astype(float), -E)) / Ls
        R = np.maximum.accumulate(avg[:, ::-1], axis=1)[:, ::-1]
        d = (xs[None, :] - a[:, None]) % N
        np.maximum(best, np.take_along_axis(R, d, axis=1).max(axis=0), out=best)
    return best


# ---------------------------------------------------------------------------
# decomposition


@dataclass(frozen=True)
class CZPart:
    base: tuple[int, ...]        # B_i
    support: tuple[int, ...]     # E_i = tau^1 B_i, ..., tau^{l_i} B_i
    b: Signal                    # vanishes off E_i
    length: int                  # l_i


@dataclass(frozen=True)
class CZDecomposition:
    g: Signal
    parts: tuple[CZPart, ...]
    lam: float
    maximal: Signal
    base_rest: tuple[int, ...]   # points of {f* <= lambda} that are no pre-arc base
    stopping: str

    def bad(self) -> Signal:
        out = np.zeros(self.g.size)
        for p in self.parts:
            out += p.b.values
        return self.g.with_values(out)


def _arcs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal cyclic runs of True as (start, length); needs at least one False."""
    N = mask.size
    first_free = int(np.argmin(mask))
    runs = []
    i = 0
    while i < N:
        x = (first_free + i) % N
        if mask[x]:
            j = i
            while j < N and mask[(first_free + j) % N]:
                j += 1
            runs.append((x, j - i))
            i = j
        else:
            i += 1
    return runs


def cz_decompose(f: Signal, lam: float, stopping: str = "abs") -> CZDecomposition:
    """f = g + sum_i b_i along the arcs of U = {M > lambda}.

    M is the ergodic maximal function of |f| (``stopping="abs"``) or of f
    (``"signed"``).  Each arc I_i gets b_i = (f - avg_I f) 1_I, the base
    B_i is the point just before the arc, and g = f off U, avg_I f on I_i.
    """
    _require_cyclic(f)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    N = f.modulus
    v = np.asarray(f.values, dtype=float)
    mean = abs(math.fsum(v)) / N
    if lam <= mean:
        raise DegenerateInputError(
            f"lambda={lam!r} must exceed the global average {mean!r}")
    if stopping == "abs":
        M = ergodic_maximal(f.with_values(np.abs(v)))
    elif stopping == "signed":
        M = ergodic_maximal(f)
    else:
        raise ValueError(f"unknown stopping rule {stopping!r}")
    U = M.values > lam
    if U.all():
        raise DegenerateInputError(
            f"every point has maximal average above lambda={lam!r}; no base point exists")
    g = v.copy()
    parts = []
    bases = set()
    for start, L in _arcs(U):
        pts = (start + np.arange(L)) % N
        avg = math.fsum(v[pts]) / L
        b = np.zeros(N)
        b[pts] = v[pts] - avg
        g[pts] = avg
        base = (start - 1) % N
        bases.add(base)
        parts.append(CZPart((int(base),), tuple(int(x) for x in pts), f.with_values(b), L))
    rest = tuple(int(x) for x in np.flatnonzero(~U) if int(x) not in bases)
    return CZDecomposition(f.with_values(g), tuple(parts), float(lam), M, rest, stopping)


@dataclass(frozen=True)
class PropertyRow:
    name: str
    holds: bool
    value: float
    bound: float
    note: str = ""


@dataclass(frozen=True)
class CZReport:
    rows: tuple[PropertyRow, ...]

    @property
    def passed(self) -> bool:
        # the literal block bound is informational; everything else must hold
        return all(r.holds for r in self.rows if r.name != "d_literal")

    def __getitem__(self, name: str) -> PropertyRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    HEADER = ("property", "holds", "value", "bound")


def verify_cz(d: CZDecomposition, f: Signal) -> CZReport:
    """Check the decomposition's properties; failures are rows, not exceptions."""
    N = f.modulus
    v = np.asarray(f.values, dtype=float)
    lam = d.lam
    fmax = max(1.0, float(np.abs(v).max(initial=0.0)))
    l1f = math.fsum(np.abs(v)) / N
    rows = []

    recon = d.g.values + d.bad().values
    err = float(np.abs(recon - v).max(initial=0.0))
    rows.append(PropertyRow("reconstruction", err <= 1e-12 * fmax, err, 1e-12 * fmax))

    good = ~(d.maximal.values > lam)
    bases = [p.base[0] for p in d.parts]
    disjoint = len(set(bases)) == len(bases) and not (set(bases) & set(d.base_rest))
    inside = all(good[x] for x in bases) and all(good[x] for x in d.base_rest)
    cover = len(bases) + len(d.base_rest) == int(good.sum())
    rows.append(PropertyRow("a", disjoint and inside and cover, float(len(bases)),
                            float(good.sum()), "bases plus remainder partition {M <= lambda}"))

    seen = np.zeros(N, dtype=bool)
    ok_b = True
    for p in d.parts:
        supp = np.zeros(N, dtype=bool)
        supp[list(p.support)] = True
        tower = [(p.base[0] + j) % N for j in range(1, p.length + 1)]
        ok_b &= sorted(tower) == sorted(p.support) and len(p.support) == p.length
        ok_b &= not (seen & supp).any()
        ok_b &= not np.any(p.b.values[~supp] != 0)
        seen |= supp
    rows.append(PropertyRow("b", bool(ok_b), float(len(d.parts)), math.nan,
                            "E_i disjoint towers over B_i, b_i supported on E_i"))

    tol_c = 1e-10 * fmax
    canc = max((abs(math.fsum(p.b.values[list(p.support)])) for p in d.parts), default=0.0)
    rows.append(PropertyRow("c", canc <= tol_c, canc, tol_c))

    avg_blk = max((math.fsum(np.abs(p.b.values)) / p.length for p in d.parts), default=0.0)
    lit_blk = max((math.fsum(np.abs(p.b.values)) for p in d.parts), default=0.0)
    rows.append(PropertyRow("d_average", avg_blk <= 2 * lam, avg_blk, 2 * lam))
    rows.append(PropertyRow("d_literal", lit_blk <= 2 * lam, lit_blk, 2 * lam,
                            "unnormalized block sum; reported only"))

    mE = sum(p.length for p in d.parts) / N
    bound_e = 2 * l1f / lam
    rows.append(PropertyRow("e", mE <= bound_e, mE, bound_e))

    ginf = float(np.abs(d.g.values).max(initial=0.0))
    rows.append(PropertyRow("f_inf", ginf <= 2 * lam, ginf, 2 * lam))
    l1g = math.fsum(np.abs(d.g.values)) / N
    rows.append(PropertyRow("f_l1", l1g <= l1f * (1 + 1e-12), l1g, l1f))
    return CZReport(tuple(rows))


# ---------------------------------------------------------------------------
# weak (1,1) profiles


@dataclass(frozen=True)
class WeakProfile:
    lambdas: np.ndarray
    level_measure: np.ndarray
    weak_constant: np.ndarray     # lambda * level / |f|_1

    HEADER = ("lambda", "level_measure", "weak_constant")

    def rows(self) -> list[tuple]:
        return [(float(a), float(b), float(c)) for a, b, c in
                zip(self.lambdas, self.level_measure, self.weak_constant)]

    @property
    def sup(self) -> float:
        return float(self.weak_constant.max(initial=0.0))


def weak11_profile(op: Callable[[Signal], Signal], f: Signal, lambdas) -> WeakProfile:
    """lambda * m{|op f| > lambda} / |f|_1 on the given lambda grid."""
    lambdas = np.asarray(lambdas, dtype=float)
    q = np.abs(op(f).values)
    w = f.measure_weight
    level = np.array([w * np.count_nonzero(q > lam) for lam in lambdas])
    l1 = f.l1()
    const = np.zeros_like(level) if l1 == 0 else lambdas * level / l1
    return WeakProfile(lambdas, level, const)


def weak_constant(q: Signal, f_l1: float) -> float:
    """sup over all lambda > 0 of lambda * m{|q| > lambda} / |f|_1.

    With values sorted decreasingly, the sup is max_j q_(j) * j * weight,
    approached as lambda rises to q_(j).
    """
    if f_l1 == 0:
        return 0.0
    qs = np.sort(np.abs(q.values))[::-1]
    j = np.arange(1, qs.size + 1)
    return float((qs * j * q.measure_weight).max(initial=0.0) / f_l1)


def level_grid(q: Signal, count: int = 64) -> np.ndarray:
    """Log-spaced lambdas spanning the positive values of |q|."""
    a = np.abs(q.values)
    a = a[a > 0]
    if a.size == 0:
        return np.array([1.0])
    return np.geomspace(a.min() / 2, a.max(), count)
