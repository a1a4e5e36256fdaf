"""s-variation and s-oscillation of finite sequences, block sequences, and orbit statistics."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError
from .sqfun import Signal, orbit


@dataclass(frozen=True)
class VariationReport:
    value: float
    partition: tuple[int, ...]
    method: str

    HEADER = ("value", "method", "partition")

    def row(self) -> tuple:
        return (self.value, self.method, ";".join(str(i) for i in self.partition))


def _check_s(s: float):
    if not s >= 1:
        raise ValueError("s must be >= 1")


def _pair_powers(x: np.ndarray, s: float) -> np.ndarray:
    # D[i, j] = |x_j - x_i|^s
    return np.abs(x[None, :] - x[:, None]) ** s


def partition_sum(x, partition, s: float) -> float:
    """sum over consecutive kept indices of |x_j - x_i|^s, accumulated left to right."""
    x = np.asarray(x, dtype=float)
    tot = 0.0
    for i, j in zip(partition, partition[1:]):
        tot += abs(x[j] - x[i]) ** s
    return tot


def svariation_dp(x, s: float) -> VariationReport:
    """Exact sup over increasing index sequences of (sum |x_{n_k} - x_{n_{k+1}}|^s)^{1/s}.

    V(j) = max(0, max_{i<j} V(i) + |x_j - x_i|^s) is the best s-th power sum
    of a chain ending at j; the optimal chain is recovered by backpointers.
    """
    _check_s(s)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("x must be a nonempty 1-d array")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    n = x.size
    V = np.zeros(n)
    back = np.full(n, -1)
    for j in range(1, n):
        cand = V[:j] + np.abs(x[j] - x[:j]) ** s
        i = int(np.argmax(cand))
        if cand[i] > 0:
            V[j] = cand[i]
            back[j] = i
    j = int(np.argmax(V))
    if V[j] == 0:
        return VariationReport(0.0, (), "exact-DP")
    part = [j]
    while back[part[-1]] >= 0:
        part.append(int(back[part[-1]]))
    return VariationReport(float(V[j] ** (1 / s)), tuple(reversed(part)), "exact-DP")


def svariation_batch(X: np.ndarray, s: float) -> np.ndarray:
    """svariation_dp values for every row of X (no partitions)."""
    _check_s(s)
    X = np.asarray(X, dtype=float)
    P, n = X.shape
    V = np.zeros((P, n))
    for j in range(1, n):
        cand = V[:, :j] + np.abs(X[:, j:j + 1] - X[:, :j]) ** s
        V[:, j] = np.maximum(cand.max(axis=1), 0.0)
    return V.max(axis=1) ** (1 / s)


def svariation_brute(x, s: float) -> VariationReport:
    """Maximum over every index subset of size >= 2 (length <= 16)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n > 16:
        raise ValueError("brute force limited to length <= 16")
    if n == 0:
        raise ValueError("x must be nonempty")
    D = _pair_powers(x, s)
    best, arg = 0.0, ()
    for size in range(2, n + 1):
        for sub in itertools.combinations(range(n), size):
            tot = 0.0
            for i, j in zip(sub, sub[1:]):
                tot += float(D[i, j])
            if tot > best:
                best, arg = tot, sub
    return VariationReport(float(best ** (1 / s)) if best > 0 else 0.0, arg, "brute-force")


# ---------------------------------------------------------------------------
# block sequences


@dataclass(frozen=True, eq=False)
class BlockSequence:
    """Strictly increasing positive integers n_k with an optional gap certificate.

    With ``growth_a`` set, c1 <= (n_{k+1} - n_k) / n_k^a <= c2 over all
    consecutive pairs.
    """

    indices: np.ndarray
    growth_a: float | None = None
    c1: float | None = None
    c2: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("block sequence needs at least one index")
        if idx[0] < 1 or np.any(np.diff(idx) <= 0):
            raise ValueError("indices must be strictly increasing positive integers")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        if self.growth_a is not None and idx.size > 1:
            ratios = np.diff(idx) / idx[:-1].astype(float) ** self.growth_a
            c1, c2 = float(ratios.min()), float(ratios.max())
            if self.c1 is not None and (self.c1 > c1 or self.c2 < c2):
                raise ValueError("gap certificate violated")
            object.__setattr__(self, "c1", c1)
            object.__setattr__(self, "c2", c2)

    def __len__(self):
        return int(self.indices.size)

    def truncate(self, n_max: int) -> "BlockSequence":
        keep = self.indices[self.indices <= n_max]
        return BlockSequence(keep, self.growth_a, meta=dict(self.meta))


def gap_sequence(a: float, n_start: int, n_stop: int) -> BlockSequence:
    """n_{k+1} = n_k + max(1, ceil(n_k^a)), from n_start while <= n_stop."""
    if not 0 < a <= 1:
        raise ValueError("a must lie in (0, 1]")
    if n_start < 1:
        raise ValueError("n_start must be >= 1")
    out = [int(n_start)]
    while True:
        n = out[-1]
        # guard ceil against n^a landing a hair above an integer
        g = max(1, math.ceil(n ** a - 1e-12))
        if n + g > n_stop:
            break
        out.append(n + g)
    return BlockSequence(np.array(out), growth_a=a)


def interpolated_dyadic(a: float, k_max: int = 12, s: float | None = None) -> BlockSequence:
    """Powers of two with N_k = round(2^{k(1-a)}) equally spaced points inserted per level.

    Level k contributes 2^k + j * 2^k / N_k for j = 0..N_k-1 (spacing
    rounded to an integer); the result runs up to 2^{k_max}.
    """
    if not 0 < a < 1:
        raise ValueError("a must lie in (0, 1)")
    pts = set()
    levels = []
    for k in range(k_max):
        Nk = max(1, round(2.0 ** (k * (1 - a))))
        Nk = min(Nk, 2 ** k)
        step = 2 ** k / Nk
        level = sorted({2 ** k + int(round(j * step)) for j in range(Nk)})
        pts.update(level)
        gaps = np.diff(level + [2 ** (k + 1)])
        levels.append({"k": k, "N_k": Nk, "gap_min": int(gaps.min()),
                       "gap_max": int(gaps.max())})
    pts.add(2 ** k_max)
    meta = {"levels": levels, "side_condition": "a < (s-1)/(s+1)"}
    if s is not None:
        meta["s"] = s
        meta["side_condition_holds"] = bool(a < (s - 1) / (s + 1))
    return BlockSequence(np.array(sorted(pts)), growth_a=a, meta=meta)


def oscillation_norm(x, s: float, blocks: BlockSequence) -> float:
    """(sum_k (max - min of x over [n_k, n_{k+1}])^s)^{1/s}, 0-based inclusive indices."""
    _check_s(s)
    x = np.asarray(x, dtype=float)
    idx = blocks.indices
    if idx[-1] >= x.size:
        raise ValueError(f"block index {idx[-1]} outside array of length {x.size}")
    tot = 0.0
    for lo, hi in zip(idx[:-1], idx[1:]):
        seg = x[lo:hi + 1]
        tot += (seg.max() - seg.min()) ** s
    return tot ** (1 / s)


def _block_oscillation_rows(X: np.ndarray, s: float, idx: np.ndarray) -> np.ndarray:
    tot = np.zeros(X.shape[1])
    for lo, hi in zip(idx[:-1], idx[1:]):
        seg = X[lo:hi + 1]
        tot += (seg.max(axis=0) - seg.min(axis=0)) ** s
    return tot ** (1 / s)


# ---------------------------------------------------------------------------
# orbit statistics


@dataclass(frozen=True)
class VariationResult:
    values: Signal
    l1: float
    mode: str
    meta: dict = field(default_factory=dict)


def orbit_variation(mu, beta: float, r: float, s: float, f: Signal, n_max: int,
                    blocks: BlockSequence | None = None, *, frac_K: int = 256,
                    budget: int = 1 << 27, route: str = "auto") -> VariationResult:
    """Pointwise v(s) (or block o(s)) of the weighted orbit n^beta T^n (I-T)^r f.

    Without blocks the exact DP costs O(n_max^2) per point; above ``budget``
    a CapacityError advises the blocks mode.  Block indices are values of n.
    """
    _check_s(s)
    O = orbit(mu, r, f, n_max, frac_K=frac_K, route=route)
    ns = O.ns.astype(float)[:, None]
    X = ns ** beta * O.values
    if np.iscomplexobj(X):
        raise ValueError("variation of complex orbits is not supported")
    P = X.shape[1]
    meta = {"beta_lt_r": bool(beta < r)}
    if blocks is None:
        if n_max * n_max * P > budget:
            raise CapacityError(f"DP needs ~{n_max * n_max * P:.3g} operations "
                                f"(budget {budget}); pass blocks for the oscillation mode")
        vals = np.zeros(P)
        active = np.flatnonzero(np.any(X != 0, axis=0))
        chunk = max(1, (1 << 24) // max(n_max * n_max, 1))
        for c in range(0, active.size, chunk):
            cols = active[c:c + chunk]
            vals[cols] = svariation_batch(X[:, cols].T, s)
        mode = "variation"
    else:
        idx = blocks.indices
        if idx[0] < 1 or idx[-1] > n_max:
            raise ValueError("block indices must lie in [1, n_max]")
        vals = _block_oscillation_rows(X, s, idx - 1)
        mode = "oscillation"
        if blocks.growth_a is not None:
            a = blocks.growth_a
            meta["beta_lt_r_minus_gap_term"] = bool(beta < r - (1 - a) / s)
    out = O.template.with_values(vals)
    return VariationResult(out, out.l1(), mode, meta)


def block_differences(mu, beta: float, r: float, s: float, f: Signal,
                      blocks: BlockSequence, *, frac_K: int = 256,
                      route: str = "auto") -> VariationResult:
    """(sum_k n_k^{beta s} |(T^{n_k} - T^{n_{k+1}})(I-T)^r f|^s)^{1/s} pointwise."""
    _check_s(s)
    idx = blocks.indices
    O = orbit(mu, r, f, int(idx[-1]), frac_K=frac_K, route=route)
    rows = O.values[idx - 1]
    d = np.abs(rows[:-1] - rows[1:]) ** s * idx[:-1, None].astype(float) ** (beta * s)
    vals = d.sum(axis=0) ** (1 / s)
    out = O.template.with_values(vals)
    meta = {"beta_lt_r": bool(beta < r)}
    if blocks.growth_a is not None:
        meta["beta_lt_r_minus_gap_term"] = bool(beta < r - (1 - blocks.growth_a) / s)
    return VariationResult(out, out.l1(), "block-difference", meta)
