"""Fourier-side integrals A, B, C, D for kernel families and envelope estimates.

A family is a collection of symbols w_n^{1/s} K_n(t) where K_n is built
from mu_hat by products of powers:

    Q(alpha, s, r):      K_n = mu^n (1-mu)^r,                    w_n = n^alpha
    BlockDiff(beta, r):  K_k = n_k^beta (mu^{n_k} - mu^{n_{k+1}}) (1-mu)^r,  w_k = 1
    BlockMax(beta, r):   K_n = mu^n (1-mu)^r grouped in blocks I_k, w_k = n_k^beta

and the integrands are S_j(t) = sum w |K^{(j)}|^s (for blocks, the max over
n in I_k is taken before summing).  Q families are infinite and are cut at
n_max with a certified tail bound; block families are the finite sequences
they are given.

Integrals over (0, 1/2] use the midpoint rule on dyadic cells; the family
is symmetric in t so full-period integrals and sums over k != 0 are twice
the one-sided values.  Sums over k start at |k| = 2 because t = 1/|k| = 1
is the singular point t = 0 of the period.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaincc, gammaln

from .errors import NumericalError
from .spectral import HProfile, fourier_eval, h_profile
from .varosc import BlockSequence

_CHUNK = 1 << 20


# ---------------------------------------------------------------------------
# tail bounds


def geometric_tail_bound(e: float, x: np.ndarray, N: int) -> np.ndarray:
    """Upper bound for sum_{n > N} n^e x^n, 0 <= x < 1, by integral comparison."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    if np.any(x[pos] >= 1):
        raise NumericalError("tail bound needs |mu_hat| < 1")
    xp = x[pos]
    lam = -np.log(xp)
    if e >= 0:
        a, z, shift = e + 1, lam * (N + 1), -np.log(xp)
    elif e > -1:
        a, z, shift = e + 1, lam * N, 0.0
    else:
        out[pos] = float(N) ** e * xp ** N / lam
        return out
    out[pos] = np.exp(shift - a * np.log(lam) + _log_upper_gamma(a, z))
    return out


def _log_upper_gamma(a: float, z: np.ndarray) -> np.ndarray:
    """log Gamma(a, z), falling back to a closed-form upper bound where the
    regularized function underflows."""
    with np.errstate(divide="ignore"):
        v = gammaln(a) + np.log(gammaincc(a, z))
    bad = ~np.isfinite(v)
    if bad.any():
        zb = z[bad]
        # Gamma(a, z) <= z^(a-1) e^(-z) z / (z - a + 1) for a >= 1, z > a - 1
        corr = np.log(zb / (zb - a + 1)) if a >= 1 else 0.0
        v[bad] = (a - 1) * np.log(zb) - zb + corr
    return v


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class KernelFamily:
    kind: str                   # "Q", "BlockDiff" or "BlockMax"
    mu: object                  # finite measure or closed-form symbol
    r: float
    s: float
    alpha: float = 0.0          # Q weight exponent
    beta: float = 0.0           # block weight exponent
    blocks: BlockSequence | None = None

    def __post_init__(self):
        if self.kind not in ("Q", "BlockDiff", "BlockMax"):
            raise ValueError(f"unknown family kind {self.kind!r}")
        if not self.r > 0 or not self.s >= 1:
            raise ValueError("need r > 0 and s >= 1")
        if self.kind != "Q" and (self.blocks is None or len(self.blocks) < 2):
            raise ValueError("block families need at least two block indices")

    @property
    def label(self) -> str:
        if self.kind == "Q":
            return f"Q(alpha={self.alpha:g},s={self.s:g},r={self.r:g})"
        return f"{self.kind}(beta={self.beta:g},r={self.r:g},s={self.s:g})"

    # -- symbol pieces -------------------------------------------------------

    def _symbols(self, ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        return (fourier_eval(self.mu, ts, 0), fourier_eval(self.mu, ts, 1),
                fourier_eval(self.mu, ts, 2))

    def _diff_factor(self, m, m1, m2):
        r = self.r
        d = 1 - m
        with np.errstate(divide="ignore", invalid="ignore"):
            D = d ** r
            D1 = -r * d ** (r - 1) * m1
            D2 = r * (r - 1) * d ** (r - 2) * m1 ** 2 - r * d ** (r - 1) * m2
        zero = d == 0
        if zero.any():
            # where mu_hat == 1 with flat symbol (m1 = m2 = 0) every piece vanishes
            flat = zero & (m1 == 0) & (m2 == 0)
            D = np.where(zero, 0, D)
            D1 = np.where(flat, 0, D1)
            D2 = np.where(flat, 0, D2)
        return D, D1, D2

    @staticmethod
    def _powers(m, m1, m2, a, order):
        """Derivative of order `order` of m^a in t; a is a column of exponents."""
        a = np.asarray(a, dtype=float)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            G = m[None, :] ** a
            if order == 0:
                return G
            # a in {0, 1} zeroes a coefficient whose power may be 0^(-1)
            P1 = np.where(a == 0, 0, a * m[None, :] ** (a - 1))
            if order == 1:
                return P1 * m1[None, :]
            P2 = np.where((a == 0) | (a == 1), 0, a * (a - 1) * m[None, :] ** (a - 2))
            return P2 * (m1 ** 2)[None, :] + P1 * m2[None, :]

    def _kernel(self, exps, syms, order):
        m, m1, m2 = syms
        D = self._diff_factor(m, m1, m2)
        G = [self._powers(m, m1, m2, exps, j) for j in range(order + 1)]
        if order == 0:
            return G[0] * D[0]
        if order == 1:
            return G[1] * D[0] + G[0] * D[1]
        return G[2] * D[0] + 2 * G[1] * D[1] + G[0] * D[2]

    def member(self, index, ts, order: int = 0) -> np.ndarray:
        """The individual symbol Delta_hat_index^{(order)} at ts (rows by index)."""
        syms = self._symbols(ts)
        idx = np.atleast_1d(np.asarray(index))
        if self.kind == "Q":
            w = idx.astype(float)[:, None] ** (self.alpha / self.s)
            return w * self._kernel(idx, syms, order)
        if self.kind == "BlockMax":
            return self._kernel(idx, syms, order)
        nk = self.blocks.indices
        a, b = nk[idx], nk[idx + 1]
        w = a.astype(float)[:, None] ** self.beta
        return w * (self._kernel(a, syms, order) - self._kernel(b, syms, order))

    # -- power sums ----------------------------------------------------------

    def power_sum(self, ts, order: int, n_max: int, certify_tail: bool = True):
        """S_order(t) and the certified tail part included in it."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        step = max(1, _CHUNK // max(n_max, 1))
        out = np.empty(ts.size)
        tails = np.zeros(ts.size)
        for i in range(0, ts.size, step):
            sl = slice(i, i + step)
            out[sl], tails[sl] = self._power_sum_chunk(ts[sl], order, n_max, certify_tail)
        return out, tails

    def _power_sum_chunk(self, ts, order, n_max, certify_tail):
        syms = self._symbols(ts)
        s = self.s
        if self.kind == "Q":
            ns = np.arange(1, n_max + 1)
            terms = ns.astype(float)[:, None] ** self.alpha * np.abs(self._kernel(ns, syms, order)) ** s
            head = terms.sum(axis=0)
            tail = self._q_tail(ts, syms, order, n_max) if certify_tail else np.zeros(ts.size)
            total = head + tail
        elif self.kind == "BlockMax":
            nk = self.blocks.indices
            if nk[-1] > n_max + 1:
                raise ValueError("blocks extend beyond n_max")
            ns = np.arange(nk[0], nk[-1])
            vals = np.abs(self._kernel(ns, syms, order)) ** s
            total = np.zeros(ts.size)
            for lo, hi in zip(nk[:-1], nk[1:]):
                total += float(lo) ** self.beta * vals[lo - nk[0]:hi - nk[0]].max(axis=0)
            tail = np.zeros(ts.size)
        else:
            k = np.arange(len(self.blocks) - 1)
            total = (np.abs(self._blockdiff(k, syms, order)) ** s).sum(axis=0)
            tail = np.zeros(ts.size)
        if not np.all(np.isfinite(total)):
            bad = ts[~np.isfinite(total)][0]
            raise NumericalError(f"non-finite integrand at t={bad!r}")
        return total, tail

    def _blockdiff(self, k, syms, order):
        nk = self.blocks.indices
        a, b = nk[k], nk[k + 1]
        w = a.astype(float)[:, None] ** self.beta
        return w * (self._kernel(a, syms, order) - self._kernel(b, syms, order))

    def _q_tail(self, ts, syms, order, N):
        m, m1, m2 = syms
        D, D1, D2 = (np.abs(x) for x in self._diff_factor(m, m1, m2))
        am, a1, a2 = np.abs(m), np.abs(m1), np.abs(m2)
        s, al = self.s, self.alpha
        # |K^{(order)}_n| <= sum_i n^p_i |m|^(n - c_i) X_i
        if order == 0:
            groups = [(0, 0, D)]
        elif order == 1:
            groups = [(1, 1, a1 * D), (0, 0, D1)]
        else:
            groups = [(2, 2, a1 ** 2 * D), (1, 1, a2 * D + 2 * a1 * D1), (0, 0, D2)]
        tail = np.zeros(m.size)
        need = np.zeros(m.size, dtype=bool)
        for _, _, X in groups:
            need |= X > 0
        hit = need & (am >= 1)
        if hit.any():
            raise NumericalError(f"|mu_hat| = 1 at t={float(ts[np.argmax(hit)])!r}; "
                                 "the tail of the n-sum diverges")
        q = np.where(need, am ** s, 0.0)
        pref = len(groups) ** (s - 1)
        for p, c, X in groups:
            with np.errstate(divide="ignore", invalid="ignore"):
                g = geometric_tail_bound(al + p * s, q, N)
                term = np.where(X > 0, X ** s * am ** (-c * s) * g, 0.0)
            if N + 1 > c:
                # every tail term carries a positive power of |mu_hat|
                term = np.where(am == 0, 0.0, term)
            tail += term
        return pref * tail


def QFamily(mu, alpha: float, s: float, r: float) -> KernelFamily:
    if not alpha >= -1:
        raise ValueError("alpha must be >= -1")
    return KernelFamily("Q", mu, r, s, alpha=alpha)


def BlockDiff(mu, beta: float, r: float, blocks: BlockSequence, s: float) -> KernelFamily:
    return KernelFamily("BlockDiff", mu, r, s, beta=beta, blocks=blocks)


def BlockMax(mu, beta: float, r: float, blocks: BlockSequence, s: float) -> KernelFamily:
    return KernelFamily("BlockMax", mu, r, s, beta=beta, blocks=blocks)


# ---------------------------------------------------------------------------
# ladders and verdicts


WEIGHTS = {
    # (t-power for A, t-power for B, k-power for C, k-power for D)
    # strong: the boundedness integrals; weak: the weak (1,1) variant
    "strong": (-1.0, 1.0, 1.0, 2.0),
    "weak": (0.0, 2.0, 2.0, 3.0),
}


def ladder_verdict(increments: np.ndarray, *, grow: float = 1.02, settle: float = 0.99,
                   tol: float = 1e-2) -> str:
    """Classify a refinement ladder from its per-level increments.

    diverging:    the last two increment ratios are both >= ``grow``
    converged:    the last two ratios have geometric mean rho < ``settle`` and
                  the geometric extrapolation V + d rho/(1-rho) moved by less
                  than ``tol`` (relative) over the last level
    inconclusive: anything else
    """
    d = np.asarray(increments, dtype=float)
    V = np.cumsum(d)
    if d.size == 0 or V[-1] == 0:
        return "converged"
    if d.size < 4:
        return "inconclusive"
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = d[1:] / d[:-1]
    r1, r2 = ratios[-2], ratios[-1]
    if r1 >= grow and r2 >= grow:
        return "diverging"
    rho_now = math.sqrt(r1 * r2) if r1 > 0 and r2 > 0 else math.inf
    rho_prev = math.sqrt(ratios[-3] * r1) if ratios[-3] > 0 and r1 > 0 else math.inf
    if not (rho_now < settle and rho_prev < 1):
        return "inconclusive"
    E_now = V[-1] + d[-1] * rho_now / (1 - rho_now)
    E_prev = V[-2] + d[-2] * rho_prev / (1 - rho_prev)
    return "converged" if abs(E_now - E_prev) <= tol * abs(E_now) else "inconclusive"


def literal_verdict(increments: np.ndarray) -> str:
    """< 1% change at the last level: converged; >= 10x growth twice: diverging."""
    d = np.asarray(increments, dtype=float)
    V = np.cumsum(d)
    if d.size == 0 or V[-1] == 0:
        return "converged"
    if d.size >= 3 and d[-2] >= 10 * d[-3] > 0 and d[-1] >= 10 * d[-2]:
        return "diverging"
    if d[-1] / V[-1] < 1e-2:
        return "converged"
    return "inconclusive"


def extrapolate(increments: np.ndarray) -> float:
    """Geometric extrapolation of a ladder; inf when the ratios do not settle below 1."""
    d = np.asarray(increments, dtype=float)
    V = float(np.sum(d))
    if d.size < 3 or d[-1] == 0:
        return V
    r1, r2 = d[-2] / d[-3], d[-1] / d[-2]
    rho = math.sqrt(r1 * r2) if r1 > 0 and r2 > 0 else math.inf
    return V + d[-1] * rho / (1 - rho) if rho < 1 else math.inf


@dataclass(frozen=True)
class QuadResult:
    values: dict                # quantity -> final ladder value
    ladder: dict                # quantity -> cumulative value per level
    verdicts: dict              # quantity -> verdict (extrapolation rule)
    literal_verdicts: dict      # quantity -> verdict (fixed-threshold rule)
    diagnostics: dict = field(default_factory=dict)

    HEADER = ("quantity", "level", "value", "verdict")

    @property
    def A(self):
        return self.values["A"]

    @property
    def B(self):
        return self.values["B"]

    @property
    def C(self):
        return self.values["C"]

    @property
    def D(self):
        return self.values["D"]

    def rows(self) -> list[tuple]:
        out = []
        for q in ("A", "B", "C", "D"):
            for lvl, v in enumerate(self.ladder[q]):
                out.append((q, lvl, float(v), self.verdicts[q]))
        return out


def _cells(level: int, cells: int):
    lo = 2.0 ** -(level + 2)
    w = lo / cells
    return lo + w * (np.arange(cells) + 0.5), w


def _k_band(level: int):
    return np.arange(2 ** (level + 1), 2 ** (level + 2))


def _quad(fam: KernelFamily, n_max: int, grid_levels: int, weights: str, cells: int,
          certify_tail: bool) -> QuadResult:
    if weights not in WEIGHTS:
        raise ValueError(f"weights must be one of {sorted(WEIGHTS)}")
    pa, pb, pc, pd = WEIGHTS[weights]
    s = fam.s
    inc = {q: np.zeros(grid_levels) for q in "ABCD"}
    tail_share = 0.0
    E_acc = None
    for j in range(grid_levels):
        t, w = _cells(j, cells)
        S0, T0 = fam.power_sum(t, 0, n_max, certify_tail)
        S2, T2 = fam.power_sum(t, 2, n_max, certify_tail)
        inc["A"][j] = 2 * w * math.fsum(t ** pa * S0 ** (1 / s))
        inc["B"][j] = 2 * w * math.fsum(t ** pb * S2 ** (1 / s))
        k = _k_band(j).astype(float)
        S0k, T0k = fam.power_sum(1 / k, 0, n_max, certify_tail)
        S1k, T1k = fam.power_sum(1 / k, 1, n_max, certify_tail)
        inc["C"][j] = 2 * math.fsum(k ** -pc * S0k ** (1 / s))
        inc["D"][j] = 2 * math.fsum(k ** -pd * S1k ** (1 / s))
        for S, T in ((S0, T0), (S2, T2), (S0k, T0k), (S1k, T1k)):
            pos = S > 0
            if pos.any():
                tail_share = max(tail_share, float(np.max(T[pos] / S[pos])))
        if fam.kind == "Q":
            ns = np.arange(1, n_max + 1)
            part = 2 * w * fam.member(ns, t, 0).real.sum(axis=1)
            E_acc = part if E_acc is None else E_acc + part
    ladder = {q: np.cumsum(inc[q]) for q in "ABCD"}
    values = {q: float(ladder[q][-1]) for q in "ABCD"}
    verdicts = {q: ladder_verdict(inc[q]) for q in "ABCD"}
    literal = {q: literal_verdict(inc[q]) for q in "ABCD"}
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = {q: (inc[q][1:] / inc[q][:-1]).tolist() for q in "ABCD"}
    diag = {
        "increment_ratios": ratios,
        "extrapolated": {q: extrapolate(inc[q]) for q in "ABCD"},
        "max_tail_share": tail_share,
        "weights": weights,
        "family": fam.label,
    }
    if E_acc is not None:
        diag["E_site0"] = float(np.sum(np.abs(E_acc) ** s) ** (1 / s))
    return QuadResult(values, ladder, verdicts, literal, diag)


def quad_abcd(fam: KernelFamily, s: float | None = None, n_max: int = 512,
              grid_levels: int = 12, weights: str = "strong", *, cells: int = 64,
              certify_tail: bool = True) -> QuadResult:
    """The four quantities with per-level ladders and verdicts.

    Q families include a certified bound for the n > n_max tail unless
    ``certify_tail`` is off.  Level j covers t in (2^-(j+2), 2^-(j+1)] for
    the integrals and k in [2^(j+1), 2^(j+2)) for the sums.
    """
    if s is not None and s != fam.s:
        raise ValueError("s differs from the family's exponent")
    return _quad(fam, n_max, grid_levels, weights, cells, certify_tail)


def quad_blocks(fam: KernelFamily, s: float | None = None, beta: float | None = None,
                blocks: BlockSequence | None = None, n_max: int = 256,
                grid_levels: int = 12, weights: str = "strong", *,
                cells: int = 64) -> QuadResult:
    """quad_abcd for a BlockMax family: block weight n_k^beta, max over n in I_k."""
    if fam.kind != "BlockMax":
        raise ValueError("quad_blocks needs a BlockMax family")
    if s is not None and s != fam.s:
        raise ValueError("s differs from the family's exponent")
    if beta is not None and beta != fam.beta:
        raise ValueError("beta differs from the family's exponent")
    if blocks is not None and not np.array_equal(blocks.indices, fam.blocks.indices):
        raise ValueError("blocks differ from the family's blocks")
    if fam.blocks.indices[-1] > n_max + 1:
        raise ValueError("blocks extend beyond n_max")
    return _quad(fam, n_max, grid_levels, weights, cells, False)


# ---------------------------------------------------------------------------
# envelope estimates


ESTIMATES = ("eqA", "eqB", "eqII2", "seqest", "eqnk", "eqnkprime", "eqnk2prime")


@dataclass(frozen=True)
class EnvelopeResult:
    estimate_id: str
    empirical_C: float
    worst_t: float
    holds: bool
    refined_C: float
    witness_t: float | None = None


def _h_maker(h) -> Callable[[np.ndarray], HProfile]:
    if callable(h):
        return h
    name, a = h
    return lambda ts: h_profile(name, ts, a)


def _envelope_sides(fam: KernelFamily, hp: HProfile, eid: str, n_max: int,
                    gamma: float | None):
    t = hp.ts
    h, h1 = hp.h, hp.hprime
    m = fourier_eval(fam.mu, t, 0)
    m1 = fourier_eval(fam.mu, t, 1)
    s, r = fam.s, fam.r
    if eid in ("eqA", "eqB", "eqII2"):
        if fam.kind != "Q":
            raise ValueError(f"{eid} is stated for Q families")
        al = fam.alpha
        if eid == "eqA":
            S0, _ = fam.power_sum(t, 0, n_max)
            lhs = S0 ** (1 / s) / t
            if al > -1:
                rhs = h ** (r - (al + 1) / s - 1) * h1
            else:
                g = s * r / 2 if gamma is None else gamma
                rhs = h ** (r - g / s - 1) * h1
        elif eid == "eqB":
            S2, _ = fam.power_sum(t, 2, n_max)
            lhs = S2 ** (1 / s)
            rhs = h ** ((r - 1) - (al + 1) / s) * np.abs(m1) / t
        else:
            S0, _ = fam.power_sum(t, 0, n_max)
            lhs = S0 ** (1 / s)
            rhs = h ** (r - (al + 1) / s)
        return lhs, rhs
    if fam.kind == "Q" or fam.blocks is None:
        raise ValueError(f"{eid} is stated for block families")
    nk = fam.blocks.indices
    if eid == "seqest":
        g = 0.0 if gamma is None else gamma
        a, b = nk[:-1].astype(float), nk[1:].astype(float)
        lhs = ((a ** (s * g) * (b - a))[:, None] *
               np.abs(m)[None, :] ** (a[:, None] * s)).sum(axis=0)
        rhs = h ** -(s * g + 1)
        return lhs, rhs
    a_gap = fam.blocks.growth_a
    if a_gap is None:
        raise ValueError(f"{eid} needs blocks with a growth exponent")
    expo = fam.beta + a_gap + (1 - a_gap) / s
    order = {"eqnk": 0, "eqnkprime": 1, "eqnk2prime": 2}[eid]
    if fam.kind != "BlockDiff":
        raise ValueError(f"{eid} is stated for BlockDiff families")
    S, _ = fam.power_sum(t, order, n_max)
    lhs = S ** (1 / s)
    if eid == "eqnk":
        rhs = h ** (1 + r) / h ** expo
    elif eid == "eqnkprime":
        rhs = h ** r * np.abs(m1) / h ** expo
    else:
        rhs = h ** r / h ** expo * np.abs(m1) / t
    return lhs, rhs


def envelope_check(fam: KernelFamily, h, estimate_id: str, levels: int = 12, *,
                   cells: int = 64, n_max: int = 256, gamma: float | None = None,
                   growth_tol: float = 0.10) -> EnvelopeResult:
    """sup over the dyadic grid of LHS/RHS for the named estimate.

    ``h`` is an HProfile factory (ts -> HProfile) or a (name, exponent)
    pair from the shipped library.  The estimate holds when the constant is
    finite and grows by less than ``growth_tol`` under one more level.
    """
    from .spectral import dyadic_points
    if estimate_id not in ESTIMATES:
        raise ValueError(f"unknown estimate {estimate_id!r}; expected one of {ESTIMATES}")
    make = _h_maker(h)
    consts = []
    for L in (levels, levels + 1):
        ts = dyadic_points(L, cells)
        lhs, rhs = _envelope_sides(fam, make(ts), estimate_id, n_max, gamma)
        bad = (rhs <= 0) & (lhs > 0)
        if bad.any():
            w = float(ts[np.argmax(bad)])
            return EnvelopeResult(estimate_id, math.inf, w, False, math.inf, w)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(lhs > 0, lhs / rhs, 0.0)
        i = int(np.argmax(ratio))
        consts.append((float(ratio[i]), float(ts[i])))
    (c0, t0), (c1, _) = consts
    stable = c1 <= c0 * (1 + growth_tol) if c0 > 0 else c1 == 0
    return EnvelopeResult(estimate_id, c0, t0, bool(math.isfinite(c0) and stable), c1)
