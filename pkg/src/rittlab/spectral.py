"""Fourier symbols and symbol-regularity checks.

Convention: mu_hat(t) = sum_k mu(k) exp(-2 pi i k t).  Derivatives are taken
in t.  A "symbol" is anything with an ``evaluate(ts, order)`` method; finite
measures are evaluated by direct summation and the full fractional measure
has a closed form (``NuAlphaSymbol``).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .zmeasure import SignedMeasure, tv_norm

_CHUNK = 1 << 22


def fourier_eval(mu, ts, order: int = 0) -> np.ndarray:
    """sum_k mu(k) (-2 pi i k)^order exp(-2 pi i k t) at each t."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    if hasattr(mu, "evaluate"):
        return mu.evaluate(ts, order)
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    out = np.zeros(ts.shape, dtype=complex)
    if mu.is_zero:
        return out
    k = mu.sites.astype(float)
    coef = mu.weights * (-2j * np.pi * k) ** order if order else mu.weights.astype(complex)
    step = max(1, _CHUNK // max(ts.size, 1))
    for i in range(0, k.size, step):
        kk = k[i:i + step]
        # reduce k*t mod 1 before exponentiating to keep the phase accurate
        ph = np.outer(ts, kk)
        ph -= np.round(ph)
        out += np.exp(-2j * np.pi * ph) @ coef[i:i + step]
    return out


@dataclass(frozen=True)
class NuAlphaSymbol:
    """Closed form of the full (untruncated) fractional measure's symbol.

    hat(t) = 1 - (1 - z)^alpha with z = exp(-2 pi i t); the power uses the
    principal branch and 1 - z = 2 sin(pi t) i exp(-i pi t) is formed in
    polar coordinates so there is no cancellation near t = 0.
    """

    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0,1)")

    @property
    def min_site(self) -> int:
        return 1

    def _one_minus_z_pow(self, t: np.ndarray, p: float) -> np.ndarray:
        tr = t - np.round(t)
        mod = 2 * np.abs(np.sin(np.pi * tr))
        arg = 0.5 * np.pi * np.sign(tr) - np.pi * tr
        with np.errstate(divide="ignore", invalid="ignore"):
            out = mod ** p * np.exp(1j * p * arg)
        if p > 0:
            out = np.where(mod == 0, 0.0, out)
        return out

    def evaluate(self, ts, order: int = 0) -> np.ndarray:
        t = np.atleast_1d(np.asarray(ts, dtype=float))
        a = self.alpha
        if order == 0:
            return 1 - self._one_minus_z_pow(t, a)
        z = np.exp(-2j * np.pi * (t - np.round(t)))
        if order == 1:
            return -2j * np.pi * a * z * self._one_minus_z_pow(t, a - 1)
        if order == 2:
            return -4 * np.pi ** 2 * a * z * self._one_minus_z_pow(t, a - 2) * (1 - a * z)
        raise ValueError("order must be 0, 1 or 2")


def nu_alpha_exact(alpha: float) -> NuAlphaSymbol:
    return NuAlphaSymbol(float(alpha))


# ---------------------------------------------------------------------------
# grids


def dyadic_points(levels: int = 12, cells: int = 64) -> np.ndarray:
    """t = 2^-(j+2) (1 + i/cells), i = 1..cells, j = 0..levels-1, ascending.

    Level j covers (2^-(j+2), 2^-(j+1)]; the top point is t = 1/2.
    """
    if levels < 1 or cells < 1:
        raise ValueError("levels and cells must be positive")
    i = np.arange(1, cells + 1)
    pts = [2.0 ** -(j + 2) * (1 + i / cells) for j in range(levels)]
    return np.sort(np.concatenate(pts))


@dataclass(frozen=True)
class SpectralGrid:
    ts: np.ndarray
    m0: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    norm: float = 1.0
    min_site: int | None = None
    label: str = ""

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=float)
        if ts.ndim != 1 or ts.size == 0:
            raise ValueError("grid needs at least one point")
        if np.any(np.diff(ts) <= 0) or ts[0] <= 0 or ts[-1] > 0.5:
            raise ValueError("grid points must be strictly increasing in (0, 1/2]")


def spectral_grid(mu, ts=None, *, levels: int = 12, cells: int = 64) -> SpectralGrid:
    """Sample the symbol and its first two derivatives."""
    ts = dyadic_points(levels, cells) if ts is None else np.asarray(ts, dtype=float)
    if isinstance(mu, SignedMeasure):
        norm = tv_norm(mu)
        lo = None if mu.is_zero else mu.min_site
    else:
        norm, lo = 1.0, getattr(mu, "min_site", None)
    return SpectralGrid(ts, fourier_eval(mu, ts, 0), fourier_eval(mu, ts, 1),
                        fourier_eval(mu, ts, 2), norm=norm, min_site=lo,
                        label=type(mu).__name__)


# ---------------------------------------------------------------------------
# majorants h


@dataclass(frozen=True)
class HProfile:
    ts: np.ndarray
    h: np.ndarray
    hprime: np.ndarray
    name: str

    def __post_init__(self):
        if not (self.ts.shape == self.h.shape == self.hprime.shape):
            raise ValueError("h, h' and ts must have the same shape")
        if np.any(~np.isfinite(self.h)) or np.any(self.h <= 0):
            raise ValueError(f"h={self.name} must be positive on the grid")
        _check_vanishes_at_zero(self.ts, self.h, self.name)

    @classmethod
    def tabulated(cls, ts, h, hprime=None, name: str = "tabulated") -> "HProfile":
        ts = np.asarray(ts, dtype=float)
        h = np.asarray(h, dtype=float)
        hp = np.gradient(h, ts) if hprime is None else np.asarray(hprime, dtype=float)
        return cls(ts, h, hp, name)


def _check_vanishes_at_zero(ts, h, name):
    # fit log h ~ p log t over the smallest-t eighth of the grid; need p > 0
    m = max(2, ts.size // 8)
    p = np.polyfit(np.log(ts[:m]), np.log(h[:m]), 1)[0]
    if not p > 0:
        raise ValueError(f"h={name} does not extrapolate to 0 at t=0 (log-slope {p:.3g})")


def h_profile(name: str, ts, alpha: float | None = None) -> HProfile:
    """Shipped majorants: 't^2', 'sin^2', '|2 sin pi t|^a', '|t|^a'."""
    t = np.asarray(ts, dtype=float)
    if name in ("t^2", "t2"):
        return HProfile(t, t * t, 2 * t, "t^2")
    if name in ("sin^2", "sin2"):
        return HProfile(t, np.sin(np.pi * t) ** 2,
                        2 * np.pi * np.sin(np.pi * t) * _cospi(t), "sin^2(pi t)")
    if alpha is None:
        raise ValueError(f"h={name} needs an exponent")
    a = float(alpha)
    if name in ("|2 sin pi t|^a", "2sin^a", "sin^a"):
        s = 2 * np.sin(np.pi * t)
        return HProfile(t, s ** a, a * s ** (a - 1) * 2 * np.pi * _cospi(t),
                        f"|2 sin pi t|^{a:g}")
    if name in ("|t|^a", "t^a"):
        return HProfile(t, t ** a, a * t ** (a - 1), f"|t|^{a:g}")
    raise ValueError(f"unknown h profile {name!r}")


def _cospi(t):
    # cos(pi t) written so that t = 1/2 gives an exact zero
    return np.sin(np.pi * (0.5 - t))


# ---------------------------------------------------------------------------
# condition reports


@dataclass(frozen=True)
class ConditionRecord:
    name: str
    holds: bool
    best_constant: float
    worst_t: float
    excluded: tuple[float, ...] = ()


@dataclass(frozen=True)
class ConditionReport:
    records: tuple[ConditionRecord, ...]
    reliable: bool = True
    note: str = ""

    @property
    def holds(self) -> bool:
        return all(r.holds for r in self.records)

    def __getitem__(self, name: str) -> ConditionRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    def rows(self) -> list[tuple]:
        return [(r.name, r.holds, r.best_constant, r.worst_t) for r in self.records]

    HEADER = ("condition", "holds", "best_constant", "worst_t")


def _sup_ratio(name, ts, num, den, *, as_inf=False, zero_tol=1e-12) -> ConditionRecord:
    """sup (or inf) of num/den with points where den vanishes excluded."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    scale = np.max(np.abs(den)) if den.size else 0.0
    bad = np.abs(den) <= zero_tol * scale
    ok = ~bad
    if not ok.any():
        return ConditionRecord(name, False, math.nan, math.nan, tuple(ts[bad]))
    ratio = num[ok] / den[ok]
    tt = ts[ok]
    i = int(np.argmin(ratio) if as_inf else np.argmax(ratio))
    c = float(ratio[i])
    holds = bool(np.isfinite(c) and (c > 0 if as_inf else True))
    return ConditionRecord(name, holds, c, float(tt[i]), tuple(float(x) for x in ts[bad]))


def check_ba(grid: SpectralGrid) -> ConditionReport:
    """|1 - mu_hat| <= C (1 - |mu_hat|): best C on the grid."""
    num = np.abs(1 - grid.m0)
    den = 1 - np.abs(grid.m0)
    tol = 8 * np.finfo(float).eps
    both_zero = (num <= tol) & (np.abs(den) <= tol)
    blocked = (den <= tol) & (num > tol)
    if blocked.any():
        i = int(np.argmax(blocked))
        return ConditionReport((ConditionRecord("BA", False, math.inf, float(grid.ts[i])),))
    keep = ~both_zero
    if not keep.any():
        return ConditionReport((ConditionRecord("BA", True, 0.0, float(grid.ts[0])),))
    ratio = num[keep] / den[keep]
    i = int(np.argmax(ratio))
    c = float(ratio[i])
    return ConditionReport((ConditionRecord("BA", bool(np.isfinite(c)), c,
                                            float(grid.ts[keep][i])),))


def check_ba1_ba2(grid: SpectralGrid, h: HProfile, include_v: bool = True) -> ConditionReport:
    """Best constants for conditions (i)-(iv) and, with ``include_v``, (v).

    (i)   inf (1 - |mu_hat|)/h          must be > 0
    (ii)  sup t|mu_hat'|/h
    (iii) sup |mu_hat'|/h'
    (iv)  sup t|mu_hat''|/|mu_hat'|
    (v)   sup h/(t h')
    Points where a denominator vanishes are excluded and listed; more than
    1% excluded for any condition marks the report unreliable.
    """
    if not np.array_equal(grid.ts, h.ts):
        raise ValueError("grid and h profile use different t values")
    t = grid.ts
    a0, a1, a2 = np.abs(grid.m0), np.abs(grid.m1), np.abs(grid.m2)
    recs = [
        _sup_ratio("i", t, 1 - a0, h.h, as_inf=True),
        _sup_ratio("ii", t, t * a1, h.h),
        _sup_ratio("iii", t, a1, h.hprime),
        _sup_ratio("iv", t, t * a2, a1),
    ]
    if include_v:
        recs.append(_sup_ratio("v", t, h.h, t * h.hprime))
    limit = 0.01 * t.size
    reliable = all(len(r.excluded) <= limit for r in recs)
    return ConditionReport(tuple(recs), reliable=reliable, note=h.name)


def dungey_check(grid: SpectralGrid, alpha: float) -> ConditionReport:
    """Re mu_hat <= 1 - c t^alpha and |mu_hat'| <= C t^(alpha-1) on the grid."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0,1)")
    if grid.min_site is not None and grid.min_site < 0:
        warnings.warn("measure has mass on negative sites; the criterion assumes support in N0",
                      stacklevel=2)
    t = grid.ts
    r1 = _sup_ratio("dungey_i", t, 1 - grid.m0.real, t ** alpha, as_inf=True)
    r2 = _sup_ratio("dungey_ii", t, np.abs(grid.m1), t ** (alpha - 1))
    return ConditionReport((r1, r2))


def search_h(grid: SpectralGrid, candidates: Sequence[tuple[str, float | None]] | None = None,
             include_v: bool = True) -> tuple[HProfile | None, ConditionReport | None]:
    """First shipped majorant for which all conditions hold on the grid."""
    if candidates is None:
        candidates = [("t^2", None), ("sin^2", None)]
        candidates += [("|2 sin pi t|^a", a) for a in (0.25, 0.5, 0.75, 1.0)]
        candidates += [("|t|^a", a) for a in (0.25, 0.5, 0.75, 1.0)]
    last = None
    for name, a in candidates:
        h = h_profile(name, grid.ts, a)
        rep = check_ba1_ba2(grid, h, include_v)
        if rep.holds and rep.reliable:
            return h, rep
        last = rep
    return None, last


def refinement_drift(coarse: ConditionReport, fine: ConditionReport) -> dict[str, float]:
    """Relative change of each best constant between two grids."""
    out = {}
    for a in coarse.records:
        b = fine[a.name]
        if a.best_constant == b.best_constant:
            out[a.name] = 0.0
        elif not (math.isfinite(a.best_constant) and math.isfinite(b.best_constant)):
            out[a.name] = math.inf
        else:
            out[a.name] = abs(b.best_constant - a.best_constant) / max(abs(a.best_constant),
                                                                     1e-300)
    return out


def check_with_refinement(mu, h_name: str, h_alpha: float | None = None, *, levels: int = 12,
                          extra_levels: int = 2, cells: int = 64,
                          include_v: bool = True) -> tuple[ConditionReport, dict[str, float]]:
    """Run the BA1/BA2 check on ``levels`` and ``levels + extra_levels``; report drift."""
    reps = []
    for L in (levels, levels + extra_levels):
        g = spectral_grid(mu, levels=L, cells=cells)
        reps.append(check_ba1_ba2(g, h_profile(h_name, g.ts, h_alpha), include_v))
    return reps[0], refinement_drift(reps[0], reps[1])


