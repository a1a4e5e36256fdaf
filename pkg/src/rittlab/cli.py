"""Batch front end: ``rittlab <command> --config FILE --out DIR``.

Configs are INI files (flat ``key = value`` pairs in bracketed sections).
Every command writes comma-separated tables with a '#' provenance header
carrying the sha256 of the effective config, plus ``summary.csv``; with
``--plot`` PNG figures are rendered next to them.

Exit status: 0 success, 2 bad config or input, 3 capacity exceeded,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import itertools
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import czdecomp, lemmalab, plotting, spectral, sqfun, varosc, zmeasure
from .errors import CapacityError, NumericalError
from .report import config_digest, write_csv
from .sqfun import QSpec, Signal

COMMANDS = ("measure", "check-ba", "ritt", "sqfn", "var", "cz", "weak11", "lemmalab", "sweep")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config access


class Config:
    def __init__(self, parser: configparser.ConfigParser):
        self.p = parser

    @classmethod
    def from_text(cls, text: str) -> "Config":
        p = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
        p.optionxform = str
        p.read_string(text)
        return cls(p)

    def canonical(self) -> str:
        """Sorted sections and keys; the hash of this text identifies a run."""
        lines = []
        for sec in sorted(self.p.sections()):
            lines.append(f"[{sec}]")
            for k in sorted(self.p[sec]):
                lines.append(f"{k} = {self.p[sec][k].strip()}")
        return "\n".join(lines) + "\n"

    def set(self, section: str, key: str, value: str):
        if not self.p.has_section(section):
            self.p.add_section(section)
        self.p[section][key] = value

    def get(self, section: str, key: str, default=None) -> str:
        if self.p.has_option(section, key):
            return self.p[section][key].strip()
        if default is None:
            raise ConfigError(f"missing [{section}] {key}")
        return default

    def num(self, section: str, key: str, default=None) -> float:
        raw = self.get(section, key, None if default is None else repr(default))
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from None

    def int(self, section: str, key: str, default=None) -> int:
        v = self.num(section, key, default)
        if not float(v).is_integer():
            raise ConfigError(f"[{section}] {key} must be an integer")
        return int(v)

    def flag(self, section: str, key: str, default: bool = False) -> bool:
        raw = self.get(section, key, "true" if default else "false").lower()
        if raw in ("1", "true", "yes", "on"):
            return True
        if raw in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a boolean")


# ---------------------------------------------------------------------------
# builders


def build_measure(cfg: Config, *, symbol: bool = False):
    """The configured measure; with ``symbol`` the closed form is returned when requested."""
    name = cfg.get("measure", "name", "nu_alpha")
    if name == "nu_alpha":
        alpha = cfg.num("measure", "alpha", 0.5)
        if symbol and cfg.get("measure", "symbol", "truncated") == "exact":
            return spectral.nu_alpha_exact(alpha)
        return zmeasure.nu_alpha(alpha, cfg.int("measure", "K", 4096),
                                 renormalize=cfg.flag("measure", "renormalize"))
    builtins = {"symmetric_walk": zmeasure.symmetric_walk, "lazy_walk": zmeasure.lazy_walk,
                "lazy_shift": zmeasure.lazy_shift}
    if name in builtins:
        return builtins[name]()
    if name == "dirac":
        return zmeasure.dirac(cfg.int("measure", "k", 0))
    if name == "file":
        return zmeasure.read_measure(cfg.get("measure", "path"))
    raise ConfigError(f"unknown measure {name!r}")


def build_signal(cfg: Config) -> Signal:
    kind = cfg.get("model", "kind", "cyclic")
    sig = cfg.get("signal", "kind", "spike")
    if kind == "cyclic":
        N = cfg.int("model", "N", 256)
        if sig == "spike":
            return Signal.spike_cyclic(N, cfg.int("signal", "position", 0))
        if sig == "random":
            rng = np.random.default_rng(cfg.int("signal", "seed", 0))
            v = rng.standard_normal(N)
            bits = cfg.int("signal", "quantize_bits", 30)
            if bits > 0:
                v = np.round(np.ldexp(v, bits)) * 2.0 ** -bits
            return Signal.cyclic(v)
        if sig == "file":
            v = np.loadtxt(cfg.get("signal", "path"), comments="#", ndmin=1)
            if v.size != N:
                raise ConfigError(f"signal file has {v.size} values, model N = {N}")
            return Signal.cyclic(v)
    elif kind == "window":
        if sig == "spike":
            return Signal.spike_window(cfg.int("signal", "position", 0))
        if sig == "file":
            v = np.loadtxt(cfg.get("signal", "path"), comments="#", ndmin=1)
            return Signal.window(v, cfg.int("signal", "start", 0))
    raise ConfigError(f"unsupported signal {sig!r} on model {kind!r}")


def qspec(cfg: Config) -> QSpec:
    return QSpec(cfg.num("operator", "alpha", 1.0), cfg.num("operator", "s", 2.0),
                 cfg.num("operator", "r", 1.0), cfg.int("operator", "n_max", 256),
                 cfg.int("operator", "frac_K", 256))


def build_blocks(cfg: Config, sec: str, n_max: int) -> varosc.BlockSequence:
    kind = cfg.get(sec, "blocks", "gap")
    a = cfg.num(sec, "a", 0.5)
    if kind == "gap":
        return varosc.gap_sequence(a, cfg.int(sec, "n_start", 1), n_max)
    if kind == "dyadic":
        k_max = int(math.floor(math.log2(n_max)))
        return varosc.interpolated_dyadic(a, k_max, cfg.num("operator", "s", 2.0)).truncate(n_max)
    raise ConfigError(f"unknown block kind {kind!r}")


# ---------------------------------------------------------------------------
# commands; each returns an ordered summary dict and writes into ``out`` when given


class Run:
    def __init__(self, cfg: Config, out: Path | None, plot: bool, command: str):
        self.cfg, self.out, self.plot, self.command = cfg, out, plot, command
        self.prov = {"command": command, "config_sha256": config_digest(cfg.canonical())}

    def table(self, name: str, header, rows):
        if self.out is not None:
            write_csv(self.out / name, header, rows, self.prov)

    def figure(self, fn, name: str, *args, **kw):
        if self.out is not None and self.plot:
            fn(*args, path=self.out / name, **kw)


def cmd_measure(run: Run) -> dict:
    mu = build_measure(run.cfg)
    run.table("measure.csv", ("site", "weight"), mu.atoms())
    if run.out is not None:
        zmeasure.write_measure(mu, run.out / "measure.txt",
                               [f"config_sha256 {run.prov['config_sha256']}"])
    run.figure(plotting.measure_stem, "measure.png", mu.sites, mu.weights,
               title=run.cfg.get("measure", "name", "nu_alpha"))
    tail = getattr(mu, "tail_mass", 0.0)
    return {"size": mu.size, "mass": mu.mass, "tv_norm": zmeasure.tv_norm(mu),
            "tail_mass": tail, "l1_error": mu.l1_error}


def cmd_check_ba(run: Run) -> dict:
    cfg = run.cfg
    mu = build_measure(cfg, symbol=True)
    levels = cfg.int("spectral", "levels", 12)
    cells = cfg.int("spectral", "cells", 64)
    h_name = cfg.get("spectral", "h", "|2 sin pi t|^a")
    h_alpha = cfg.num("spectral", "h_alpha", 0.5)
    grid = spectral.spectral_grid(mu, levels=levels, cells=cells)
    ba = spectral.check_ba(grid)
    rep, drift = spectral.check_with_refinement(
        mu, h_name, h_alpha, levels=levels, extra_levels=cfg.int("spectral", "extra_levels", 2),
        cells=cells)
    rows = [r + ("",) for r in ba.rows()]
    rows += [r + (drift[r[0]],) for r in rep.rows()]
    d_alpha = cfg.num("spectral", "dungey_alpha", 0.0)
    if 0 < d_alpha < 1:
        rows += [r + ("",) for r in spectral.dungey_check(grid, d_alpha).rows()]
    run.table("spectral.csv", spectral.ConditionReport.HEADER + ("drift",), rows)
    run.figure(plotting.trace, "symbol.png", grid.ts,
               {"1-|mu|": 1 - np.abs(grid.m0), "|1-mu|": np.abs(1 - grid.m0)},
               xlabel="t", ylabel="symbol", logx=True, logy=True)
    return {"ba_holds": ba.holds, "ba_constant": ba.records[0].best_constant,
            "ba12_holds": rep.holds, "reliable": rep.reliable,
            "max_drift": max(drift.values(), default=0.0)}


def cmd_ritt(run: Run) -> dict:
    cfg = run.cfg
    mu = build_measure(cfg)
    tr = zmeasure.ritt_constant(mu, cfg.int("ritt", "N", 512),
                                method=cfg.get("ritt", "method", "auto"))
    run.table("ritt_trace.csv", ("n", "value", "running_max"),
              zip(tr.n.tolist(), tr.values, tr.running_max))
    run.figure(plotting.trace, "ritt_trace.png", tr.n, {"trace": tr.values},
               xlabel="n", ylabel="n |mu^n - mu^(n+1)|_1", logx=True)
    ratio = tr.octave_ratio() if tr.n[-1] >= 4 else math.nan
    return {"sup": tr.sup, "last": float(tr.values[-1]), "octave_ratio": ratio,
            "method": tr.method}


def cmd_sqfn(run: Run) -> dict:
    cfg = run.cfg
    mu = build_measure(cfg, symbol=True)
    f = build_signal(cfg)
    res = sqfun.q_function(mu, qspec(cfg), f, route=cfg.get("operator", "route", "auto"))
    run.table("q_trace.csv", sqfun.QResult.HEADER, res.rows())
    run.figure(plotting.trace, "q_trace.png", res.q.sites,
               {"Q f": res.q.values, "partial n_max/2": res.partial_half},
               xlabel="x", ylabel="Q f", logy=True)
    return {"q_l1": res.l1(), "f_l1": f.l1(), "tail_diagnostic": res.tail_diagnostic,
            "tail_flags": int(np.count_nonzero(res.tail_flag))}


def cmd_var(run: Run) -> dict:
    cfg = run.cfg
    mu = build_measure(cfg, symbol=True)
    f = build_signal(cfg)
    beta = cfg.num("operator", "beta", 0.0)
    r = cfg.num("operator", "r", 1.0)
    s = cfg.num("operator", "s", 2.0)
    n_max = cfg.int("operator", "n_max", 128)
    mode = cfg.get("var", "mode", "variation")
    if mode == "variation":
        res = varosc.orbit_variation(mu, beta, r, s, f, n_max)
    elif mode == "oscillation":
        res = varosc.orbit_variation(mu, beta, r, s, f, n_max, blocks=build_blocks(cfg, "var", n_max))
    elif mode == "block_differences":
        res = varosc.block_differences(mu, beta, r, s, f, build_blocks(cfg, "var", n_max))
    else:
        raise ConfigError(f"unknown var mode {mode!r}")
    run.table("variation.csv", ("x", "value"), zip(res.values.sites.tolist(), res.values.values))
    run.figure(plotting.trace, "variation.png", res.values.sites, {mode: res.values.values},
               xlabel="x", ylabel="value", logy=True)
    out = {"l1": res.l1, "mode": res.mode}
    out.update(res.meta)
    return out


def cmd_cz(run: Run) -> dict:
    cfg = run.cfg
    f = build_signal(cfg)
    lam = cfg.num("cz", "lam", 1.0)
    d = czdecomp.cz_decompose(f, lam, cfg.get("cz", "stopping", "abs"))
    rep = czdecomp.verify_cz(d, f)
    run.table("cz_properties.csv", czdecomp.CZReport.HEADER,
              [(r.name, r.holds, r.value, r.bound) for r in rep.rows])
    run.table("cz_parts.csv", ("base", "start", "length"),
              [(p.base[0], p.support[0], p.length) for p in d.parts])
    run.figure(plotting.trace, "cz.png", f.sites,
               {"f": f.values, "g": d.g.values, "M": d.maximal.values},
               xlabel="x", ylabel="value")
    return {"passed": rep.passed, "parts": len(d.parts),
            "bad_measure": sum(p.length for p in d.parts) / f.modulus,
            "d_literal": rep["d_literal"].holds}


def cmd_weak11(run: Run) -> dict:
    cfg = run.cfg
    mu = build_measure(cfg, symbol=True)
    f = build_signal(cfg)
    params = qspec(cfg)

    def op(g):
        return sqfun.q_function(mu, params, g).q

    q = op(f)
    lambdas = czdecomp.level_grid(q, cfg.int("weak11", "count", 64))
    prof = czdecomp.weak11_profile(lambda _: q, f, lambdas)
    run.table("weak11.csv", czdecomp.WeakProfile.HEADER, prof.rows())
    run.figure(plotting.trace, "weak11.png", prof.lambdas, {"weak constant": prof.weak_constant},
               xlabel="lambda", ylabel="lambda m{Qf > lambda} / |f|_1", logx=True)
    return {"grid_sup": prof.sup, "weak_constant": czdecomp.weak_constant(q, f.l1())}


def _family(cfg: Config, mu, n_max: int):
    kind = cfg.get("lemmalab", "family", "Q")
    s = cfg.num("operator", "s", 2.0)
    r = cfg.num("operator", "r", 1.0)
    if kind == "Q":
        return lemmalab.QFamily(mu, cfg.num("operator", "alpha", 1.0), s, r)
    beta = cfg.num("operator", "beta", 0.0)
    blocks = build_blocks(cfg, "lemmalab", n_max)
    if kind == "BlockDiff":
        return lemmalab.BlockDiff(mu, beta, r, blocks, s)
    if kind == "BlockMax":
        return lemmalab.BlockMax(mu, beta, r, blocks, s)
    raise ConfigError(f"unknown family {kind!r}")


def cmd_lemmalab(run: Run) -> dict:
    cfg = run.cfg
    mu = build_measure(cfg, symbol=True)
    n_max = cfg.int("lemmalab", "n_max", cfg.int("operator", "n_max", 512))
    levels = cfg.int("lemmalab", "grid_levels", 12)
    cells = cfg.int("lemmalab", "cells", 64)
    task = cfg.get("lemmalab", "task", "quad")
    fam = _family(cfg, mu, n_max)
    if task == "envelope":
        eid = cfg.get("lemmalab", "estimate", "eqA")
        g = cfg.get("lemmalab", "gamma", "")
        res = lemmalab.envelope_check(
            fam, (cfg.get("lemmalab", "h", "|t|^a"), cfg.num("lemmalab", "h_alpha", 0.5)), eid,
            levels, cells=cells, n_max=n_max, gamma=float(g) if g else None)
        run.table("envelope.csv", ("estimate", "empirical_C", "worst_t", "holds", "refined_C"),
                  [(res.estimate_id, res.empirical_C, res.worst_t, res.holds, res.refined_C)])
        return {"estimate": eid, "empirical_C": res.empirical_C, "worst_t": res.worst_t,
                "holds": res.holds}
    weights = cfg.get("lemmalab", "weights", "strong")
    if fam.kind == "BlockMax":
        res = lemmalab.quad_blocks(fam, n_max=n_max, grid_levels=levels, weights=weights,
                                   cells=cells)
    else:
        res = lemmalab.quad_abcd(fam, n_max=n_max, grid_levels=levels, weights=weights,
                                 cells=cells)
    run.table("quad.csv", lemmalab.QuadResult.HEADER, res.rows())
    run.figure(plotting.ladder, "quad_ladder.png", res.ladder, res.verdicts, title=fam.label)
    out = {}
    for q in "ABCD":
        out[q] = res.values[q]
        out[f"{q}_verdict"] = res.verdicts[q]
    for q in "ABCD":
        out[f"{q}_literal"] = res.literal_verdicts[q]
    out["max_tail_share"] = res.diagnostics["max_tail_share"]
    if "E_site0" in res.diagnostics:
        out["E_site0"] = res.diagnostics["E_site0"]
    return out


HANDLERS = {"measure": cmd_measure, "check-ba": cmd_check_ba, "ritt": cmd_ritt,
            "sqfn": cmd_sqfn, "var": cmd_var, "cz": cmd_cz, "weak11": cmd_weak11,
            "lemmalab": cmd_lemmalab}


# ---------------------------------------------------------------------------
# sweep


def _sweep_axes(cfg: Config) -> tuple[str, list[tuple[str, str, list[str]]]]:
    if not cfg.p.has_section("sweep"):
        raise ConfigError("sweep needs a [sweep] section")
    command = cfg.get("sweep", "command")
    if command not in HANDLERS:
        raise ConfigError(f"cannot sweep {command!r}")
    axes = []
    for key, raw in cfg.p["sweep"].items():
        if key == "command":
            continue
        if "." not in key:
            raise ConfigError(f"sweep key {key!r} must look like section.key")
        sec, k = key.split(".", 1)
        vals = [v.strip() for v in raw.split(",") if v.strip()]
        if not vals:
            raise ConfigError(f"sweep key {key!r} has no values")
        axes.append((sec, k, vals))
    return command, axes


def _run_cell(args) -> dict:
    command, text = args
    cfg = Config.from_text(text)
    try:
        out = HANDLERS[command](Run(cfg, None, False, command))
        return {"status": "ok", **out}
    except CapacityError as e:
        return {"status": f"capacity: {e}"}
    except NumericalError as e:
        return {"status": f"numerical: {e}"}
    except ValueError as e:
        return {"status": f"config: {e}"}


def cmd_sweep(run: Run, jobs: int = 1) -> dict:
    command, axes = _sweep_axes(run.cfg)
    cells = []
    for combo in itertools.product(*[vals for _, _, vals in axes]):
        c = Config.from_text(run.cfg.canonical())
        c.p.remove_section("sweep")
        for (sec, k, _), v in zip(axes, combo):
            c.set(sec, k, v)
        cells.append((command, c.canonical()))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    keys = []
    for r in results:
        keys += [k for k in r if k not in keys]
    header = [f"{s}.{k}" for s, k, _ in axes] + keys
    rows = []
    for combo, r in zip(itertools.product(*[v for _, _, v in axes]), results):
        rows.append(list(combo) + [r.get(k, "") for k in keys])
    run.table("sweep.csv", header, rows)
    failed = sum(1 for r in results if r["status"] != "ok")
    return {"command": command, "cells": len(cells), "failed": failed}


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="INI config file")
    common.add_argument("--out", default="rittlab-out", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")
    common.add_argument("--seed", type=int, default=None,
                        help="overrides [signal] seed (unsigned 64-bit)")
    common.add_argument("--plot", action="store_true", help="render PNG figures")
    p = argparse.ArgumentParser(prog="rittlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = Config.from_text(fh.read())
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg.set("signal", "seed", str(args.seed))
        if args.jobs < 1:
            raise ConfigError("--jobs must be positive")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        run = Run(cfg, out, args.plot, args.command)
        if args.command == "sweep":
            summary = cmd_sweep(run, args.jobs)
        else:
            summary = HANDLERS[args.command](run)
        run.table("summary.csv", ("key", "value"), summary.items())
    except CapacityError as e:
        print(f"rittlab: capacity exceeded: {e}", file=sys.stderr)
        return 3
    except NumericalError as e:
        print(f"rittlab: numerical failure: {e}", file=sys.stderr)
        return 4
    except (ValueError, KeyError, OSError, configparser.Error) as e:
        print(f"rittlab: {e}", file=sys.stderr)
        return 2
    for k, v in summary.items():
        print(f"{k}: {v}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
