"""``mohardy`` command line: one experiment per invocation.

Every subcommand writes ``summary.json`` plus CSV tables into
``<out>/<subcommand>/`` and prints the summary.  Exit status is 0 on
success, 1 when a check fails and 2 for usage, config or input errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .atoms import atomic_decompose, validate_atom
from .bmo import bmo_phi_report
from .config import ExperimentConfig, load_config
from .corpus import generate_corpus, shipped_atom_functions
from .czd import cz_decompose
from .errors import ConfigError, MoHardyError
from .grid import Cube, GridFunction
from .growth import builtin_family, from_descriptor
from .maximal import DICTIONARY_VERSION, maximal_function
from .norms import luxembourg_norm, modular
from .operators import CUTOFF_VERSION, Symbol, psdo_apply, riesz_local, riesz_multiplier_bound
from .verify import run_verification, write_csv
from .weights import a_p_loc_constant, check_doubling, default_lattice

__all__ = ["main", "build_parser"]

log = logging.getLogger("mohardy")

OK, CHECK_FAILED, USAGE = 0, 1, 2
MAXIMAL_KINDS = ("grand", "grand0", "nontangential", "vertical", "vertical_nt", "peetre", "mloc")


class _Inputs(list):
    """``(tag, GridFunction)`` pairs."""


def _growth(cfg: ExperimentConfig, text: str | None):
    if text is None:
        return cfg.growth
    text = text.strip()
    try:
        if text.startswith("{"):
            return from_descriptor(json.loads(text))
        return builtin_family(text)
    except (json.JSONDecodeError, MoHardyError, TypeError, KeyError) as exc:
        raise ConfigError(f"--growth {text!r}: {exc}") from exc


def _inputs(cfg: ExperimentConfig, args, default: str = "corpus") -> _Inputs:
    g = cfg.grid
    out = _Inputs()
    if args.input:
        for p in args.input:
            try:
                out.append((Path(p).name, GridFunction.from_csv(g, p)))
            except (OSError, ValueError) as exc:
                raise ConfigError(f"--input {p}: {exc}") from exc
    if args.indicator:
        lo, hi = args.indicator
        if not hi > lo:
            raise ConfigError("--indicator needs LO < HI")
        cube = Cube(np.full(g.dimension, (lo + hi) / 2), hi - lo)
        out.append((f"indicator[{lo:g},{hi:g}]", GridFunction(g, cube.contains(g.coordinates()).astype(float))))
    if not out:
        if default == "atoms":
            out.extend((f"atom{i}", f) for i, (f, _, _) in enumerate(shipped_atom_functions(g)))
        else:
            out.extend((f"{i}:{it.tag}", it.function)
                       for i, it in enumerate(generate_corpus(cfg.seed, cfg.corpus_spec, g)))
    return out


def _outdir(cfg: ExperimentConfig, args, name: str) -> Path:
    base = Path(args.out) if args.out else cfg.output
    d = base / name
    d.mkdir(parents=True, exist_ok=True)
    return d


def _finish(d: Path, summary: dict, cfg: ExperimentConfig, failed: bool = False) -> int:
    summary = dict(summary)
    summary["provenance"] = {"config_sha256": cfg.digest(), "package_version": __version__,
                             "dictionary_version": DICTIONARY_VERSION, "cutoff_version": CUTOFF_VERSION}
    summary["status"] = "fail" if failed else "ok"
    text = json.dumps(summary, indent=2, sort_keys=True, default=float)
    (d / "summary.json").write_text(text + "\n")
    print(text)
    return CHECK_FAILED if failed else OK


# -- subcommands -------------------------------------------------------------------


def cmd_norm(cfg, args) -> int:
    phi = _growth(cfg, args.growth)
    rows, results = [], []
    for tag, f in _inputs(cfg, args):
        nrm = luxembourg_norm(phi, f).norm
        M = modular(phi, f, nrm) if nrm > 0 else 0.0
        rows.append((tag, nrm, M))
        results.append({"input": tag, "norm": nrm, "modular_at_norm": M})
    d = _outdir(cfg, args, "norm")
    write_csv(d / "norms.csv", ["input", "norm", "modular_at_norm"], rows)
    return _finish(d, {"command": "norm", "growth": phi.name, "results": results}, cfg)


def cmd_weights(cfg, args) -> int:
    g = cfg.grid
    lat = default_lattice(g, 1.0, int(cfg.section("lattice")["stride"]))
    phis = [_growth(cfg, args.growth)] if args.growth else cfg.families
    rows, results = [], []
    failed = False
    t = [2.0 ** k for k in range(-4, 5)]
    for phi in phis:
        entry = {"growth": phi.name, "A_p_loc": {}}
        for p in args.p:
            a = a_p_loc_constant(phi, p, lat, t)
            entry["A_p_loc"][repr(p)] = a
            rows.append((phi.name, p, a))
            failed |= not math.isfinite(a)
        dbl = check_doubling(phi, t, lat)
        entry["doubling_small"] = dbl.worst_ratio_small
        entry["doubling_large"] = dbl.worst_ratio_large
        results.append(entry)
    d = _outdir(cfg, args, "weights")
    write_csv(d / "a_p_loc.csv", ["growth", "p", "constant"], rows)
    return _finish(d, {"command": "weights", "results": results}, cfg, failed)


def cmd_maximal(cfg, args) -> int:
    phi = _growth(cfg, args.growth)
    kinds = args.which or list(MAXIMAL_KINDS)
    g = cfg.grid
    d = _outdir(cfg, args, "maximal")
    results = []
    coords = g.coordinates().reshape(-1, g.dimension)
    for i, (tag, f) in enumerate(_inputs(cfg, args)):
        Ms = {k: maximal_function(f, k, cfg.maximal) for k in kinds}
        cols = [coords[:, j] for j in range(g.dimension)] + [np.real(f.values).ravel()]
        cols += [Ms[k].values.ravel() for k in kinds]
        write_csv(d / f"input{i:03d}.csv", [f"x{j}" for j in range(g.dimension)] + ["f", *kinds],
                  list(zip(*cols)))
        results.append({"input": tag, "file": f"input{i:03d}.csv",
                        "quasinorms": {k: luxembourg_norm(phi, Ms[k]).norm for k in kinds}})
    return _finish(d, {"command": "maximal", "growth": phi.name, "results": results}, cfg)


def cmd_czd(cfg, args) -> int:
    sec = cfg.section("czd")
    sep = sec["separation"] if args.separation is None else args.separation
    phi = cfg.growth
    s = phi.critical_degree(cfg.grid.dimension) if args.degree is None else args.degree
    d = _outdir(cfg, args, "czd")
    rows, results = [], []
    failed = False
    for i, (tag, f) in enumerate(_inputs(cfg, args)):
        G = maximal_function(f, "grand", cfg.maximal)
        fmax = float(np.max(np.abs(f.values)))
        levels = [args.level] if args.level else [float(G.values.max()) * 2.0 ** -k
                                                   for k in range(1, int(sec["levels"]) + 1)]
        for lam in levels:
            try:
                cz = cz_decompose(f, lam, s, G, sep, int(sec["min_cells"]), sec["dilation"])
            except MoHardyError as exc:
                results.append({"input": tag, "level": lam, "skipped": str(exc)})
                continue
            rec = cz.reconstruction_error() / fmax if fmax > 0 else 0.0
            mom = cz.moment_errors()
            mom = float(mom.max()) if mom.size else 0.0
            failed |= rec > 1e-8 or mom > 1e-8
            results.append({"input": tag, "level": lam, "cubes": len(cz), "reconstruction": rec,
                            "moments": mom, "C1": cz.c1(),
                            "flagged_fraction": cz.cover.constants.get("flagged_fraction", 0.0)})
            for st, k, dist, fl in zip(cz.cover.starts, cz.cover.sizes, cz.cover.dists, cz.cover.flags):
                rows.append((i, lam, *[int(v) for v in st], int(k), dist, bool(fl)))
    n = cfg.grid.dimension
    write_csv(d / "cubes.csv", ["input", "level", *[f"start{j}" for j in range(n)], "cells", "dist", "flagged"],
              rows)
    return _finish(d, {"command": "czd", "degree": s, "separation": sep, "results": results}, cfg, failed)


def cmd_atoms(cfg, args) -> int:
    phi = _growth(cfg, args.growth)
    sec = cfg.section("atoms")
    d = _outdir(cfg, args, "atoms")
    n = cfg.grid.dimension
    rows, results = [], []
    failed = False
    for i, (tag, f) in enumerate(_inputs(cfg, args)):
        G = maximal_function(f, "grand", cfg.maximal)
        k1 = int(math.ceil(math.log2(float(G.values.max()))))
        dec = atomic_decompose(f, phi, maximal=G, k_range=(k1 - int(sec["depth"]), k1),
                               separation=sec["separation"], min_cells=int(cfg.section("czd")["min_cells"]))
        fmax = float(np.max(np.abs(f.values)))
        res = float(np.max(np.abs(dec.residual.values))) / fmax
        invalid = 0
        for a in dec.atoms + ([dec.single_atom] if dec.single_atom else []):
            ok = validate_atom(a, phi).valid
            invalid += not ok
            Q = a.region
            rows.append((i, a.kind, a.level, a.index, *Q.center, Q.side, a.scale, ok))
        failed |= res > 1e-6 or invalid > 0
        results.append({"input": tag, "atoms": len(dec), "lambda_inf": dec.lambda_q, "residual": res,
                        "invalid": invalid, "C10": dec.constants.get("C10", 0.0), "levels": list(dec.levels)})
    write_csv(d / "atoms.csv", ["input", "kind", "level", "index", *[f"center{j}" for j in range(n)], "side",
                                "scale", "valid"], rows)
    return _finish(d, {"command": "atoms", "growth": phi.name, "results": results}, cfg, failed)


def cmd_bmo(cfg, args) -> int:
    phi = _growth(cfg, args.growth)
    g = cfg.grid
    s = cfg.section("bmo")["s"]
    s = phi.critical_degree(g.dimension) if s is None else int(s)
    lat = default_lattice(g, math.inf, int(cfg.section("lattice")["stride"]))
    d = _outdir(cfg, args, "bmo")
    results = []
    for i, (tag, f) in enumerate(_inputs(cfg, args)):
        rep = bmo_phi_report(f, phi, s, lat)
        (d / f"cubes{i:03d}.csv").write_text(rep.to_csv())
        results.append({"input": tag, "norm": rep.norm, "small_term": rep.small_term,
                        "large_term": rep.large_term, "whole_space": rep.whole_space,
                        "max_projection_defect": rep.max_defect})
    return _finish(d, {"command": "bmo", "growth": phi.name, "degree": s, "results": results}, cfg)


def _operator_run(cfg, args, name: str, op, extra: dict, failed: bool = False) -> int:
    phi = _growth(cfg, args.growth)
    g = cfg.grid
    d = _outdir(cfg, args, name)
    coords = g.coordinates().reshape(-1, g.dimension)
    results = []
    for i, (tag, f) in enumerate(_inputs(cfg, args, default="atoms")):
        Tf = op(f)
        a = luxembourg_norm(phi, maximal_function(f, "grand", cfg.maximal)).norm
        b = luxembourg_norm(phi, maximal_function(Tf, "grand", cfg.maximal)).norm
        l2 = float(np.sqrt(np.sum(np.abs(f.values) ** 2)))
        ratio = b / a if a > 0 else None
        failed |= ratio is not None and not math.isfinite(ratio)
        cols = [coords[:, j] for j in range(g.dimension)] + [np.real(f.values).ravel(),
                                                             np.real(Tf.values).ravel()]
        write_csv(d / f"input{i:03d}.csv", [f"x{j}" for j in range(g.dimension)] + ["f", "Tf"],
                  list(zip(*cols)))
        results.append({"input": tag, "h_phi_ratio": ratio,
                        "l2_ratio": float(np.sqrt(np.sum(np.abs(Tf.values) ** 2))) / l2 if l2 > 0 else None})
    ratios = [r["h_phi_ratio"] for r in results if r["h_phi_ratio"] is not None]
    summary = {"command": name, "growth": phi.name, "worst_h_phi_ratio": max(ratios) if ratios else 0.0,
               "results": results}
    summary.update(extra)
    return _finish(d, summary, cfg, failed)


def cmd_riesz(cfg, args) -> int:
    ops = cfg.section("operators")
    j = ops["direction"] if args.direction is None else args.direction
    if not 1 <= j <= cfg.grid.dimension:
        raise ConfigError(f"--direction must be in 1..{cfg.grid.dimension}")
    extra = {"direction": j, "multiplier_bound": riesz_multiplier_bound(cfg.grid, j)}
    return _operator_run(cfg, args, "riesz", lambda f: riesz_local(f, j), extra)


def cmd_psdo(cfg, args) -> int:
    n = cfg.grid.dimension
    amp = cfg.section("operators")["symbol_amplitude"] if args.amplitude is None else args.amplitude
    sigma = Symbol.identity(n) if args.symbol == "identity" else Symbol.smoothing(n, amp)
    chk = sigma.check()
    extra = {"symbol": sigma.name, "symbol_check": {"ok": chk.ok, "worst_ratio": float(chk.worst[0])}}
    return _operator_run(cfg, args, "psdo", lambda f: psdo_apply(sigma, f, check=False), extra,
                         failed=not chk.ok)


def cmd_verify(cfg, args) -> int:
    out = (Path(args.out) if args.out else cfg.output) / "verify"
    rep = run_verification(cfg, out, determinism=not args.no_determinism,
                           only=set(args.only) if args.only else None)
    for c in rep.checks:
        print(c.line())
        if not c.passed and c.witness:
            print(f"    witness: {c.witness}")
    print(f"report: {out / 'report.json'}")
    return OK if rep.passed else CHECK_FAILED


COMMANDS = {"norm": cmd_norm, "weights": cmd_weights, "maximal": cmd_maximal, "czd": cmd_czd,
            "atoms": cmd_atoms, "bmo": cmd_bmo, "riesz": cmd_riesz, "psdo": cmd_psdo, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    def common_options(default):
        c = argparse.ArgumentParser(add_help=False, argument_default=default)
        c.add_argument("--config", help="JSON experiment config (merged over the defaults)")
        c.add_argument("--out", help="output directory (overrides the config)")
        c.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        return c

    # the subcommand copies must not overwrite values given before the subcommand
    top, common = common_options(None), common_options(argparse.SUPPRESS)
    inputs = argparse.ArgumentParser(add_help=False)
    inputs.add_argument("--input", action="append", metavar="CSV",
                        help="grid function CSV (x0[,x1],value); repeatable")
    inputs.add_argument("--indicator", nargs=2, type=float, metavar=("LO", "HI"),
                        help="indicator of the cube [LO, HI]^n")
    inputs.add_argument("--growth", help="family name or JSON descriptor; default from the config")

    p = argparse.ArgumentParser(prog="mohardy", description=__doc__.splitlines()[0], parents=[top])
    p.add_argument("--version", action="version", version=f"mohardy {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    sub.add_parser("norm", parents=[common, inputs], help="Luxembourg norms")
    w = sub.add_parser("weights", parents=[common, inputs], help="A_p^loc constants and doubling")
    w.add_argument("--p", type=float, nargs="+", default=[1.0, 2.0])
    m = sub.add_parser("maximal", parents=[common, inputs], help="maximal functions and quasi-norms")
    m.add_argument("--which", nargs="+", choices=MAXIMAL_KINDS)
    c = sub.add_parser("czd", parents=[common, inputs], help="Calderon-Zygmund decompositions")
    c.add_argument("--level", type=float, help="absolute height; default dyadic fractions of max G")
    c.add_argument("--degree", type=int)
    c.add_argument("--separation", type=float, help="Whitney separation constant")
    sub.add_parser("atoms", parents=[common, inputs], help="atomic decompositions")
    sub.add_parser("bmo", parents=[common, inputs], help="bmo_phi norms")
    r = sub.add_parser("riesz", parents=[common, inputs], help="local Riesz transform")
    r.add_argument("--direction", type=int)
    s = sub.add_parser("psdo", parents=[common, inputs], help="pseudo-differential operator")
    s.add_argument("--symbol", choices=("smoothing", "identity"), default="smoothing")
    s.add_argument("--amplitude", type=float)
    v = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    v.add_argument("--only", type=int, nargs="+", metavar="N", help="run only these criteria")
    v.add_argument("--no-determinism", action="store_true", help="skip the second run")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"mohardy: config error: {exc}", file=sys.stderr)
        return USAGE
    except MoHardyError as exc:
        print(f"mohardy: {type(exc).__name__}: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
