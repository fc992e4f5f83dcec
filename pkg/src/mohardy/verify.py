"""The verification suite behind ``mohardy verify``.

Each criterion returns a :class:`Check` plus CSV tables.  CSV cells are
written with ``repr`` so that two runs with one config can be compared
byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .atoms import atomic_decompose, level_pieces, validate_atom
from .bmo import (PhiIncreasing, orlicz_growth, orlicz_type_check, phi0_from_psi, psi_from_phi)
from .config import ExperimentConfig
from .corpus import atom_function, generate_corpus, shipped_atom_descriptors, shipped_atom_functions
from .czd import cz_decompose, resolve_mask, whitney
from .errors import MoHardyError, PreconditionError
from .grid import Cube, GridFunction
from .growth import builtin_family
from .maximal import DICTIONARY_VERSION, maximal_function
from .norms import chi_norm, luxembourg_norm, modular
from .operators import CUTOFF_VERSION, LocalRieszKernel, Symbol, boundedness_experiment, psdo_apply, \
    psdo_operator, riesz_local, riesz_operator
from .weights import a_p_loc_constant, default_lattice

__all__ = ["Check", "VerificationReport", "run_verification", "CRITERIA", "write_csv"]

log = logging.getLogger(__name__)

EQUIVALENCE_SET = ("vertical", "vertical_nt", "nontangential", "grand0", "grand")


@dataclass
class Check:
    """One criterion's outcome; ``witness`` names the worst input on failure."""

    number: int
    name: str
    passed: bool
    detail: str
    constants: dict = field(default_factory=dict)
    witness: str | None = None

    def line(self) -> str:
        return f"criterion {self.number:2d} {self.name}: {'PASS' if self.passed else 'FAIL'} ({self.detail})"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "status": "pass" if self.passed else "fail",
                "detail": self.detail, "constants": self.constants, "witness": self.witness}


@dataclass
class VerificationReport:
    suite: str
    checks: list
    provenance: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def constants(self) -> dict:
        return {f"{c.number}:{k}": v for c in self.checks for k, v in c.constants.items()}

    def to_dict(self) -> dict:
        return {"suite": self.suite, "passed": self.passed,
                "checks": [c.to_dict() for c in self.checks],
                "constants": self.constants, "provenance": self.provenance}


# -- helpers -----------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: list, rows: list) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    path.write_text(buf.getvalue())


def _doubled(spec: dict) -> dict:
    out = {}
    for k, v in spec.items():
        if isinstance(v, dict):
            v = dict(v)
            v["count"] = 2 * int(v.get("count", 0))
            out[k] = v
        else:
            out[k] = 2 * int(v)
    return out


def _counts(spec: dict) -> dict:
    return {k.replace("-", "_"): int(v["count"] if isinstance(v, dict) else v) for k, v in spec.items()}


class _Context:
    """Shared state for one verification run: grid, corpora and caches."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.grid = cfg.grid
        self.params = cfg.maximal
        spec = cfg.corpus_spec
        self.doubled = generate_corpus(cfg.seed, _doubled(spec), self.grid)
        want = _counts(spec)
        seen: dict = {}
        self.corpus = []
        for it in self.doubled:
            seen[it.family] = seen.get(it.family, 0) + 1
            if seen[it.family] <= want.get(it.family, 0):
                self.corpus.append(it)
        self.families = cfg.families
        self.growth = cfg.growth
        self._max: dict = {}
        self._pieces: dict = {}
        self.lambdas: dict = {}
        self.degree = max(phi.critical_degree(self.grid.dimension) for phi in self.families + [self.growth])

    def maximal(self, f: GridFunction, which: str = "grand") -> GridFunction:
        key = (id(f), which)
        if key not in self._max:
            self._max[key] = maximal_function(f, which, self.params)
        return self._max[key]

    def pieces(self, f: GridFunction):
        if id(f) not in self._pieces:
            czd = self.cfg.section("czd")
            depth = int(self.cfg.section("atoms")["depth"])
            sec = self.cfg.section("atoms")
            G = self.maximal(f)
            k1 = int(math.ceil(math.log2(float(G.values.max()))))
            self._pieces[id(f)] = level_pieces(f, G, self.degree, (k1 - depth, k1), sec["separation"],
                                               int(czd["min_cells"]))
        return self._pieces[id(f)]


# -- criteria ----------------------------------------------------------------------


def c1_luxembourg(ctx: _Context):
    g = ctx.grid
    items = ctx.corpus[:20]
    rows, worst, wit = [], 0.0, None
    for p in (0.5, 1.0, 2.0):
        phi = builtin_family("power", {"p": p})
        for i, it in enumerate(items):
            f = it.function
            nrm = luxembourg_norm(phi, f).norm
            exact = float(np.sum(np.abs(f.values) ** p) * g.cell_volume) ** (1 / p)
            rel = abs(nrm - exact) / exact
            rows.append((p, i, it.family, nrm, exact, rel))
            if rel > worst:
                worst, wit = rel, f"p={p} item={i} {it.tag}"
    ok = worst <= 1e-6 and len(items) == 20
    detail = f"{len(items)} functions (need 20), worst relative error {worst:.3g} (tol 1e-6)"
    if len(items) < 20:
        wit = f"corpus has only {len(items)} functions"
    return Check(1, "Luxembourg exactness", ok, detail, {"worst_relative_error": worst},
                 None if ok else wit), \
        {"c01_luxembourg.csv": (["p", "item", "family", "norm", "closed_form", "relative_error"], rows)}


def c2_modular(ctx: _Context):
    rows, lo, hi, wit = [], math.inf, -math.inf, None
    for phi in ctx.families:
        if not phi.strictly_increasing:
            continue
        for i, it in enumerate(ctx.corpus):
            nrm = luxembourg_norm(phi, it.function).norm
            M = modular(phi, it.function, nrm)
            rows.append((phi.name, i, it.family, nrm, M))
            if M < lo or M > hi:
                if not 0.999 <= M <= 1.001:
                    wit = f"{phi.name} item={i} {it.tag}"
                lo, hi = min(lo, M), max(hi, M)
    ok = 0.999 <= lo and hi <= 1.001
    return Check(2, "modular at the norm", ok, f"modular in [{lo:.6f}, {hi:.6f}] (band [0.999, 1.001])",
                 {"modular_min": lo, "modular_max": hi}, None if ok else wit), \
        {"c02_modular.csv": (["family", "item", "corpus_family", "norm", "modular"], rows)}


def c3_weights(ctx: _Context):
    g = ctx.grid
    lat = default_lattice(g, 1.0, int(ctx.cfg.section("lattice")["stride"]))
    rows = []
    one = GridFunction(g, np.ones(g.shape))
    unit_err = 0.0
    for p in (1.0, 2.0, 4.0):
        a = a_p_loc_constant(one, p, lat)
        unit_err = max(unit_err, abs(a - 1))
        rows.append(("one", p, a))
    low, wit = math.inf, None
    exact_scaling, rel_scaling = True, 0.0
    weights = [(phi.name, phi) for phi in ctx.families]
    weights += [(f"1+|f{i}|", GridFunction(g, 1.0 + np.abs(it.function.values)))
                for i, it in enumerate(ctx.corpus)]
    for name, w in weights:
        for p in (1.0, 2.0):
            a = a_p_loc_constant(w, p, lat)
            rows.append((name, p, a))
            if a < low:
                low, wit = a, f"{name} p={p}"
            if isinstance(w, GridFunction):
                for c in (8.0, 2.0 ** -5):
                    exact_scaling &= a_p_loc_constant(w * c, p, lat) == a
                rel_scaling = max(rel_scaling, abs(a_p_loc_constant(w * 3.7, p, lat) / a - 1))
    ok = unit_err <= 1e-12 and low >= 0.99 and exact_scaling and rel_scaling <= 1e-12
    detail = (f"|A_p(1)-1| = {unit_err:.3g}, min constant {low:.6f}, "
              f"power-of-two scaling exact: {exact_scaling}, scaling by 3.7 drift {rel_scaling:.3g}")
    return Check(3, "weight sanity", ok, detail,
                 {"unit_error": unit_err, "min_constant": low, "scaling_drift": rel_scaling},
                 None if ok else wit), {"c03_weights.csv": (["weight", "p", "constant"], rows)}


def _independent_gaps(mask: np.ndarray, starts: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """Chessboard gap from each cube to the complement (box exterior included), by brute force."""
    n = mask.ndim
    padded = np.pad(mask, 1, constant_values=False)
    comp = np.argwhere(~padded) - 1
    out = np.empty(len(sizes))
    for i, (s, k) in enumerate(zip(starts, sizes)):
        lo = np.asarray(s)
        hi = lo + k - 1
        gap = np.maximum(np.maximum(lo - comp - 1, comp - hi - 1), 0).max(axis=1)
        out[i] = gap.min()
    return out


def c4_whitney(ctx: _Context):
    g = ctx.grid
    czd = ctx.cfg.section("czd")
    min_cells = int(czd["min_cells"])
    seps = [("theoretical", czd["separation"]), ("classical", czd["classical_separation"])]
    want = int(ctx.cfg.section("whitney")["sets"])
    rng = np.random.default_rng([ctx.cfg.seed, 104])
    rows = []
    ok, wit = True, None
    worst_L = 0
    flagged = {k: [] for k, _ in seps}
    done = attempts = 0
    while done < want and attempts < 20 * want:
        attempts += 1
        it = ctx.corpus[attempts % len(ctx.corpus)]
        G = ctx.maximal(it.function).values
        lam = float(G.max()) * 2.0 ** -rng.uniform(0.5, 6.0)
        mask = G > lam
        if not mask.any() or resolve_mask(mask, min_cells).all():
            continue
        for label, sep in seps:
            cover = whitney(mask, g, sep, min_cells, czd["dilation"])
            sand = cover.sandwich()
            consistent = bool(np.all(sand | cover.flags))
            gaps = _independent_gaps(mask, cover.starts, cover.sizes) * g.spacing
            inside = np.array([mask[tuple(slice(a, a + k) for a in s)].all()
                               for s, k in zip(cover.starts, cover.sizes)])
            dist_ok = bool(np.all(np.where(inside, np.abs(gaps - cover.dists) <= 1e-12, True)))
            covers = cover.covers()
            L = cover.overlap()
            worst_L = max(worst_L, L)
            flagged[label].append(float(cover.flags.mean()))
            good = consistent and dist_ok and covers and L <= 12
            rows.append((done, label, it.family, lam, len(cover), int(cover.flags.sum()), consistent,
                         dist_ok, covers, L))
            if not good and ok:
                ok, wit = False, f"set {done} ({label}) from {it.tag} at level {lam!r}"
        done += 1
    ok = ok and done == want
    consts = {"overlap_max": worst_L}
    consts.update({f"flagged_fraction_{k}": (float(np.mean(v)) if v else 0.0) for k, v in flagged.items()})
    detail = (f"{done} sets, sandwich-or-flagged, independent distances and coverage hold: {ok}; "
              f"L = {worst_L}; flagged fraction theoretical {consts['flagged_fraction_theoretical']:.3f}, "
              f"classical {consts['flagged_fraction_classical']:.3f}")
    return Check(4, "Whitney correctness", ok, detail, consts, wit), \
        {"c04_whitney.csv": (["set", "separation", "family", "level", "cubes", "flagged", "consistent",
                              "distances", "covers", "overlap"], rows)}


def _cz_suite(ctx: _Context, items, separation, rows, label):
    czd = ctx.cfg.section("czd")
    levels = int(czd["levels"])
    s = ctx.degree
    worst_rec = worst_mom = c1 = 0.0
    wit = None
    for i, it in enumerate(items):
        f = it.function
        G = ctx.maximal(f)
        fmax = float(np.max(np.abs(f.values)))
        for k in range(1, levels + 1):
            lam = float(G.values.max()) * 2.0 ** -k
            try:
                cz = cz_decompose(f, lam, s, G, separation, int(czd["min_cells"]), czd["dilation"])
            except PreconditionError:
                rows.append((label, i, it.family, k, lam, "skipped", "", "", ""))
                continue
            rec = cz.reconstruction_error() / fmax
            mom = cz.moment_errors()
            mom = float(mom.max()) if mom.size else 0.0
            c = cz.c1()
            rows.append((label, i, it.family, k, lam, len(cz), rec, mom, c))
            if (rec > worst_rec and rec > 1e-8) or (mom > worst_mom and mom > 1e-8):
                wit = f"{it.tag} level 2^-{k} max G"
            worst_rec, worst_mom, c1 = max(worst_rec, rec), max(worst_mom, mom), max(c1, c)
    return worst_rec, worst_mom, c1, wit


def c5_cz(ctx: _Context):
    rows = []
    sep = ctx.cfg.section("czd")["separation"]
    rec, mom, c1, wit = _cz_suite(ctx, ctx.corpus, sep, rows, "corpus")
    rec2, mom2, c1d, wit2 = _cz_suite(ctx, ctx.doubled, sep, rows, "doubled")
    drift = c1d / c1 if c1 > 0 else (1.0 if c1d == 0 else math.inf)
    cl_rows: list = []
    _, _, c1_classical, _ = _cz_suite(ctx, ctx.corpus, ctx.cfg.section("czd")["classical_separation"],
                                      cl_rows, "classical")
    rec, mom = max(rec, rec2), max(mom, mom2)
    ok = rec <= 1e-8 and mom <= 1e-8 and drift < 2
    detail = (f"reconstruction {rec:.3g}*max|f|, moments {mom:.3g}, C1 = {c1:.4g} "
              f"(doubled {c1d:.4g}, drift {drift:.3f}); classical-separation C1 = {c1_classical:.4g}")
    consts = {"reconstruction": rec, "moments": mom, "C1": c1, "C1_doubled": c1d, "C1_drift": drift,
              "C1_classical": c1_classical}
    return Check(5, "CZ reconstruction", ok, detail, consts, None if ok else (wit or wit2)), \
        {"c05_cz.csv": (["corpus", "item", "family", "k", "level", "cubes", "reconstruction", "moments",
                         "C1"], rows + cl_rows)}


def c6_atoms(ctx: _Context):
    rows = []
    worst_res, invalid, wit = 0.0, 0, None
    c10 = {"corpus": 0.0, "doubled": 0.0}
    base = {id(it.function) for it in ctx.corpus}
    for label, items in (("corpus", ctx.corpus), ("doubled", ctx.doubled)):
        for i, it in enumerate(items):
            f = it.function
            pcs = ctx.pieces(f)
            c10[label] = max(c10[label], float(pcs.constants.get("C10", 0.0)))
            if label == "doubled" and id(f) in base:
                continue
            fmax = float(np.max(np.abs(f.values)))
            for phi in ctx.families:
                dec = atomic_decompose(f, phi, ctx.degree, pieces=pcs)
                res = float(np.max(np.abs(dec.residual.values))) / fmax
                bad = [a for a in dec.atoms + ([dec.single_atom] if dec.single_atom else [])
                       if not validate_atom(a, phi).valid]
                ctx.lambdas[(id(f), phi.name)] = dec.lambda_q
                rows.append((label, i, it.family, phi.name, len(dec.atoms), res, len(bad), dec.lambda_q))
                if res > worst_res or bad:
                    wit = f"{it.tag} with {phi.name}"
                worst_res = max(worst_res, res)
                invalid += len(bad)
    drift = c10["doubled"] / c10["corpus"] if c10["corpus"] > 0 else math.inf
    ok = worst_res <= 1e-6 and invalid == 0 and drift < 2
    detail = (f"residual {worst_res:.3g}*max|f|, invalid atoms {invalid}, C10 = {c10['corpus']:.4g} "
              f"(doubled {c10['doubled']:.4g}, drift {drift:.3f})")
    return Check(6, "atomic round trip", ok, detail,
                 {"residual": worst_res, "invalid_atoms": invalid, "C10": c10["corpus"],
                  "C10_doubled": c10["doubled"], "C10_drift": drift}, None if ok else wit), \
        {"c06_atoms.csv": (["corpus", "item", "family", "growth", "atoms", "residual", "invalid",
                            "lambda_inf"], rows)}


def c7_equivalences(ctx: _Context):
    rows_a, rows_b = [], []
    Ka, Kb, pair_of = {}, {}, {}
    m = len(EQUIVALENCE_SET)
    for phi in ctx.families:
        table, ratios = [], []
        for i, it in enumerate(ctx.corpus):
            f = it.function
            norms = [luxembourg_norm(phi, ctx.maximal(f, w)).norm for w in EQUIVALENCE_SET]
            table.append(norms)
            rows_a.append((phi.name, i, it.family, *norms))
            lam = ctx.lambdas.get((id(f), phi.name))
            if lam is None:
                lam = atomic_decompose(f, phi, ctx.degree, pieces=ctx.pieces(f)).lambda_q
            ratios.append(norms[EQUIVALENCE_SET.index("grand")] / lam)
            rows_b.append((phi.name, i, it.family, norms[-1], lam, ratios[-1]))
        T = np.array(table)
        worst, pair = 1.0, None
        for a in range(m):
            for b in range(a + 1, m):
                r = T[:, a] / T[:, b]
                band = float(r.max() / r.min())
                if band > worst:
                    worst, pair = band, f"{EQUIVALENCE_SET[a]}/{EQUIVALENCE_SET[b]}"
        Ka[phi.name], pair_of[phi.name] = worst, pair
        Kb[phi.name] = max(ratios) / min(ratios)
    ka, kb = max(Ka.values()), max(Kb.values())
    ok = ka < 100 and kb < 100
    wa = max(Ka, key=Ka.get)
    wb = max(Kb, key=Kb.get)
    detail = (f"maximal-characterization band K = {ka:.3g} ({wa}, {pair_of[wa]}); "
              f"h_phi vs Lambda_inf band K = {kb:.3g} ({wb})")
    consts = {f"K_maximal[{k}]": v for k, v in Ka.items()}
    consts.update({f"K_atomic[{k}]": v for k, v in Kb.items()})
    witness = None
    if ka >= 100:
        witness = f"{wa} pair {pair_of[wa]}"
    elif kb >= 100:
        witness = wb
    return Check(7, "norm equivalence bands", ok, detail, consts, witness), \
        {"c07a_maximal.csv": (["growth", "item", "family", *EQUIVALENCE_SET], rows_a),
         "c07b_atomic.csv": (["growth", "item", "family", "h_phi", "lambda_inf", "ratio"], rows_b)}


def c8_identities(ctx: _Context):
    rows = []
    ks = range(-8, 5)
    bands = {}
    one = PhiIncreasing.power(0.0)
    psi1 = psi_from_phi(one)
    theta = builtin_family("theta")
    for n in (1, 2):
        a, b = [], []
        for k in ks:
            l = 2.0 ** k
            v = l ** n
            a.append(1 / float(psi1(l)) / math.log(math.e + 1 / v))
            b.append(chi_norm(Cube(np.zeros(n), l), theta) / (v / math.log(math.e + 1 / v)))
            rows.append(("bands", n, k, a[-1], b[-1], ""))
        bands[f"psi_band_n{n}"] = max(a) / min(a)
        bands[f"theta_band_n{n}"] = max(b) / min(b)
    worst_id = 0.0
    types_ok = True
    for phi in (PhiIncreasing.power(1.0), PhiIncreasing.power(0.5)):
        psi = psi_from_phi(phi)
        for n in (1, 2):
            P0 = phi0_from_psi(psi, n)
            G0 = orlicz_growth(P0)
            for k in ks:
                l = 2.0 ** k
                err = chi_norm(Cube(np.zeros(n), l), G0) / (float(psi(l)) * l ** n) - 1
                worst_id = max(worst_id, abs(err))
                rows.append((phi.name, n, k, "", "", err))
            lo = orlicz_type_check(P0, n / (n + 1), "lower")
            up = orlicz_type_check(P0, 1.0, "upper")
            types_ok &= lo.holds and up.holds
            rows.append((phi.name, n, "type", lo.worst_constant, up.worst_constant, ""))
    widest = max(bands.values())
    ok = widest < 10 and worst_id <= 0.02 and types_ok
    detail = (f"band widths psi {bands['psi_band_n1']:.3f}/{bands['psi_band_n2']:.3f}, "
              f"theta {bands['theta_band_n1']:.3f}/{bands['theta_band_n2']:.3f} (< 10); "
              f"chi-norm identity error {worst_id:.3g} (<= 0.02); Phi_0 types hold: {types_ok}")
    consts = dict(bands)
    consts["identity_error"] = worst_id
    return Check(8, "psi and Phi_0 identities", ok, detail, consts), \
        {"c08_identities.csv": (["phi", "n", "k", "value_a", "value_b", "identity_error"], rows)}


def _atom_corpus(grid, doubled: bool):
    items = [f for f, _, _ in shipped_atom_functions(grid)]
    if doubled:
        for d in shipped_atom_descriptors():
            c = [-v - 0.5 for v in d["center"]]
            if grid.dimension == 2 and len(c) == 1:
                c = [c[0], c[0] / 2]
            try:
                items.append(atom_function(grid, c, d["side"], d["order"])[0])
            except MoHardyError:
                continue
    return items


def c9_operators(ctx: _Context):
    g = ctx.grid
    phi = ctx.growth
    ops = ctx.cfg.section("operators")
    j = int(ops["direction"])
    sigma = Symbol.smoothing(g.dimension, float(ops["symbol_amplitude"]))
    base, dbl = _atom_corpus(g, False), _atom_corpus(g, True)
    rows = []
    results = {}
    for name, op in (("riesz", riesz_operator(j)), ("psdo", psdo_operator(sigma))):
        r1 = boundedness_experiment(op, phi, base, "h_phi", ctx.params)
        r2 = boundedness_experiment(op, phi, dbl, "h_phi", ctx.params)
        results[name] = (r1.worst, r2.worst, r2.worst / r1.worst if r1.worst > 0 else math.inf)
        for i, r in enumerate(r2.ratios):
            rows.append((name, i, i < len(base), r))
    ident = 0.0
    smooth = [it.function for it in ctx.corpus if it.family == "random_smooth"]
    for f in smooth:
        ident = max(ident, float(np.max(np.abs(psdo_apply(Symbol.identity(g.dimension), f).values
                                                  - f.values))))
    k = LocalRieszKernel.build(g, j)
    rc = riesz_local(GridFunction(g, np.ones(g.shape)), j).values
    x = g.coordinates()
    lo, hi = np.asarray(g.origin), np.asarray(g.origin) + np.asarray(g.extent)
    interior = np.all((x - lo > 1 + g.spacing) & (hi - x > 1 + g.spacing), axis=-1)
    const_err = float(np.max(np.abs(rc[interior]))) / float(np.sum(np.abs(k.values)))
    ok = all(w1 < 100 and w2 < 100 and d < 2 for w1, w2, d in results.values()) \
        and ident <= 1e-8 and const_err <= 1e-12 and bool(smooth)
    detail = (f"riesz worst {results['riesz'][0]:.4g} (doubled {results['riesz'][1]:.4g}), "
              f"psdo worst {results['psdo'][0]:.4g} (doubled {results['psdo'][1]:.4g}); "
              f"identity error {ident:.3g}; constants -> {const_err:.3g}")
    consts = {"riesz_worst": results["riesz"][0], "riesz_worst_doubled": results["riesz"][1],
              "riesz_drift": results["riesz"][2], "psdo_worst": results["psdo"][0],
              "psdo_worst_doubled": results["psdo"][1], "psdo_drift": results["psdo"][2],
              "identity_error": ident, "riesz_constant_error": const_err}
    return Check(9, "operator boundedness", ok, detail, consts), \
        {"c09_operators.csv": (["operator", "item", "in_base_corpus", "ratio"], rows)}


CRITERIA: list[Callable] = [c1_luxembourg, c2_modular, c3_weights, c4_whitney, c5_cz, c6_atoms,
                            c7_equivalences, c8_identities, c9_operators]


def _run_once(cfg: ExperimentConfig, outdir: Path, only=None) -> list[Check]:
    outdir.mkdir(parents=True, exist_ok=True)
    ctx = _Context(cfg)
    checks = []
    for fn in CRITERIA:
        num = CRITERIA.index(fn) + 1
        if only is not None and num not in only:
            continue
        check, tables = fn(ctx)
        log.info(check.line())
        for name, (header, rows) in tables.items():
            write_csv(outdir / name, header, rows)
        checks.append(check)
    return checks


def _csv_bytes(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.glob("*.csv"))}


def run_verification(cfg: ExperimentConfig, outdir: str | Path, determinism: bool = True,
                     only=None) -> VerificationReport:
    """Run the criteria, write CSVs and ``report.json`` into ``outdir``.

    With ``determinism`` set, the suite runs a second time into a scratch
    directory and every CSV must match byte for byte.
    """
    outdir = Path(outdir)
    checks = _run_once(cfg, outdir, only)
    if determinism:
        with tempfile.TemporaryDirectory() as tmp:
            _run_once(cfg, Path(tmp), only)
            first, second = _csv_bytes(outdir), _csv_bytes(Path(tmp))
        differ = sorted(k for k in first.keys() | second.keys() if first.get(k) != second.get(k))
        ok = not differ and bool(first)
        checks.append(Check(10, "determinism", ok,
                            f"{len(first)} CSV files compared, {len(differ)} differ",
                            {"csv_files": len(first), "differing": len(differ)},
                            None if ok else ", ".join(differ)))
    report = VerificationReport("verify", checks, {
        "config_sha256": cfg.digest(),
        "dictionary_version": DICTIONARY_VERSION,
        "cutoff_version": CUTOFF_VERSION,
        "package_version": __version__,
        "seed": cfg.seed,
    })
    (outdir / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return report
