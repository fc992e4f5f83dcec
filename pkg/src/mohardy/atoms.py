"""Atoms, the Lambda_q quasi-norm and the level-set atomic decomposition.

Atoms are stored normalized, ``||a||_{L^q_phi(Q)} = ||chi_Q||^{-1}``, with
the multiple kept in ``scale``; the summand is ``scale * a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .czd import (CZDecomposition, _basis, _overlap, _sub, cz_decompose, monomial_exponents,
                  project_patch, resolve_mask)
from .errors import DomainError, IncompleteDecompositionError, PreconditionError
from .grid import Cube, Grid, GridFunction
from .growth import GrowthFunction, cube_nodes
from .maximal import MaximalParams, maximal_function
from .norms import chi_norm, default_t_samples, lq_phi_norm, solve_modular

__all__ = [
    "Atom",
    "AtomicDecomposition",
    "Validation",
    "validate_atom",
    "make_atom",
    "lambda_q",
    "atomic_decompose",
    "level_pieces",
    "LevelPieces",
    "reconstruct",
    "finite_atomic_norm",
    "split_cube",
]


@dataclass(frozen=True, eq=False)
class Atom:
    """Normalized atom ``values`` with multiple ``scale``.

    ``kind`` is ``"cube"`` or ``"single"``; single atoms have ``cube=None``
    and use the grid box in place of the whole space.
    """

    kind: str
    values: GridFunction
    q: float = math.inf
    s: int = 0
    scale: float = 1.0
    cube: Cube | None = None
    level: int | None = None
    index: int | None = None
    moments_required: bool | None = None

    def __post_init__(self):
        if self.kind not in ("cube", "single"):
            raise DomainError(f"unknown atom kind {self.kind!r}")
        if self.kind == "cube" and self.cube is None:
            raise DomainError("cube atoms need a cube")

    @property
    def region(self) -> Cube:
        return self.cube if self.cube is not None else self.values.grid.bounding_cube

    @property
    def needs_moments(self) -> bool:
        if self.moments_required is not None:
            return self.moments_required
        return self.kind == "cube" and self.cube.side < 1

    def scaled(self) -> np.ndarray:
        return self.scale * np.real(self.values.values)

    def norm(self, phi: GrowthFunction) -> float:
        """``||scale * a||_{L^q_phi(Q)}``."""
        return self.scale * lq_phi_norm(self.values, self.cube, self.q, phi)


@dataclass(frozen=True)
class Validation:
    valid: bool
    violations: list = field(default_factory=list)


def _chi(Q: Cube, phi: GrowthFunction, grid: Grid) -> float:
    return chi_norm(Q, phi, grid.spacing)


def validate_atom(a: Atom, phi: GrowthFunction, moment_tol: float = 1e-8,
                  norm_tol: float = 1e-9) -> Validation:
    """Check support, the norm bound and vanishing moments; never raises."""
    viol = []
    g = a.values.grid
    v = np.real(a.values.values)
    try:
        if a.kind == "cube":
            inside = np.zeros(g.shape, dtype=bool)
            inside[g.index_box(a.cube)] = True
            leak = float(np.max(np.abs(v[~inside]))) if np.any(~inside) else 0.0
            if leak > 0:
                viol.append(("support", leak))
                return Validation(False, viol)
        Q = a.region
        nrm = lq_phi_norm(a.values, a.cube, a.q, phi)
        bound = 1.0 / _chi(Q, phi, g)
        if nrm > bound * (1 + norm_tol):
            viol.append(("norm", nrm / bound - 1))
        if a.kind == "cube" and a.cube.side < 1:
            n = g.dimension
            u = (g.coordinates() - np.asarray(a.cube.center)) / a.cube.side
            box = g.index_box(a.cube)
            B = _basis(u[box].reshape(-1, n), monomial_exponents(n, a.s))
            w = v[box].ravel()
            scale = max(float(np.sum(np.abs(w))), 1e-300)
            defect = float(np.max(np.abs(w @ B))) / scale
            if defect > moment_tol:
                viol.append(("moments", defect))
    except Exception as exc:  # validation reports, it does not throw
        viol.append(("error", repr(exc)))
    return Validation(not viol, viol)


def make_atom(values: np.ndarray | GridFunction, grid: Grid, cube: Cube | None, phi: GrowthFunction,
              q: float = math.inf, s: int = 0, **meta) -> Atom | None:
    """Normalize ``values`` into an atom on ``cube``; ``None`` if it vanishes."""
    gf = values if isinstance(values, GridFunction) else GridFunction(grid, values)
    kind = "cube" if cube is not None else "single"
    nrm = lq_phi_norm(gf, cube, q, phi)
    if nrm == 0:
        return None
    chi = _chi(cube if cube is not None else grid.bounding_cube, phi, grid)
    scale = nrm * chi
    return Atom(kind, gf / scale, q, s, scale, cube, **meta)


# -- Lambda_q ------------------------------------------------------------------


def _modular_fn(atoms: Sequence[Atom], phi: GrowthFunction):
    """``lam -> sum_i phi(Q_i, ||b_i|| / lam)`` vectorized over atoms."""
    if not atoms:
        return lambda lam: 0.0, 0.0
    g = atoms[0].values.grid
    norms = np.array([a.norm(phi) for a in atoms])
    if phi.orlicz is not None:
        W = np.array([a.region.volume if phi.weight is None else phi.weight_integral(a.region, g.spacing)
                      for a in atoms])
        Phi = phi.orlicz
        return (lambda lam: float(np.dot(W, Phi(norms / lam)))), float(norms.max())
    pts, vols, idx = [], [], []
    for i, a in enumerate(atoms):
        p, v = cube_nodes(a.region, g.spacing)
        pts.append(p)
        vols.append(np.full(len(p), v))
        idx.append(np.full(len(p), i))
    pts = np.concatenate(pts)
    vols = np.concatenate(vols)
    idx = np.concatenate(idx)
    nn = norms[idx]
    return (lambda lam: float(np.dot(vols, phi(pts, nn / lam)))), float(norms.max())


def lambda_q(atoms: Sequence[Atom], phi: GrowthFunction, single: Atom | None = None,
             tol: float = 1e-10) -> float:
    """``inf{lam : sum_i phi(Q_i, ||b_i||/lam) + phi(box, ||b_0||/lam) <= 1}``."""
    allatoms = list(atoms) + ([single] if single is not None else [])
    if not allatoms:
        return 0.0
    M, scale = _modular_fn(allatoms, phi)
    if scale == 0:
        return 0.0
    return solve_modular(M, scale, tol).norm


# -- decomposition -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AtomicDecomposition:
    atoms: list[Atom]
    single_atom: Atom | None
    lambda_q: float
    residual: GridFunction
    levels: tuple[int, int] = (0, 0)
    constants: dict = field(default_factory=dict)
    decompositions: list = field(default_factory=list, repr=False)

    def __len__(self):
        return len(self.atoms) + (self.single_atom is not None)


def reconstruct(d: AtomicDecomposition | Sequence[Atom], grid: Grid | None = None) -> GridFunction:
    """``sum_i scale_i a_i`` plus the single atom."""
    if isinstance(d, AtomicDecomposition):
        atoms = list(d.atoms) + ([d.single_atom] if d.single_atom is not None else [])
        grid = d.residual.grid
    else:
        atoms = list(d)
        if grid is None:
            if not atoms:
                raise DomainError("need a grid to reconstruct an empty family")
            grid = atoms[0].values.grid
    out = np.zeros(grid.shape)
    for a in atoms:
        out += a.scaled()
    return GridFunction(grid, out)


def _support_cube(grid: Grid, arr: np.ndarray) -> Cube | None:
    nz = np.argwhere(arr != 0)
    if len(nz) == 0:
        return None
    lo, hi = nz.min(axis=0), nz.max(axis=0) + 1
    k = int(np.max(hi - lo))
    h = grid.spacing
    center = np.asarray(grid.origin) + (lo + hi) / 2 * h
    return Cube(center, k * h)


@dataclass(frozen=True, eq=False)
class LevelPieces:
    """The unnormalized pieces ``h_i^k`` and the bottom good part.

    Independent of the growth function, so one run serves many of them.
    """

    grid: Grid
    pieces: list  # (level, index, values, cube, moments_required)
    bottom: np.ndarray
    levels: tuple[int, int]
    degree: int
    constants: dict
    decompositions: list = field(default_factory=list, repr=False)


def _level_range(G: np.ndarray):
    gmin, gmax = float(G.min()), float(G.max())
    if gmax <= 0:
        return None, None
    k1 = int(math.ceil(math.log2(gmax)))
    k0 = int(math.ceil(math.log2(gmin))) if gmin > 0 else None
    return k0, k1


DEFAULT_DEPTH = 40


def level_pieces(f: GridFunction, maximal: GridFunction, s: int,
                 k_range: tuple[int, int] | None = None, separation: float | None = None,
                 min_cells: int = 8, drop_tol: float = 1e-13,
                 keep_levels: bool = False) -> LevelPieces:
    """Run the CZ decompositions at heights ``2^k`` and form the pieces.

    ``h_i^k = b_i^k - sum_j b_j^{k+1} zeta_i^k + sum_j P_{ij} zeta_j^{k+1}``
    where ``P_{ij}`` projects ``(f - P_j^{k+1}) zeta_i^k`` in
    ``L^2(zeta_j^{k+1})``; the last sum runs over small next-level cubes.
    The default level range is the ``DEFAULT_DEPTH`` octaves below the top
    level, raised to the infimum level and then to the first level whose
    resolved superlevel set is proper.  Pieces with sup at most
    ``drop_tol * max|f|`` are round-off and are left out.
    """
    g = f.grid
    n = g.dimension
    fv = np.real(f.values).astype(float)
    G = maximal.values
    k0, k1 = _level_range(G)
    if k1 is None:
        return LevelPieces(g, [], np.zeros(g.shape), (0, 0), s, {})
    lo_k, hi_k = k_range if k_range is not None else (k1 - DEFAULT_DEPTH, k1)
    if hi_k < k1:
        raise IncompleteDecompositionError(
            f"level range tops out at {hi_k} but the superlevel sets are empty only from {k1}",
            residual=f)
    k_start = lo_k if k0 is None else max(k0, lo_k)
    while k_start < k1 and resolve_mask(G > 2.0 ** k_start, min_cells).all():
        k_start += 1
    if k_start >= k1:
        return LevelPieces(g, [], fv.copy(), (k_start, k1), s, {"C10": 0.0})

    czs = [cz_decompose(f, 2.0 ** k, s, maximal, separation, min_cells) for k in range(k_start, k1)]
    fmax = float(np.abs(fv).max())
    pieces = []
    c10 = cross_c = dropped = 0.0
    nesting_ok = True
    for idx, k in enumerate(range(k_start, k1)):
        cur = czs[idx]
        nxt = czs[idx + 1] if idx + 1 < len(czs) else None
        if nxt is not None and len(nxt):
            jlo = np.array([p.lo for p in nxt.partition])
            jhi = jlo + np.array([p.values.shape for p in nxt.partition])
        for i, (zi, bi, Qi) in enumerate(zip(cur.partition, cur.bad_parts, cur.cover.cubes)):
            acc = np.zeros(g.shape)
            bi.add_into(acc)
            large_feed = False
            if nxt is not None and len(nxt):
                ilo = np.array(zi.lo)
                ihi = ilo + np.array(zi.values.shape)
                hit = np.nonzero(np.all((jlo < ihi) & (jhi > ilo), axis=1))[0]
                for j in hit:
                    zj, bj, Pj, Qj = nxt.partition[j], nxt.bad_parts[j], nxt.polynomials[j], nxt.cover.cubes[j]
                    lo, hi = _overlap(zi, zj)
                    zi_o = _sub(zi, lo, hi)
                    if not np.any(zi_o):
                        continue
                    if Qj.side > 2 ** 4 * math.sqrt(n) * Qi.side * (1 + 1e-12):
                        nesting_ok = False
                    sl = tuple(slice(a, b) for a, b in zip(lo, hi))
                    acc[sl] -= _sub(bj, lo, hi) * zi_o
                    if Pj is None:
                        large_feed = True
                        continue
                    cj = zj.coordinates()
                    zi_full = np.zeros(zj.values.shape)
                    zi_full[tuple(slice(a - b, c - b) for a, c, b in zip(lo, hi, zj.lo))] = zi_o
                    data = (zj.take(fv) - Pj(cj)) * zi_full
                    Pij = project_patch(data, zj.values, cj, s, Qj.center, Qj.side / 2)
                    corr = Pij(cj) * zj.values
                    cross_c = max(cross_c, float(np.max(np.abs(corr))) / 2.0 ** (k + 1))
                    acc[zj.slices] += corr
            sup = float(np.max(np.abs(acc)))
            if sup <= drop_tol * fmax:
                dropped = max(dropped, sup)
                continue
            Q = _support_cube(g, acc)
            moments = Q.side < 1 and not large_feed and Qi.side < 1
            if not moments and Q.side < 1:
                Q = Cube(Q.center, 1.0)
            c10 = max(c10, sup / 2.0 ** k)
            pieces.append((k, i, acc, Q, moments))
    consts = {"C10": c10, "cross_projection": cross_c, "nesting_ok": nesting_ok,
              "dropped_sup": dropped, "C1": max(cz.c1() for cz in czs),
              "single_atom_sup": float(np.max(np.abs(czs[0].good.values))) / 2.0 ** k_start}
    return LevelPieces(g, pieces, czs[0].good.values.copy(), (k_start, k1), s, consts,
                       czs if keep_levels else [])


def atomic_decompose(f: GridFunction, phi: GrowthFunction, s: int | None = None,
                     k_range: tuple[int, int] | None = None, params: MaximalParams | None = None,
                     maximal: GridFunction | None = None, q: float = math.inf,
                     separation: float | None = None, min_cells: int = 8,
                     keep_levels: bool = False, pieces: LevelPieces | None = None) -> AtomicDecomposition:
    """Level-set decomposition ``f = sum_k sum_i h_i^k + g^{k_0}`` as atoms.

    Each piece is normalized on the bounding cube of its support; that cube
    is grown to side 1 when a large next-level cube feeds the piece (no
    moment condition is then needed).  The bottom good part becomes the
    single atom.  Pass ``pieces`` from :func:`level_pieces` to reuse them.
    """
    g = f.grid
    fv = np.real(f.values).astype(float)
    if s is None:
        s = phi.critical_degree(g.dimension)
    if pieces is None:
        if maximal is None:
            maximal = maximal_function(f, "grand", params)
        pieces = level_pieces(f, maximal, s, k_range, separation, min_cells, keep_levels=keep_levels)
    atoms = []
    for k, i, vals, Q, moments in pieces.pieces:
        a = make_atom(vals, g, Q, phi, q, pieces.degree, level=k, index=i, moments_required=moments)
        if a is not None:
            atoms.append(a)
    single = make_atom(pieces.bottom, g, None, phi, q, pieces.degree, level=pieces.levels[0])
    rec = np.zeros(g.shape)
    for a in atoms:
        rec += a.scaled()
    if single is not None:
        rec += single.scaled()
    lam = lambda_q(atoms, phi, single)
    return AtomicDecomposition(atoms, single, lam, GridFunction(g, fv - rec), pieces.levels,
                               dict(pieces.constants), pieces.decompositions)


def finite_atomic_norm(f: GridFunction, candidates: Iterable, phi: GrowthFunction,
                       tol: float = 1e-6) -> float:
    """Least ``Lambda_q`` among candidate decompositions that reproduce ``f``."""
    best = math.inf
    scale = max(f.max_abs(), 1e-300)
    for c in candidates:
        if isinstance(c, AtomicDecomposition):
            atoms, single = c.atoms, c.single_atom
        else:
            atoms, single = list(c), None
        rec = reconstruct(list(atoms) + ([single] if single is not None else []), f.grid)
        if np.max(np.abs(rec.values - np.real(f.values))) > tol * scale:
            continue
        best = min(best, lambda_q(atoms, phi, single))
    if not math.isfinite(best):
        raise PreconditionError("no candidate reproduces the function")
    return best


def split_cube(Q: Cube) -> list[Cube]:
    """Split a cube of side > 2 into congruent pieces with side in [1, 2]."""
    if Q.side <= 2:
        return [Q]
    m = int(math.ceil(Q.side / 2))
    side = Q.side / m
    n = Q.dimension
    import itertools
    lo = Q.lo
    out = []
    for idx in itertools.product(range(m), repeat=n):
        c = lo + (np.array(idx) + 0.5) * side
        out.append(Cube(c, side))
    return out
