"""Whitney covers, partitions of unity, local polynomial projections and
Calderon-Zygmund decompositions on grids.

Cubes in a cover are dyadic blocks of grid cells.  The superlevel set is
first resolved to blocks of ``min_cells`` cells per side so that every
cube carries enough samples for a degree-``s`` projection; the cover then
covers this resolved set, which contains the raw one.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import DegenerateWeightError, DomainError, PreconditionError
from .grid import Cube, Grid, GridFunction

__all__ = [
    "Patch",
    "WhitneyCover",
    "whitney",
    "resolve_mask",
    "reference_bump",
    "partition_of_unity",
    "Polynomial",
    "monomial_exponents",
    "minimizing_polynomial",
    "project_patch",
    "CZDecomposition",
    "cz_decompose",
]


# -- patches -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Patch:
    """Values on the index box ``lo + [0, values.shape)`` of ``grid``."""

    grid: Grid
    lo: tuple[int, ...]
    values: np.ndarray

    @property
    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(a, a + m) for a, m in zip(self.lo, self.values.shape))

    def coordinates(self) -> np.ndarray:
        h = self.grid.spacing
        ax = [o + (a + 0.5 + np.arange(m)) * h
              for o, a, m in zip(self.grid.origin, self.lo, self.values.shape)]
        return np.stack(np.meshgrid(*ax, indexing="ij"), -1)

    def embed(self) -> np.ndarray:
        out = np.zeros(self.grid.shape, dtype=self.values.dtype)
        out[self.slices] = self.values
        return out

    def as_function(self) -> GridFunction:
        return GridFunction(self.grid, self.embed())

    def add_into(self, arr: np.ndarray, coef: float = 1.0) -> None:
        arr[self.slices] += coef * self.values

    def take(self, arr: np.ndarray) -> np.ndarray:
        return arr[self.slices]

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def _union_box(a: Patch, b: Patch):
    lo = tuple(min(x, y) for x, y in zip(a.lo, b.lo))
    hi = tuple(max(x + m, y + k) for x, m, y, k in zip(a.lo, a.values.shape, b.lo, b.values.shape))
    return lo, hi


def _overlap(a: Patch, b: Patch):
    lo = tuple(max(x, y) for x, y in zip(a.lo, b.lo))
    hi = tuple(min(x + m, y + k) for x, m, y, k in zip(a.lo, a.values.shape, b.lo, b.values.shape))
    if any(h <= l for l, h in zip(lo, hi)):
        return None
    return lo, hi


def _sub(p: Patch, lo, hi) -> np.ndarray:
    return p.values[tuple(slice(l - a, h - a) for l, h, a in zip(lo, hi, p.lo))]


# -- Whitney cover -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WhitneyCover:
    """Dyadic cover of a grid set.

    ``starts``/``sizes`` give each cube in cells.  ``flags[i]`` is set when
    cube ``i`` misses the sandwich ``c diam <= dist <= 4 c diam`` or leaves
    the raw set.  ``constants`` records the achieved ranges of
    ``dist/diam``.
    """

    grid: Grid
    mask: np.ndarray
    resolved: np.ndarray
    starts: np.ndarray
    sizes: np.ndarray
    dists: np.ndarray
    flags: np.ndarray
    separation: float
    dilation: float
    min_cells: int
    constants: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.sizes)

    @property
    def sides(self) -> np.ndarray:
        return self.sizes * self.grid.spacing

    @property
    def cubes(self) -> list[Cube]:
        return [self.grid.aligned_cube(s, k) for s, k in zip(self.starts, self.sizes)]

    @property
    def dilated_cubes(self) -> list[Cube]:
        return [c.dilate(self.dilation) for c in self.cubes]

    def coverage(self) -> np.ndarray:
        """Number of cubes containing each cell."""
        cnt = np.zeros(self.grid.shape, dtype=np.int64)
        for s, k in zip(self.starts, self.sizes):
            cnt[tuple(slice(a, a + k) for a in s)] += 1
        return cnt

    def overlap(self) -> int:
        """Largest number of dilated cubes containing one cell centre."""
        g = self.grid
        cnt = np.zeros(g.shape, dtype=np.int64)
        for c in self.dilated_cubes:
            cnt[g.index_box(c)] += 1
        return int(cnt.max()) if len(self) else 0

    def covers(self) -> bool:
        return bool(np.all(self.coverage()[self.mask] >= 1))

    def sandwich(self) -> np.ndarray:
        """Per cube: does ``c diam <= dist <= 4 c diam`` hold?"""
        diam = self.sides
        c = self.separation
        return (c * diam <= self.dists * (1 + 1e-12)) & (self.dists <= 4 * c * diam * (1 + 1e-12))


def _complement_gap(mask: np.ndarray) -> np.ndarray:
    """Chessboard gap (in cells) from each cell to the nearest complement cell.

    The box exterior counts as complement.  A complement cell has gap -1,
    a cell touching the complement gap 0.
    """
    padded = np.pad(mask, 1, constant_values=False)
    d = ndimage.distance_transform_cdt(padded, metric="chessboard").astype(np.int64)
    d = d[tuple(slice(1, -1) for _ in mask.shape)]
    return d - 1


def resolve_mask(mask: np.ndarray, min_cells: int) -> np.ndarray:
    """Union of the aligned ``min_cells``-blocks that meet ``mask``."""
    n = mask.ndim
    N = mask.shape[0]
    nb = N // min_cells
    blocks = mask.reshape(sum(([nb, min_cells] for _ in range(n)), [])) \
        .any(axis=tuple(range(1, 2 * n, 2)))
    for ax in range(n):
        blocks = np.repeat(blocks, min_cells, axis=ax)
    return blocks


def whitney(mask, grid: Grid | None = None, separation: float | None = None,
            min_cells: int = 8, dilation: float | None = None) -> WhitneyCover:
    """Top-down dyadic Whitney cover of a grid set.

    A dyadic block inside the resolved set is accepted as soon as
    ``separation * diam <= dist(block, complement)``; otherwise it is split.
    Blocks of ``min_cells`` cells are always accepted and flagged when the
    sandwich fails.  ``separation`` defaults to ``2^{6+n}`` and ``dilation``
    to ``1 + 2^{-(11+n)}``.
    """
    if isinstance(mask, GridFunction):
        grid = mask.grid
        mask = mask.values
    if grid is None:
        raise DomainError("a grid is needed with a raw mask")
    m = np.asarray(mask).astype(bool).reshape(grid.shape)
    n = grid.dimension
    c = 2.0 ** (6 + n) if separation is None else float(separation)
    a = 1 + 2.0 ** -(11 + n) if dilation is None else float(dilation)
    N = grid.points_per_axis
    h = grid.spacing
    if min_cells < 1 or N % min_cells:
        raise DomainError("points_per_axis must be a multiple of min_cells")
    empty = np.zeros((0, n), dtype=np.int64)
    if not m.any():
        return WhitneyCover(grid, m, m.copy(), empty, np.zeros(0, np.int64), np.zeros(0),
                            np.zeros(0, bool), c, a, min_cells, {})
    if m.all():
        raise PreconditionError("the set fills the whole box; no complement to measure from")

    resolved = resolve_mask(m, min_cells)
    if resolved.all():
        raise PreconditionError("the resolved set fills the whole box")
    gap_raw = _complement_gap(m)

    top = min_cells
    while top * 2 <= N and N % (top * 2) == 0:
        top *= 2
    stack = [(tuple(s), top) for s in itertools.product(range(0, N, top), repeat=n)]
    starts, sizes, dists, flags = [], [], [], []
    while stack:
        s, k = stack.pop()
        box = tuple(slice(x, x + k) for x in s)
        r = resolved[box]
        if not r.any():
            continue
        inside = bool(r.all())
        dist = max(int(gap_raw[box].min()), 0) * h if m[box].all() else 0.0
        if inside and c * k * h <= dist * (1 + 1e-12):
            starts.append(s); sizes.append(k); dists.append(dist)
            flags.append(dist > 4 * c * k * h * (1 + 1e-12))
        elif k > min_cells:
            half = k // 2
            for off in itertools.product((0, half), repeat=n):
                stack.append((tuple(x + o for x, o in zip(s, off)), half))
        else:
            starts.append(s); sizes.append(k); dists.append(dist)
            ok = inside and m[box].all() and c * k * h <= dist <= 4 * c * k * h
            flags.append(not ok)
    order = np.lexsort(np.array(starts).T[::-1]) if starts else np.zeros(0, int)
    starts = np.array(starts, dtype=np.int64)[order]
    sizes = np.array(sizes, dtype=np.int64)[order]
    dists = np.array(dists)[order]
    flags = np.array(flags, dtype=bool)[order]
    ratio = dists / (sizes * h)
    consts = {
        "dist_over_diam_min": float(ratio.min()),
        "dist_over_diam_max": float(ratio.max()),
        "flagged_fraction": float(flags.mean()),
        "separation": c,
    }
    return WhitneyCover(grid, m, resolved, starts, sizes, dists, flags, c, a, min_cells, consts)


# -- partition of unity --------------------------------------------------------


def _smootherstep(z):
    z = np.clip(z, 0.0, 1.0)
    return z * z * z * (z * (6 * z - 15) + 10)


def reference_bump(a: float):
    """C^2 product bump: 1 on ``Q(0,1)``, zero outside ``aQ(0,1)``."""
    if a <= 1:
        raise DomainError("dilation must exceed 1")
    width = (a - 1) / 2

    def xi(u):
        u = np.abs(np.asarray(u, dtype=float))
        return np.prod(_smootherstep((a / 2 - u) / width), axis=-1)

    return xi


def partition_of_unity(cover: WhitneyCover, xi=None) -> list[Patch]:
    """``zeta_i = xi_i / sum_j xi_j`` on the covered set, as patches.

    ``xi_i(x) = xi((x - x_i) / l_i)`` and ``xi`` defaults to the reference
    bump for the cover's dilation.
    """
    g = cover.grid
    xi = reference_bump(cover.dilation) if xi is None else xi
    raw = []
    total = np.zeros(g.shape)
    for cube in cover.cubes:
        big = cube.dilate(cover.dilation)
        box = g.index_box(big)
        lo = tuple(s.start for s in box)
        pts = g.coordinates()[box]
        vals = xi((pts - np.asarray(cube.center)) / cube.side)
        p = Patch(g, lo, vals)
        p.add_into(total)
        raw.append(p)
    covered = cover.coverage() > 0
    if np.any(total[covered] <= 0):
        raise DomainError("partition denominator vanishes on the cover")
    out = []
    for p in raw:
        den = p.take(total)
        keep = p.take(covered)
        vals = np.where(keep & (den > 0), p.values / np.where(den > 0, den, 1.0), 0.0)
        out.append(Patch(g, p.lo, vals))
    return out


# -- polynomials ---------------------------------------------------------------


def monomial_exponents(n: int, s: int) -> list[tuple[int, ...]]:
    """Multi-indices with ``|alpha| <= s``, graded order."""
    out = []
    for d in range(s + 1):
        for alpha in itertools.product(range(d + 1), repeat=n):
            if sum(alpha) == d:
                out.append(alpha)
    return out


@dataclass(frozen=True)
class Polynomial:
    """``P(x) = sum_alpha c_alpha ((x - center)/scale)^alpha``."""

    exponents: tuple[tuple[int, ...], ...]
    coef: np.ndarray
    center: tuple[float, ...]
    scale: float

    def __call__(self, x: np.ndarray) -> np.ndarray:
        u = (np.asarray(x, dtype=float) - np.asarray(self.center)) / self.scale
        return _basis(u, self.exponents) @ self.coef

    @property
    def degree(self) -> int:
        return max(sum(a) for a in self.exponents)

    def monomial_coefficients(self) -> np.ndarray:
        """Coefficients in the plain basis ``x^alpha`` (same exponent order)."""
        from math import comb
        c = np.asarray(self.center)
        out = np.zeros(len(self.exponents))
        index = {a: i for i, a in enumerate(self.exponents)}
        for a, ca in zip(self.exponents, self.coef):
            # prod_k ((x_k - c_k)/scale)^{a_k}
            for beta in itertools.product(*[range(ak + 1) for ak in a]):
                term = ca / self.scale ** sum(a)
                for ak, bk, ck in zip(a, beta, c):
                    term *= comb(ak, bk) * (-ck) ** (ak - bk)
                out[index[beta]] += term
        return out


def _basis(u: np.ndarray, exps) -> np.ndarray:
    cols = [np.prod(u ** np.asarray(a), axis=-1) for a in exps]
    return np.stack(cols, axis=-1)


def project_patch(fvals: np.ndarray, weight: np.ndarray, coords: np.ndarray, s: int,
                  center, scale: float, cond_max: float = 1e12) -> Polynomial:
    """Weighted least-squares projection onto degree-``s`` polynomials."""
    n = coords.shape[-1]
    exps = tuple(monomial_exponents(n, s))
    w = weight.ravel()
    sel = w != 0
    if not np.any(sel) or np.sum(w) <= 0:
        raise DegenerateWeightError("weight has no mass")
    u = (coords.reshape(-1, n)[sel] - np.asarray(center)) / scale
    B = _basis(u, exps)
    ws = w[sel]
    G = B.T @ (B * ws[:, None])
    rhs = B.T @ (fvals.ravel()[sel] * ws)
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > cond_max:
        raise DegenerateWeightError(f"Gram matrix condition number {cond:.3g} exceeds {cond_max:.3g}")
    coef = np.linalg.solve(G, rhs)
    return Polynomial(exps, coef, tuple(float(v) for v in np.atleast_1d(center)), float(scale))


def minimizing_polynomial(f: GridFunction, weight: GridFunction, s: int) -> Polynomial:
    """Projection of ``f`` onto degree-``s`` polynomials in ``L^2(weight)``.

    The basis is centred and scaled to the bounding cube of the weight's
    support.  Satisfies ``int (f - P) x^alpha weight = 0`` for ``|alpha| <= s``.

    Examples
    --------
    >>> from mohardy.grid import Grid, GridFunction
    >>> g = Grid.box(-1, 1, 200)
    >>> f = GridFunction.from_callable(g, lambda x: x[..., 0] ** 2)
    >>> w = GridFunction(g, 1.0 + 0 * f.values)
    >>> P = minimizing_polynomial(f, w, 0)
    >>> abs(P.coef[0] - 1 / 3) < 1e-4
    True
    """
    if s < 0:
        raise DomainError("degree must be nonnegative")
    wv = np.asarray(weight.values, dtype=float)
    if np.any(wv < 0):
        raise DomainError("weight must be nonnegative")
    g = f.grid
    nz = np.argwhere(wv != 0)
    if len(nz) == 0:
        raise DegenerateWeightError("weight has no mass")
    lo, hi = nz.min(axis=0), nz.max(axis=0) + 1
    box = tuple(slice(a, b) for a, b in zip(lo, hi))
    coords = g.coordinates()[box]
    h = g.spacing
    center = np.asarray(g.origin) + (lo + hi) / 2 * h
    scale = max(float(np.max(hi - lo)) * h / 2, h)
    return project_patch(np.real(f.values[box]), wv[box], coords, s, center, scale)


# -- Calderon-Zygmund decomposition --------------------------------------------


@dataclass(frozen=True, eq=False)
class CZDecomposition:
    """``f = g + sum_i b_i`` at height ``level`` and degree ``degree``."""

    level: float
    cover: WhitneyCover
    partition: list[Patch]
    polynomials: list[Polynomial | None]
    bad_parts: list[Patch]
    good: GridFunction
    degree: int
    maximal: GridFunction
    f: GridFunction

    def __len__(self):
        return len(self.bad_parts)

    def bad_sum(self) -> np.ndarray:
        out = np.zeros(self.f.grid.shape)
        for b in self.bad_parts:
            b.add_into(out)
        return out

    def reconstruction_error(self) -> float:
        return float(np.max(np.abs(self.good.values + self.bad_sum() - self.f.values)))

    def c1(self) -> float:
        """``max_i sup |P_i zeta_i| / level`` over small cubes."""
        worst = 0.0
        for P, z in zip(self.polynomials, self.partition):
            if P is not None:
                worst = max(worst, float(np.max(np.abs(P(z.coordinates()) * z.values))))
        return worst / self.level

    def moment_errors(self) -> np.ndarray:
        """Relative moment defects ``|int b_i u^alpha| / max(int |b_i|, int |f zeta_i|)``.

        Only small cubes count.  The second scale keeps the ratio meaningful
        when ``f`` is a polynomial on the patch and ``b_i`` is pure round-off.
        """
        out = []
        n = self.f.grid.dimension
        exps = monomial_exponents(n, self.degree)
        fv = np.real(self.f.values)
        for P, b, z, cube in zip(self.polynomials, self.bad_parts, self.partition, self.cover.cubes):
            if P is None:
                continue
            u = (b.coordinates() - np.asarray(cube.center)) / cube.side
            B = _basis(u.reshape(-1, n), exps)
            v = b.values.ravel()
            scale = max(np.sum(np.abs(v)), np.sum(np.abs(z.take(fv) * z.values)), 1e-300)
            out.append(float(np.max(np.abs(v @ B)) / scale))
        return np.array(out)


def cz_decompose(f: GridFunction, level: float, s: int, maximal: GridFunction,
                 separation: float | None = None, min_cells: int = 8,
                 dilation: float | None = None) -> CZDecomposition:
    """Decompose ``f`` at height ``level`` on ``{maximal > level}``.

    Small cubes (side < 1) get ``b_i = (f - P_i) zeta_i`` with ``P_i`` the
    ``zeta_i``-weighted projection; large cubes get ``b_i = f zeta_i``.
    """
    if not level > 0:
        raise DomainError("level must be positive")
    if s < 0:
        raise DomainError("degree must be nonnegative")
    g = f.grid
    M = maximal.values
    if level <= M.min():
        raise PreconditionError("level does not exceed the infimum of the maximal function")
    mask = M > level
    if mask.all():
        raise PreconditionError("level too small: the superlevel set fills the box")
    cover = whitney(mask, g, separation, min_cells, dilation)
    parts = partition_of_unity(cover) if len(cover) else []
    fv = np.real(f.values)
    polys, bads = [], []
    for cube, z in zip(cover.cubes, parts):
        fz = z.take(fv)
        if cube.side < 1:
            P = project_patch(fz, z.values, z.coordinates(), s, cube.center, cube.side / 2)
            b = (fz - P(z.coordinates())) * z.values
        else:
            P = None
            b = fz * z.values
        polys.append(P)
        bads.append(Patch(g, z.lo, b))
    total = np.zeros(g.shape)
    for b in bads:
        b.add_into(total)
    good = GridFunction(g, fv - total)
    return CZDecomposition(level, cover, parts, polys, bads, good, s, maximal, f)
