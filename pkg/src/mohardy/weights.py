"""Local Muckenhoupt-type constants on cube lattices.

Lattice cubes are unions of whole grid cells, so every cube integral is
an exact box sum of the midpoint samples.  Box sums come from summed-area
tables and box minima from ``scipy.ndimage.minimum_filter``.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import DomainError
from .grid import Cube, Grid, GridFunction
from .growth import GrowthFunction

__all__ = [
    "CubeLattice",
    "default_lattice",
    "box_sums",
    "box_minima",
    "a_p_ratios",
    "a_p_loc_constant",
    "a_p_phi_alpha_constant",
    "check_doubling",
    "check_measure_ratio",
    "nested_pairs",
    "DoublingReport",
    "ratio_report_csv",
]


@dataclass(frozen=True, eq=False)
class CubeLattice:
    """Grid-aligned cubes given by lower corner index and size in cells."""

    grid: Grid
    starts: np.ndarray  # (m, n) int
    sizes: np.ndarray   # (m,) int
    size_cap: float = math.inf

    def __post_init__(self):
        starts = np.asarray(self.starts, dtype=np.int64).reshape(-1, self.grid.dimension)
        sizes = np.asarray(self.sizes, dtype=np.int64).reshape(-1)
        if len(sizes) == 0:
            raise DomainError("empty lattice")
        if len(starts) != len(sizes):
            raise DomainError("starts and sizes disagree")
        vol = (sizes * self.grid.spacing) ** self.grid.dimension
        if np.any(vol > self.size_cap * (1 + 1e-12)):
            raise DomainError("lattice cube exceeds the size cap")
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "sizes", sizes)

    def __len__(self):
        return len(self.sizes)

    @property
    def sides(self) -> np.ndarray:
        return self.sizes * self.grid.spacing

    @property
    def volumes(self) -> np.ndarray:
        return self.sides ** self.grid.dimension

    @property
    def centers(self) -> np.ndarray:
        h = self.grid.spacing
        return np.asarray(self.grid.origin) + (self.starts + self.sizes[:, None] / 2) * h

    @property
    def cubes(self) -> list[Cube]:
        return [Cube(c, l) for c, l in zip(self.centers, self.sides)]

    def subset(self, mask: np.ndarray) -> "CubeLattice":
        return CubeLattice(self.grid, self.starts[mask], self.sizes[mask], self.size_cap)

    def with_cap(self, cap: float) -> "CubeLattice":
        return self.subset(self.volumes <= cap * (1 + 1e-12))


def default_lattice(grid: Grid, size_cap: float = 1.0, stride: int = 4,
                    min_cells: int = 1, max_cells: int | None = None,
                    margin: int = 0) -> CubeLattice:
    """Dyadic cell counts ``2^k`` with lower corners on every ``stride``-th node.

    Only cubes inside the box (shrunk by ``margin`` cells) are kept.
    """
    N = grid.points_per_axis
    n = grid.dimension
    h = grid.spacing
    starts, sizes = [], []
    k = 1
    while k < min_cells:
        k *= 2
    while k <= N - 2 * margin:
        if (k * h) ** n > size_cap * (1 + 1e-12) or (max_cells is not None and k > max_cells):
            break
        step = max(1, min(stride, k)) if k < stride else stride
        pos = np.arange(margin, N - margin - k + 1, step)
        for corner in itertools.product(pos, repeat=n):
            starts.append(corner)
            sizes.append(k)
        k *= 2
    return CubeLattice(grid, np.array(starts), np.array(sizes), size_cap)


def _prefix(values: np.ndarray) -> np.ndarray:
    S = values
    for ax in range(values.ndim):
        S = np.cumsum(S, axis=ax)
    return np.pad(S, [(1, 0)] * values.ndim)


def box_sums(values: np.ndarray, starts: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """Sums of ``values`` over the index boxes ``[start, start + size)``."""
    S = _prefix(values)
    n = values.ndim
    out = np.zeros(len(sizes), dtype=S.dtype)
    for corner in itertools.product((0, 1), repeat=n):
        idx = tuple(starts[:, d] + corner[d] * sizes for d in range(n))
        sign = (-1) ** (n - sum(corner))
        out += sign * S[idx]
    return out


def box_minima(values: np.ndarray, starts: np.ndarray, sizes: np.ndarray,
               op=ndimage.minimum_filter) -> np.ndarray:
    """Minimum of ``values`` over each index box (``op`` picks min or max)."""
    out = np.empty(len(sizes))
    n = values.ndim
    for k in np.unique(sizes):
        sel = sizes == k
        # filter window [i - k//2, i + k - 1 - k//2]; index so it starts at s
        filt = op(values, size=k, mode="nearest")
        off = k // 2
        idx = tuple(np.minimum(starts[sel, d] + off, values.shape[d] - 1) for d in range(n))
        out[sel] = filt[idx]
    return out


def _weight_array(w) -> np.ndarray:
    arr = np.asarray(w.values if isinstance(w, GridFunction) else w, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("weight must be positive on every cell")
    return arr


def a_p_ratios(w, p: float, lattice: CubeLattice, normalizer: np.ndarray | None = None) -> np.ndarray:
    """Per-cube Hoelder ratio; ``normalizer`` replaces ``|Q|`` (default ``|Q|``).

    p > 1: ``[N^{-1} int w] [N^{-1} int w^{-1/(p-1)}]^{p-1}``;
    p = 1: ``[N^{-1} int w] / min_Q w``.
    """
    if p < 1:
        raise DomainError("p must be at least 1")
    arr = _weight_array(w)
    g = lattice.grid
    vol = g.cell_volume
    Nq = lattice.volumes if normalizer is None else np.asarray(normalizer, dtype=float)
    W = box_sums(arr, lattice.starts, lattice.sizes) * vol / Nq
    if p == 1:
        mins = box_minima(arr, lattice.starts, lattice.sizes)
        return W / mins
    V = box_sums(arr ** (-1.0 / (p - 1)), lattice.starts, lattice.sizes) * vol / Nq
    return W * V ** (p - 1)


def _slices(phi: GrowthFunction, grid: Grid, t_samples) -> list[tuple[float, np.ndarray]]:
    X = grid.coordinates()
    if phi.orlicz is not None:
        # ratios are invariant under t for product families
        w = np.ones(grid.shape) if phi.weight is None else phi.weight(X)
        return [(float("nan"), w)]
    return [(float(t), phi(X, np.full(grid.shape, t))) for t in t_samples]


def a_p_loc_constant(w: GridFunction | GrowthFunction, p: float, lattice: CubeLattice,
                     t_samples: Sequence[float] | None = None, report: list | None = None) -> float:
    """Discrete ``A_p^loc`` constant: the worst ratio over the lattice.

    A growth function is treated slice by slice in ``t``.  Appends
    ``(center, side, t, ratio)`` rows to ``report`` when given.
    """
    if len(lattice) == 0:
        raise DomainError("empty lattice")
    if isinstance(w, GrowthFunction):
        ts = 2.0 ** np.arange(-10, 11) if t_samples is None else t_samples
        slices = _slices(w, lattice.grid, ts)
    else:
        slices = [(float("nan"), w.values)]
    worst = 0.0
    for t, arr in slices:
        r = a_p_ratios(arr, p, lattice)
        worst = max(worst, float(r.max()))
        if report is not None:
            for c, l, v in zip(lattice.centers, lattice.sides, r):
                report.append((tuple(c), float(l), t, float(v)))
    return worst


def a_p_phi_alpha_constant(w: GridFunction | GrowthFunction, p: float, alpha: float,
                           lattice: CubeLattice, t_samples: Sequence[float] | None = None) -> float:
    """Same ratio with ``|Q|`` replaced by ``(1 + |Q|)^alpha |Q|``."""
    if alpha < 0:
        raise DomainError("alpha must be nonnegative")
    norm = (1 + lattice.volumes) ** alpha * lattice.volumes
    if isinstance(w, GrowthFunction):
        ts = 2.0 ** np.arange(-10, 11) if t_samples is None else t_samples
        slices = _slices(w, lattice.grid, ts)
    else:
        slices = [(float("nan"), w.values)]
    return max(float(a_p_ratios(arr, p, lattice, norm).max()) for _, arr in slices)


@dataclass(frozen=True)
class DoublingReport:
    worst_ratio_small: float
    worst_ratio_large: float


def check_doubling(phi: GrowthFunction, t_samples: Sequence[float], lattice: CubeLattice) -> DoublingReport:
    """Worst ``phi(2Q,t)/phi(Q,t)`` (``l<1``) and ``phi(Q(x,l+1),t)/phi(Q,t)`` (``l>=1``).

    Enlargements are taken in whole cells; cubes whose enlargement is not
    cell-aligned or leaves the box are skipped.
    """
    g = lattice.grid
    h = g.spacing
    N = g.points_per_axis
    unit = 1.0 / h
    small, large = [0.0], [0.0]
    for t, arr in _slices(phi, g, t_samples):
        sides = lattice.sides
        grow = np.where(sides < 1, lattice.sizes, np.rint(unit)).astype(np.int64)
        ok = (grow % 2 == 0)
        if not np.isclose(unit, np.rint(unit)):
            ok &= sides < 1
        new_starts = lattice.starts - (grow // 2)[:, None]
        new_sizes = lattice.sizes + grow
        ok &= np.all(new_starts >= 0, axis=1) & np.all(new_starts + new_sizes[:, None] <= N, axis=1)
        if not np.any(ok):
            continue
        base = box_sums(arr, lattice.starts[ok], lattice.sizes[ok])
        if np.any(base <= 0):
            raise DomainError("phi(Q, t) vanishes on a lattice cube")
        big = box_sums(arr, new_starts[ok], new_sizes[ok])
        r = big / base
        s_mask = sides[ok] < 1
        if np.any(s_mask):
            small.append(float(r[s_mask].max()))
        if np.any(~s_mask):
            large.append(float(r[~s_mask].max()))
    return DoublingReport(max(small), max(large))


def nested_pairs(lattice: CubeLattice, depth: int = 3) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Dyadic sub-cubes ``E`` of each lattice cube ``Q`` down ``depth`` levels.

    Returns ``(E_starts, E_sizes, Q_index, Q_sizes)``.
    """
    n = lattice.grid.dimension
    es, ez, qi = [], [], []
    for i, (s, k) in enumerate(zip(lattice.starts, lattice.sizes)):
        m = k
        for _ in range(depth + 1):
            for corner in itertools.product(range(k // m), repeat=n):
                es.append(s + np.array(corner) * m)
                ez.append(m)
                qi.append(i)
            if m == 1:
                break
            m //= 2
    qi = np.array(qi)
    return np.array(es).reshape(-1, n), np.array(ez), qi, lattice.sizes[qi]


def check_measure_ratio(phi: GrowthFunction, p: float, alpha: float, lattice: CubeLattice,
                        t_samples: Sequence[float], depth: int = 3) -> float:
    """Worst ``(|E| / (phi_alpha(|Q|)|Q|)) / (phi(E,t)/phi(Q,t))^{1/p}`` over nested pairs."""
    g = lattice.grid
    es, ez, qi, _ = nested_pairs(lattice, depth)
    volE = (ez * g.spacing) ** g.dimension
    volQ = lattice.volumes[qi]
    lhs = volE / ((1 + volQ) ** alpha * volQ)
    worst = 0.0
    for _, arr in _slices(phi, g, t_samples):
        pE = box_sums(arr, es, ez)
        pQ = box_sums(arr, lattice.starts, lattice.sizes)[qi]
        if np.any(pE <= 0):
            raise DomainError("phi(E, t) vanishes")
        worst = max(worst, float(np.max(lhs / (pE / pQ) ** (1.0 / p))))
    return worst


def ratio_report_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    if rows:
        n = len(rows[0][0])
        wr.writerow([f"c{k}" for k in range(n)] + ["side", "t", "ratio"])
        for c, l, t, r in rows:
            wr.writerow([repr(float(v)) for v in c] + [repr(l), repr(t), repr(r)])
    return buf.getvalue()
