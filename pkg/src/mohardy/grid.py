"""Uniform grids, sampled functions and closed cubes.

A :class:`Grid` is a cell-centred tensor grid on an axis-parallel box.
Grid values are midpoint samples, so a cell belongs to a closed cube
exactly when its centre does.  Everything outside the box is zero.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import DomainError

__all__ = [
    "Grid",
    "GridFunction",
    "Cube",
    "integrate",
    "dilate_translate",
]

# Relative slack used when deciding whether a cell centre lies in a cube.
_EDGE_EPS = 1e-9


@dataclass(frozen=True)
class Cube:
    """Closed axis-parallel cube ``Q(center, side)``."""

    center: tuple[float, ...]
    side: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        object.__setattr__(self, "side", float(self.side))
        if not self.side > 0 or not np.isfinite(self.side):
            raise DomainError(f"cube side must be positive, got {self.side}")

    @property
    def dimension(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        return self.side ** self.dimension

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.center) - self.side / 2

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.center) + self.side / 2

    @property
    def diameter(self) -> float:
        """Diameter in the sup metric, i.e. the side length."""
        return self.side

    def dilate(self, a: float) -> "Cube":
        return Cube(self.center, a * self.side)

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dimension)
        tol = _EDGE_EPS * self.side
        return np.all((pts >= self.lo - tol) & (pts <= self.hi + tol), axis=1)

    def intersects(self, other: "Cube") -> bool:
        return bool(np.all(np.abs(np.subtract(self.center, other.center))
                           <= (self.side + other.side) / 2))

    def __repr__(self):
        c = ", ".join(f"{v:.6g}" for v in self.center)
        return f"Cube(center=({c}), side={self.side:.6g})"


@dataclass(frozen=True)
class Grid:
    """Cell-centred uniform grid on ``origin + [0, extent]^n``.

    Cell ``i`` along an axis has centre ``origin + (i + 1/2) h`` with
    ``h = extent / points_per_axis``.
    """

    dimension: int
    origin: tuple[float, ...]
    extent: tuple[float, ...]
    points_per_axis: int

    def __post_init__(self):
        n = int(self.dimension)
        if n not in (1, 2):
            raise DomainError("only dimensions 1 and 2 are supported")
        origin = tuple(float(v) for v in np.broadcast_to(np.atleast_1d(self.origin), (n,)))
        extent = tuple(float(v) for v in np.broadcast_to(np.atleast_1d(self.extent), (n,)))
        object.__setattr__(self, "dimension", n)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "points_per_axis", int(self.points_per_axis))
        if self.points_per_axis < 2:
            raise DomainError("points_per_axis must be at least 2")
        if min(extent) <= 0:
            raise DomainError("extent must be positive")
        if not np.allclose(extent, extent[0], rtol=1e-12, atol=0):
            raise DomainError("all axes must share one spacing")

    @classmethod
    def box(cls, lo: float, hi: float, points: int, dimension: int = 1) -> "Grid":
        """Grid on ``[lo, hi]^dimension``."""
        return cls(dimension, (lo,) * dimension, (hi - lo,) * dimension, points)

    @property
    def spacing(self) -> float:
        return self.extent[0] / self.points_per_axis

    h = spacing

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dimension

    @property
    def size(self) -> int:
        return self.points_per_axis ** self.dimension

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dimension

    @property
    def bounding_cube(self) -> Cube:
        c = [o + e / 2 for o, e in zip(self.origin, self.extent)]
        return Cube(c, self.extent[0])

    def axes(self) -> list[np.ndarray]:
        h = self.spacing
        idx = np.arange(self.points_per_axis) + 0.5
        return [o + idx * h for o in self.origin]

    def coordinates(self) -> np.ndarray:
        """Cell centres, shape ``shape + (dimension,)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def index_box(self, cube: Cube) -> tuple[slice, ...]:
        """Slices selecting the cells whose centres lie in ``cube``.

        Empty slices mean the cube misses every cell centre.
        """
        h = self.spacing
        tol = _EDGE_EPS * max(cube.side, h)
        out = []
        for o, c in zip(self.origin, cube.center):
            a = (c - cube.side / 2 - tol - o) / h - 0.5
            b = (c + cube.side / 2 + tol - o) / h - 0.5
            i0 = max(int(np.ceil(a)), 0)
            i1 = min(int(np.floor(b)), self.points_per_axis - 1)
            out.append(slice(i0, max(i0, i1 + 1)))
        return tuple(out)

    def aligned_cube(self, start: Sequence[int], cells: int) -> Cube:
        """Cube made of ``cells`` cells per axis starting at index ``start``."""
        h = self.spacing
        c = [o + (s + cells / 2) * h for o, s in zip(self.origin, start)]
        return Cube(c, cells * h)

    def locate(self, point: Sequence[float]) -> tuple[int, ...]:
        """Index of the cell containing ``point`` (clipped to the box)."""
        h = self.spacing
        idx = [int(np.floor((p - o) / h)) for p, o in zip(point, self.origin)]
        return tuple(min(max(i, 0), self.points_per_axis - 1) for i in idx)

    def zeros(self, dtype=float) -> "GridFunction":
        return GridFunction(self, np.zeros(self.shape, dtype=dtype))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples of a function at the cell centres of ``grid``.

    ``values`` has shape ``grid.shape``; a flat array of the right length
    is reshaped.  Complex values are allowed (operator outputs).
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.dtype.kind not in "fc":
            v = v.astype(float)
        if v.size != self.grid.size:
            raise DomainError(f"expected {self.grid.size} values, got {v.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise DomainError("grid function values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid: Grid, func: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        """Sample ``func`` at cell centres; ``func`` gets shape ``(..., n)``."""
        return cls(grid, np.asarray(func(grid.coordinates())))

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    @property
    def is_complex(self) -> bool:
        return self.values.dtype.kind == "c"

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def abs(self) -> "GridFunction":
        return GridFunction(self.grid, np.abs(self.values))

    def real(self) -> "GridFunction":
        return GridFunction(self.grid, np.real(self.values))

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise DomainError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.grid, self.values / self._other(other))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def restrict(self, cube: Cube) -> "GridFunction":
        """Zero outside ``cube``."""
        out = np.zeros_like(self.values)
        box = self.grid.index_box(cube)
        out[box] = self.values[box]
        return GridFunction(self.grid, out)

    # -- serialization ------------------------------------------------------

    def to_csv(self, path: str | Path | None = None) -> str:
        """One row per cell: coordinates then value.  Returns the text."""
        g = self.grid
        coords = g.coordinates().reshape(-1, g.dimension)
        names = [f"x{k}" for k in range(g.dimension)]
        buf = io.StringIO()
        if self.is_complex:
            buf.write(",".join(names + ["re", "im"]) + "\n")
            cols = np.column_stack([coords, self.flat.real, self.flat.imag])
        else:
            buf.write(",".join(names + ["value"]) + "\n")
            cols = np.column_stack([coords, self.flat])
        np.savetxt(buf, cols, fmt="%.17g", delimiter=",")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, grid: Grid, path: str | Path) -> "GridFunction":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        n = grid.dimension
        vals = data[:, n] if data.shape[1] == n + 1 else data[:, n] + 1j * data[:, n + 1]
        return cls(grid, vals)

    def to_bytes(self) -> bytes:
        """Little-endian dump: dimension, points_per_axis, origin, extent, values."""
        if self.is_complex:
            raise DomainError("binary dump holds real values only")
        g = self.grid
        head = struct.pack("<qq", g.dimension, g.points_per_axis)
        head += struct.pack(f"<{g.dimension}d", *g.origin)
        head += struct.pack(f"<{g.dimension}d", *g.extent)
        return head + self.flat.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "GridFunction":
        n, m = struct.unpack_from("<qq", blob, 0)
        off = 16
        origin = struct.unpack_from(f"<{n}d", blob, off)
        off += 8 * n
        extent = struct.unpack_from(f"<{n}d", blob, off)
        off += 8 * n
        vals = np.frombuffer(blob, dtype="<f8", offset=off)
        return cls(Grid(n, origin, extent, m), vals.astype(float))


def integrate(f: GridFunction, region: Cube | None = None) -> float | complex:
    """Midpoint rule over the cells whose centres lie in ``region``.

    ``region=None`` integrates over the whole box.
    """
    g = f.grid
    vals = f.values if region is None else f.values[g.index_box(region)]
    total = vals.sum() * g.cell_volume
    return complex(total) if f.is_complex else float(total)


def dilate_translate(psi: GridFunction, t: float, shift: Sequence[float] | float = 0.0) -> GridFunction:
    """Resample ``x -> t^{-n} psi((x - shift) / t)`` on ``psi``'s grid.

    Linear interpolation between cell centres, zero outside their hull.
    """
    if not t > 0:
        raise DomainError(f"dilation parameter must be positive, got {t}")
    g = psi.grid
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (g.dimension,))
    interp = RegularGridInterpolator(g.axes(), psi.values, method="linear",
                                     bounds_error=False, fill_value=0.0)
    pts = (g.coordinates().reshape(-1, g.dimension) - shift) / t
    return GridFunction(g, interp(pts).reshape(g.shape) / t ** g.dimension)


def sample_points(grid: Grid, points: Iterable[Sequence[float]], f: GridFunction) -> np.ndarray:
    """Values of ``f`` at the cells containing ``points``."""
    return np.array([f.values[grid.locate(p)] for p in points])
