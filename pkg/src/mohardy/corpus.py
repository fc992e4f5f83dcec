"""Deterministic test corpora and the shipped atom set.

Every family draws from its own stream seeded by ``(seed, family index)``,
so growing one family's count keeps the earlier elements of every family.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Mapping

import numpy as np

from .errors import DomainError, ResolutionError
from .grid import Cube, Grid, GridFunction

__all__ = [
    "FAMILIES",
    "CorpusItem",
    "generate_corpus",
    "shipped_atom_descriptors",
    "shipped_atom_functions",
    "shipped_atoms",
    "atom_function",
]

log = logging.getLogger(__name__)

FAMILIES = ("bumps", "spikes", "sawtooth", "random_smooth", "atoms")


@dataclass(frozen=True, eq=False)
class CorpusItem:
    function: GridFunction
    family: str
    params: dict = field(default_factory=dict)

    @property
    def values(self) -> GridFunction:
        return self.function

    @property
    def tag(self) -> str:
        return f"{self.family}:{json.dumps(self.params, sort_keys=True)}"


def _bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(1 - 1 / (1 - u[inside] ** 2))
    return out


def _radius(x, center):
    return np.sqrt(np.sum((x - np.asarray(center)) ** 2, axis=-1))


def _bumps(grid: Grid, rng, count: int, opts):
    h = grid.spacing
    lo, L = np.asarray(grid.origin), grid.extent[0]
    x = grid.coordinates()
    out = []
    for _ in range(count):
        width = float(math.exp(rng.uniform(math.log(4 * h), math.log(L / 8))))
        center = lo + width + rng.uniform(0, 1, grid.dimension) * (L - 2 * width)
        amp = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0))
        vals = amp * _bump(_radius(x, center) / width)
        out.append((vals, {"center": [float(c) for c in center], "width": width, "amplitude": amp}))
    return out


def _spikes(grid: Grid, rng, count: int, opts):
    N = grid.points_per_axis
    out = []
    for _ in range(count):
        cells = int(rng.integers(1, 4))
        start = rng.integers(N // 8, N - N // 8 - cells, grid.dimension)
        height = float(rng.uniform(1.0, 16.0))
        vals = np.zeros(grid.shape)
        vals[tuple(slice(int(s), int(s) + cells) for s in start)] = height
        out.append((vals, {"start": [int(s) for s in start], "cells": cells, "height": height}))
    return out


def _sawtooth(grid: Grid, rng, count: int, opts):
    x = grid.coordinates()[..., 0]
    out = []
    for _ in range(count):
        freq = float(rng.uniform(0.5, 4.0))
        phase = float(rng.uniform(0, 1))
        vals = np.mod(freq * x + phase, 1.0) - 0.5
        out.append((vals, {"frequency": freq, "phase": phase}))
    return out


def band_limit(values: np.ndarray, spacing: float, cutoff: float) -> np.ndarray:
    """Zero every Fourier mode with some ``|xi_d| > cutoff`` (cycles per unit)."""
    F = np.fft.fftn(values)
    mask = np.ones(values.shape, dtype=bool)
    for ax, m in enumerate(values.shape):
        xi = np.abs(np.fft.fftfreq(m, spacing))
        shape = [1] * values.ndim
        shape[ax] = m
        mask &= (xi <= cutoff).reshape(shape)
    return np.real(np.fft.ifftn(F * mask))


def _random_smooth(grid: Grid, rng, count: int, opts):
    cutoff = float(opts.get("cutoff", 2.0))
    out = []
    for _ in range(count):
        vals = band_limit(rng.standard_normal(grid.shape), grid.spacing, cutoff)
        vals /= max(float(np.max(np.abs(vals))), 1e-300)
        out.append((vals, {"cutoff": cutoff}))
    return out


def _atoms(grid: Grid, rng, count: int, opts):
    items = shipped_atom_functions(grid)
    out = []
    for i in range(count):
        f, cube, order = items[i % len(items)]
        out.append((f.values, {"index": i % len(items), "order": order, "side": cube.side}))
    return out


_MAKERS = {"bumps": _bumps, "spikes": _spikes, "sawtooth": _sawtooth,
           "random_smooth": _random_smooth, "atoms": _atoms}


def generate_corpus(seed: int, spec: Mapping[str, Any], grid: Grid) -> list[CorpusItem]:
    """Build the corpus named by ``spec``.

    ``spec`` maps a family in :data:`FAMILIES` to a count or to a dict
    with a ``count`` and family options (``random_smooth`` takes
    ``cutoff``).  ``random-smooth`` is accepted for ``random_smooth``.
    """
    items = []
    for name, entry in spec.items():
        key = name.replace("-", "_")
        if key not in _MAKERS:
            raise DomainError(f"unknown corpus family {name!r}")
        opts = dict(entry) if isinstance(entry, Mapping) else {"count": entry}
        count = int(opts.pop("count", 0))
        if count < 0:
            raise DomainError("corpus counts must be nonnegative")
        rng = np.random.default_rng([int(seed), FAMILIES.index(key)])
        for vals, params in _MAKERS[key](grid, rng, count, opts):
            items.append(CorpusItem(GridFunction(grid, vals), key, params))
    return items


# -- shipped atoms -----------------------------------------------------------------


def shipped_atom_descriptors() -> list[dict]:
    text = resources.files("mohardy").joinpath("data/atoms.json").read_text()
    return json.loads(text)["atoms"]


def atom_function(grid: Grid, center, side: float, order: int) -> tuple[GridFunction, Cube]:
    """A discrete atom profile on the cell-aligned cube nearest ``Q(center, side)``.

    ``order >= 0`` takes the ``(order+1)``-th difference along the first axis
    of a sampled bump, so every discrete moment of degree ``<= order``
    vanishes exactly; ``order = -1`` is the plain bump.  Values are scaled
    to unit sup.
    """
    n = grid.dimension
    h = grid.spacing
    center = np.broadcast_to(np.asarray(center, dtype=float), (n,))
    k = int(round(side / h))
    d = order + 1
    if k < d + 4:
        raise ResolutionError(f"a cube of side {side} has {k} cells, need {d + 4} for order {order}")
    start = np.rint((center - side / 2 - np.asarray(grid.origin)) / h).astype(int)
    if np.any(start < 0) or np.any(start + k > grid.points_per_axis):
        raise DomainError("atom cube leaves the grid box")
    m = k - d
    u0 = (np.arange(m) + 0.5) / m * 2 - 1
    prof = _bump(u0)
    if d > 0:
        prof = np.diff(np.pad(prof, d), n=d)[: k]
    prof = prof[: k] if len(prof) >= k else np.pad(prof, (0, k - len(prof)))
    block = prof
    if n == 2:
        u1 = (np.arange(k) + 0.5) / k * 2 - 1
        block = np.outer(prof, _bump(u1))
    block = block / np.max(np.abs(block))
    vals = np.zeros(grid.shape)
    vals[tuple(slice(int(s), int(s) + k) for s in start)] = block
    cube = grid.aligned_cube(start, k)
    return GridFunction(grid, vals), cube


def shipped_atom_functions(grid: Grid) -> list[tuple[GridFunction, Cube, int]]:
    """The shipped atom profiles on ``grid``; 2D grids use centre ``(c, -c/2)``.

    Atoms too small for the grid are skipped and logged.
    """
    out = []
    for desc in shipped_atom_descriptors():
        c = desc["center"]
        if grid.dimension == 2 and len(c) == 1:
            c = [c[0], -c[0] / 2]
        try:
            f, cube = atom_function(grid, c, desc["side"], desc["order"])
        except ResolutionError as exc:
            log.info("skipping shipped atom %s: %s", desc, exc)
            continue
        out.append((f, cube, desc["order"]))
    return out


def shipped_atoms(grid: Grid, phi, q: float = math.inf) -> list:
    """Shipped profiles normalized as ``(phi, q, s)``-atoms on their cubes."""
    from .atoms import make_atom
    out = []
    for f, cube, order in shipped_atom_functions(grid):
        a = make_atom(f, grid, cube, phi, q, max(order, 0), moments_required=order >= 0)
        out.append(a)
    return out
