"""Local Riesz transforms, S^0_{1,0} pseudo-differential operators and boundedness runs.

Fourier convention: ``f^(xi) = int f(x) e^{-2 pi i x xi} dx`` and
``Tf(x) = int sigma(x, xi) e^{2 pi i x xi} f^(xi) d xi``.  On a grid with
``M`` cells of width ``h`` per axis the frequencies are ``k / (M h)``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import fft as sfft

from ._fft import convolve_same, offsets, workers
from .czd import reference_bump
from .errors import DomainError, PreconditionError, ResolutionError
from .grid import Grid, GridFunction
from .growth import GrowthFunction

__all__ = [
    "CUTOFF_VERSION",
    "LocalRieszKernel",
    "riesz_local",
    "riesz_multiplier_bound",
    "Symbol",
    "SymbolCheck",
    "psdo_apply",
    "riesz_operator",
    "psdo_operator",
    "ExperimentResult",
    "boundedness_experiment",
    "far_field_constant",
]

log = logging.getLogger(__name__)

CUTOFF_VERSION = "smootherstep-c2-1"
MIN_CUTOFF_CELLS = 16


# -- local Riesz transforms ------------------------------------------------------


def cutoff(x: np.ndarray) -> np.ndarray:
    """C^2 product cutoff: 1 on ``Q(0,1) = [-1/2, 1/2]^n``, 0 off ``Q(0,2)``."""
    return reference_bump(2.0)(x)


@dataclass(frozen=True, eq=False)
class LocalRieszKernel:
    """Sampled ``k_j(x) = x_j / |x|^{n+1} cutoff(x)`` times the cell volume.

    ``values`` sits on integer offsets ``[-r, r]^n`` in cells with the centre
    cell zeroed (principal value).  ``direction`` is 1-based.
    """

    grid: Grid
    direction: int
    values: np.ndarray = field(repr=False)
    radius_cells: int

    @classmethod
    def build(cls, grid: Grid, j: int) -> "LocalRieszKernel":
        n = grid.dimension
        if not 1 <= j <= n:
            raise DomainError(f"direction must lie in 1..{n}, got {j}")
        h = grid.spacing
        if 2.0 / h < MIN_CUTOFF_CELLS:
            raise ResolutionError(f"Q(0,2) spans {2.0 / h:.3g} cells, need at least {MIN_CUTOFF_CELLS}")
        r = int(math.ceil(1.0 / h))
        x = offsets(r, n) * h
        rad = np.sqrt(np.sum(x ** 2, axis=-1))
        with np.errstate(divide="ignore", invalid="ignore"):
            k = x[..., j - 1] / rad ** (n + 1) * cutoff(x)
        k[(r,) * n] = 0.0
        return cls(grid, j, k * grid.cell_volume, r)

    @property
    def total(self) -> float:
        return float(np.sum(self.values))

    def symbol(self, pad: int = 16) -> np.ndarray:
        """Samples of the kernel's Fourier series on a ``pad``-times refined torus."""
        shape = [pad * s for s in self.values.shape]
        return sfft.fftn(self.values, shape, workers=workers())


def riesz_local(f: GridFunction, j: int) -> GridFunction:
    """``r_j f = k_j * f`` by zero-padded FFT convolution (``f`` is zero off the box)."""
    k = LocalRieszKernel.build(f.grid, j)
    return GridFunction(f.grid, convolve_same(np.asarray(f.values), k.values))


def riesz_multiplier_bound(grid: Grid, j: int, pad: int = 16) -> float:
    """``sup |k^_j|`` over a fine frequency sampling: the discrete ``L^2`` operator norm."""
    return float(np.max(np.abs(LocalRieszKernel.build(grid, j).symbol(pad))))


# -- symbols -----------------------------------------------------------------------


def _multi_indices(n: int, order: int) -> list[tuple[int, ...]]:
    return [a for a in itertools.product(range(order + 1), repeat=n) if sum(a) <= order]


def _stencil(m: int):
    """Central ``m``-th difference: offsets (in steps) and weights."""
    return [(m / 2 - i, (-1) ** i * math.comb(m, i)) for i in range(m + 1)]


@dataclass(frozen=True)
class SymbolCheck:
    ok: bool
    constants: dict
    worst: tuple  # (ratio, alpha, beta, x, xi)


@dataclass(frozen=True, eq=False)
class Symbol:
    """``sigma(x, xi)`` with declared bounds on ``(1+|xi|)^{|beta|} |d_x^a d_xi^b sigma|``.

    Parameters
    ----------
    evaluator
        ``sigma(x, xi)`` with ``x`` and ``xi`` of shape ``(..., n)``,
        broadcasting against each other.
    dimension
    bounds
        A single constant or a mapping ``(alpha, beta) -> C``.
    separable
        ``(a, b)`` with ``sigma(x, xi) = a(x) b(xi)``, enabling the FFT path.
    """

    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dimension: int = 1
    bounds: float | Mapping = 1.0
    order_cap: int = 3
    name: str = "symbol"
    separable: tuple | None = None

    def __call__(self, x, xi):
        return self.evaluator(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))

    def bound(self, alpha, beta) -> float:
        if isinstance(self.bounds, Mapping):
            return float(self.bounds.get((tuple(alpha), tuple(beta)), math.inf))
        return float(self.bounds)

    # factories

    @classmethod
    def identity(cls, n: int = 1) -> "Symbol":
        one = lambda v: np.ones(np.shape(v)[:-1])
        return cls(lambda x, xi: np.ones(np.broadcast_shapes(x.shape[:-1], xi.shape[:-1])),
                   n, 1.0, name="identity", separable=(one, one))

    @classmethod
    def multiplier(cls, a: Callable[[np.ndarray], np.ndarray], n: int = 1, bound: float = 1.0,
                   name: str = "multiplier") -> "Symbol":
        one = lambda v: np.ones(np.shape(v)[:-1])
        return cls(lambda x, xi: a(x) * one(xi), n, bound, name=name, separable=(a, one))

    @classmethod
    def smoothing(cls, n: int = 1, amplitude: float = 0.5) -> "Symbol":
        """``(1 + amplitude cos x_1) (1 + |xi|^2)^{-1/2}``, an ``S^{-1}`` symbol."""
        a = lambda x: 1.0 + amplitude * np.cos(np.asarray(x)[..., 0])
        b = lambda xi: (1.0 + np.sum(np.asarray(xi) ** 2, axis=-1)) ** -0.5
        # (1+|xi|)^{|beta|} |d^beta b| peaks near 5.96 for |beta| <= 3 and n <= 2
        return cls(lambda x, xi: a(x) * b(xi), n, 6.0 * (1 + amplitude), name="smoothing",
                   separable=(a, b))

    # symbol-class check

    def sample_points(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.dimension
        xs = np.array([-1.3, 0.0, 0.7, 2.1])
        x = np.stack(np.meshgrid(*([xs] * n), indexing="ij"), -1).reshape(-1, n)
        radii = np.concatenate([[0.0], 2.0 ** np.arange(0, 13)])
        dirs = [np.eye(n)[d] for d in range(n)] + [-np.eye(n)[0]]
        if n > 1:
            dirs.append(np.ones(n) / math.sqrt(n))
        xi = np.unique(np.array([r * d for r in radii for d in dirs]), axis=0)
        return x, xi

    def derivative(self, alpha, beta, x: np.ndarray, xi: np.ndarray,
                   hx: float = 1e-2, hxi: float = 5e-2) -> np.ndarray:
        """Central-difference ``d_x^alpha d_xi^beta sigma`` on the outer grid ``x`` by ``xi``.

        The ``xi`` step scales with ``1 + |xi|``.
        """
        n = self.dimension
        X = x[:, None, :]
        XI = xi[None, :, :]
        sx = hx
        sxi = hxi * (1 + np.sqrt(np.sum(XI ** 2, axis=-1)))[..., None]
        out = np.zeros((len(x), len(xi)))
        ax = [_stencil(a) for a in alpha]
        bx = [_stencil(b) for b in beta]
        for terms_a in itertools.product(*ax):
            dx = np.array([o for o, _ in terms_a]) * sx
            wa = np.prod([w for _, w in terms_a])
            for terms_b in itertools.product(*bx):
                dxi = np.array([o for o, _ in terms_b])
                wb = np.prod([w for _, w in terms_b])
                out += wa * wb * np.real(self(X + dx, XI + dxi * sxi))
        scale = sx ** sum(alpha) * sxi[..., 0] ** sum(beta)
        return out / scale

    def check(self) -> SymbolCheck:
        """Sampled ``(1+|xi|)^{|beta|} |d_x^a d_xi^b sigma| <= C(a, b)`` up to ``order_cap``."""
        x, xi = self.sample_points()
        weight = (1 + np.sqrt(np.sum(xi ** 2, axis=-1)))[None, :]
        n = self.dimension
        consts = {}
        worst = (0.0, None, None, None, None)
        for alpha in _multi_indices(n, self.order_cap):
            for beta in _multi_indices(n, self.order_cap):
                d = np.abs(self.derivative(alpha, beta, x, xi)) * weight ** sum(beta)
                i, k = np.unravel_index(np.argmax(d), d.shape)
                c = float(d[i, k])
                consts[(alpha, beta)] = c
                ratio = c / self.bound(alpha, beta)
                if ratio > worst[0]:
                    worst = (ratio, alpha, beta, tuple(x[i]), tuple(xi[k]))
        return SymbolCheck(worst[0] <= 1.0, consts, worst)


# -- pseudo-differential operators --------------------------------------------------


def _padded(grid: Grid, factor: int) -> Grid:
    return Grid(grid.dimension, grid.origin, tuple(e * factor for e in grid.extent),
                grid.points_per_axis * factor)


def psdo_apply(sigma: Symbol, f: GridFunction, pad: int = 2, check: bool = True,
               chunk: int = 256) -> GridFunction:
    """``Tf`` with ``f`` zero-extended to a ``pad``-times larger torus.

    Separable symbols use ``a(x) IFFT(b FFT f)``; others the direct sum
    ``Tf(x_m) = M^{-n} sum_k sigma(x_m, xi_k) e^{2 pi i m k / M} F_k`` in
    chunks of output points.  The result is real when ``f`` and the output
    are real to round-off.

    Raises
    ------
    PreconditionError
        If ``check`` is set and the symbol fails its class check.
    """
    g = f.grid
    n = g.dimension
    if sigma.dimension != n:
        raise DomainError("symbol and grid dimensions differ")
    if pad < 1:
        raise DomainError("pad must be at least 1")
    if check:
        rep = sigma.check()
        if not rep.ok:
            ratio, a, b, x, xi = rep.worst
            raise PreconditionError(f"{sigma.name} fails the symbol check at alpha={a} beta={b} "
                                    f"x={x} xi={xi} (ratio {ratio:.3g})")
    G = _padded(g, pad)
    M = G.points_per_axis
    h = g.spacing
    big = np.zeros(G.shape, dtype=complex)
    big[tuple(slice(0, s) for s in g.shape)] = f.values
    F = sfft.fftn(big, workers=workers())
    freqs = np.stack(np.meshgrid(*([sfft.fftfreq(M, h)] * n), indexing="ij"), -1)
    if sigma.separable is not None:
        a, b = sigma.separable
        out = sfft.ifftn(F * b(freqs), workers=workers())[tuple(slice(0, s) for s in g.shape)]
        out = out * a(g.coordinates())
    else:
        xs = g.coordinates().reshape(-1, n)
        idx = np.stack(np.meshgrid(*[np.arange(s) for s in g.shape], indexing="ij"), -1).reshape(-1, n)
        kk = np.stack(np.meshgrid(*([np.arange(M)] * n), indexing="ij"), -1).reshape(-1, n)
        xi = freqs.reshape(-1, n)
        Ff = F.ravel()
        out = np.empty(len(xs), dtype=complex)
        for c0 in range(0, len(xs), chunk):
            sl = slice(c0, c0 + chunk)
            S = sigma(xs[sl, None, :], xi[None, :, :])
            E = np.exp(2j * np.pi * (idx[sl] @ kk.T) / M)
            out[sl] = (S * E) @ Ff / M ** n
        out = out.reshape(g.shape)
    if not np.iscomplexobj(f.values) and np.max(np.abs(out.imag), initial=0.0) <= \
            1e-12 * max(1.0, float(np.max(np.abs(out.real), initial=0.0))):
        out = out.real
    return GridFunction(g, out)


def riesz_operator(j: int) -> Callable[[GridFunction], GridFunction]:
    op = lambda f: riesz_local(f, j)
    op.__name__ = f"riesz_{j}"
    return op


def psdo_operator(sigma: Symbol, pad: int = 2) -> Callable[[GridFunction], GridFunction]:
    rep = sigma.check()
    if not rep.ok:
        raise PreconditionError(f"{sigma.name} fails the symbol check: {rep.worst}")
    op = lambda f: psdo_apply(sigma, f, pad, check=False)
    op.__name__ = f"psdo_{sigma.name}"
    return op


# -- experiments ------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentResult:
    ratios: list
    worst: float
    skipped: list
    norm: str

    def to_rows(self) -> list[tuple]:
        return [(i, r) for i, r in enumerate(self.ratios)]


def _values(item) -> GridFunction:
    if isinstance(item, GridFunction):
        return item
    vals = getattr(item, "values", None)
    if isinstance(vals, GridFunction):
        return vals
    raise DomainError(f"cannot use {type(item).__name__} as a corpus element")


def _norm_fn(which: str, phi: GrowthFunction, params=None, lattice=None, s=None, p: float = 2.0):
    if which == "h_phi":
        from .maximal import h_phi_quasinorm
        return lambda f: h_phi_quasinorm(f, phi, params)
    if which == "bmo_phi":
        if lattice is None:
            raise DomainError("bmo_phi experiments need a lattice")
        from .bmo import bmo_phi_norm
        return lambda f: bmo_phi_norm(f, phi, phi.critical_degree(f.grid.dimension) if s is None else s,
                                      lattice)
    if which == "weighted_Lp":
        def nrm(f):
            g = f.grid
            w = phi(g.coordinates(), np.ones(g.shape))
            return float((np.sum(np.abs(f.values) ** p * w) * g.cell_volume) ** (1 / p))
        return nrm
    raise DomainError(f"unknown norm {which!r}")


def boundedness_experiment(op: Callable[[GridFunction], GridFunction], phi: GrowthFunction,
                           corpus: Sequence, which_norm: str = "h_phi", params=None,
                           lattice=None, s: int | None = None, p: float = 2.0) -> ExperimentResult:
    """Ratios ``||op f|| / ||f||`` over a corpus in the chosen norm.

    ``which_norm`` is ``"h_phi"``, ``"bmo_phi"`` or ``"weighted_Lp"``
    (``L^p`` with weight ``phi(., 1)``).  Zero-norm inputs are skipped and
    logged.
    """
    nrm = _norm_fn(which_norm, phi, params, lattice, s, p)
    ratios, skipped = [], []
    for i, item in enumerate(corpus):
        f = _values(item)
        base = nrm(f)
        if base == 0:
            log.info("skipping corpus element %d: zero %s norm", i, which_norm)
            skipped.append(i)
            continue
        ratios.append(nrm(op(f)) / base)
    return ExperimentResult(ratios, max(ratios) if ratios else 0.0, skipped, which_norm)


def far_field_constant(G: GridFunction, x0: Sequence[float], exponent: float, r_min: float) -> float:
    """``max G(x) |x - x0|^exponent`` over cell centres with ``|x - x0| >= r_min``."""
    g = G.grid
    d = np.sqrt(np.sum((g.coordinates() - np.asarray(x0, dtype=float)) ** 2, axis=-1))
    far = d >= r_min
    if not np.any(far):
        raise DomainError("no grid points in the far field")
    return float(np.max(np.abs(G.values[far]) * d[far] ** exponent))
