"""Local maximal operators on grid functions.

The suprema over test functions and scales run over a finite, versioned
dictionary of normalized profiles and a logarithmic scale grid.  All
convolutions are linear (zero extension outside the box).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator

from ._fft import convolve_same, offsets
from .errors import DomainError, PreconditionError
from .grid import Grid, GridFunction
from .growth import GrowthFunction
from .norms import luxembourg_norm

__all__ = [
    "DICTIONARY_VERSION",
    "Profile",
    "TestFunctionDictionary",
    "MaximalParams",
    "bump",
    "default_dictionary",
    "default_psi0",
    "m_loc",
    "grand_maximal",
    "vertical_maximal",
    "nontangential_vertical_maximal",
    "peetre_maximal",
    "k_b_operator",
    "h_phi_quasinorm",
    "maximal_function",
    "conv_profile",
]

DICTIONARY_VERSION = "mohardy-dict-1"


def bump(r: np.ndarray) -> np.ndarray:
    """``exp(1 - 1/(1 - r^2))`` on ``|r| < 1``; peak value 1 at 0."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    m = np.abs(r) < 1
    out[m] = np.exp(1 - 1 / (1 - r[m] ** 2))
    return out


@dataclass(frozen=True, eq=False)
class Profile:
    """Test function ``u -> scale * base((u - shift) / dilation)``.

    ``base`` is supported in the ball of radius ``radius``.
    """

    base: Callable[[np.ndarray], np.ndarray]
    radius: float
    name: str
    dilation: float = 1.0
    shift: tuple[float, ...] = ()
    scale: float = 1.0

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.shift:
            u = u - np.asarray(self.shift)
        return self.scale * self.base(u / self.dilation)

    @property
    def support(self) -> float:
        s = math.sqrt(sum(c * c for c in self.shift)) if self.shift else 0.0
        return self.radius * self.dilation + s


def _r(u):
    return np.sqrt(np.sum(u ** 2, axis=-1))


def window(r: np.ndarray, N: int) -> np.ndarray:
    """``(1 - r^2)_+^{N+1}``: C^N with bounded derivatives up to order N+1."""
    r = np.asarray(r, dtype=float)
    return np.clip(1 - r ** 2, 0, None) ** (N + 1)


def _base_profiles(n: int, N: int) -> list[tuple[str, Callable, float]]:
    e1 = np.zeros(n)
    e1[0] = 0.5

    def w(r):
        return window(r, N)

    return [
        ("bump", lambda u: w(_r(u)), 1.0),
        ("narrow", lambda u: w(2 * _r(u)), 0.5),
        ("odd", lambda u: u[..., 0] * w(_r(u)), 1.0),
        ("cos1", lambda u: np.cos(np.pi * u[..., 0]) * w(_r(u)), 1.0),
        ("sin1", lambda u: np.sin(np.pi * u[..., 0]) * w(_r(u)), 1.0),
        ("cos2", lambda u: np.cos(2 * np.pi * u[..., 0]) * w(_r(u)), 1.0),
        ("right", lambda u: w(2 * _r(u - e1)), 1.0),
        ("left", lambda u: w(2 * _r(u + e1)), 1.0),
        ("hat", lambda u: (1 - 3 * _r(u) ** 2) * w(_r(u)), 1.0),
    ]


def _derivative_sups(func: Callable, radius: float, n: int, N: int) -> np.ndarray:
    """``D_k = max_{|alpha|=k} sup |d^alpha func|`` for ``k <= N`` by central differences."""
    m = 4097 if n == 1 else 257
    ax = np.linspace(-radius, radius, m)
    d = ax[1] - ax[0]
    u = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), -1)
    level = {(0,) * n: func(u)}
    sups = [float(np.max(np.abs(level[(0,) * n])))]
    for k in range(1, N + 1):
        nxt = {}
        for alpha, arr in level.items():
            for ax_i in range(n):
                beta = list(alpha)
                beta[ax_i] += 1
                beta = tuple(beta)
                if beta not in nxt:
                    nxt[beta] = np.gradient(arr, d, axis=ax_i, edge_order=2)
        level = nxt
        sups.append(max(float(np.max(np.abs(a))) for a in level.values()))
    return np.array(sups)


@dataclass(frozen=True, eq=False)
class TestFunctionDictionary:
    """Finite family of profiles with ``D_N`` norm at most one."""

    profiles: tuple[Profile, ...]
    N: int
    R: float
    dimension: int
    version: str = DICTIONARY_VERSION

    def __post_init__(self):
        if not self.profiles:
            raise DomainError("dictionary is empty")

    def __len__(self):
        return len(self.profiles)


def default_dictionary(n: int, N: int = 2, R: float = 1.0) -> TestFunctionDictionary:
    """Nine unit profiles, plus dilates and translates up to radius ``R``.

    Profiles are built on the window ``(1 - r^2)_+^{N+1}``, which has the
    ``N`` bounded derivatives the ``D_N`` norm measures.

    Dilates by ``2^k`` and translates by ``+-2^k`` of the basic bump are
    added while they stay inside the ball of radius ``R``; with ``R = 1``
    only the nine unit profiles remain, so dictionaries are nested in ``R``.
    """
    if N < 0:
        raise DomainError("N must be nonnegative")
    cache = _DICT_CACHE.get((n, N))
    if cache is None:
        cache = [(name, f, rad, _derivative_sups(f, 1.0, n, N)) for name, f, rad in _base_profiles(n, N)]
        _DICT_CACHE[(n, N)] = cache
    profs = []
    for name, f, rad, D in cache:
        profs.append(Profile(f, rad, name, scale=1.0 / D.max()))
    _, fb, _, Db = cache[0]
    k = 1
    while 2.0 ** k <= R + 1e-12:
        r = 2.0 ** k
        norm = max(Db[j] / r ** j for j in range(len(Db)))
        profs.append(Profile(fb, 1.0, f"bump/{r:g}", dilation=r, scale=1.0 / norm))
        k += 1
    k = 0
    while 2.0 ** k + 1 <= R + 1e-12:
        c = 2.0 ** k
        for sgn in (1, -1):
            sh = [0.0] * n
            sh[0] = sgn * c
            profs.append(Profile(fb, 1.0, f"bump@{sgn * c:g}", shift=tuple(sh), scale=1.0 / Db.max()))
        k += 1
    return TestFunctionDictionary(tuple(profs), N, R, n)


_DICT_CACHE: dict = {}


def default_psi0(n: int = 1) -> Profile:
    """Basic bump; its integral is positive."""
    return Profile(lambda u: bump(_r(u)), 1.0, "psi0")


@dataclass(frozen=True)
class MaximalParams:
    """Knobs for the maximal operators.

    ``R`` is the support radius for the grand maximal function; ``None``
    means ``2^{3(10+n)}`` truncated to half the box.
    """

    N: int = 2
    R: float | None = None
    A: float = 2.0
    B: float = 1.0
    j_max: int | None = None
    t_points: int = 32
    size_cap: float = 1.0

    def __post_init__(self):
        if self.N < 2:
            raise DomainError("N must be at least 2")
        if self.A < 0 or self.B < 0:
            raise DomainError("A and B must be nonnegative")
        if self.j_max is not None and self.j_max < 0:
            raise DomainError("j_max must be nonnegative")

    def t_grid(self, grid: Grid) -> np.ndarray:
        h = grid.spacing
        return np.geomspace(2 * h, 1.0, self.t_points + 1)[:-1]

    def jmax(self, grid: Grid) -> int:
        if self.j_max is not None:
            return self.j_max
        return max(0, int(math.floor(math.log2(1 / grid.spacing))) - 2)

    def grand_R(self, grid: Grid) -> float:
        R = 2.0 ** (3 * (10 + grid.dimension)) if self.R is None else self.R
        return min(R, grid.extent[0] / 2)


# -- kernels -------------------------------------------------------------------


def conv_profile(values: np.ndarray, grid: Grid, prof: Profile | Callable, t: float,
                 support: float | None = None) -> np.ndarray:
    """``(prof_t * f)`` at the cell centres, ``prof_t(x) = t^{-n} prof(x/t)``."""
    h = grid.spacing
    n = grid.dimension
    sup = prof.support if support is None else support
    rc = int(math.ceil(sup * t / h))
    rc = min(rc, grid.points_per_axis)
    d = offsets(rc, n) * h
    K = prof(d / t) / t ** n
    return convolve_same(values, K) * h ** n


def _disk_max(a: np.ndarray, radius_cells: float) -> np.ndarray:
    """``max_{|z| < radius} a(x + z)`` over cell offsets, exact union of rectangles."""
    r = radius_cells
    if r <= 1:
        return a
    n = a.ndim
    if n == 1:
        w = int(math.ceil(r) - 1)
        return ndimage.maximum_filter1d(a, 2 * w + 1, mode="constant", cval=0.0)
    # offsets (i, j) with i^2 + j^2 < r^2 are the union over i of the
    # rectangles [-i, i] x [-w_i, w_i], w_i the widest admissible column
    out = a.copy()
    i = 0
    while i * i < r * r:
        w = int(math.floor(math.sqrt(r * r - i * i)))
        while i * i + w * w >= r * r:
            w -= 1
        rect = ndimage.maximum_filter(a, size=(2 * i + 1, 2 * w + 1), mode="constant", cval=0.0)
        np.maximum(out, rect, out=out)
        i += 1
    return out


# -- operators -----------------------------------------------------------------


def _window_sums(arr: np.ndarray, k: int) -> np.ndarray:
    out = arr
    for ax in range(arr.ndim):
        c = np.cumsum(out, axis=ax)
        c = np.concatenate([np.zeros_like(np.take(c, [0], axis=ax)), c], axis=ax)
        n_ax = c.shape[ax]
        out = np.take(c, np.arange(k, n_ax), axis=ax) - np.take(c, np.arange(0, n_ax - k), axis=ax)
    return out


def m_loc(f: GridFunction, size_cap: float = 1.0) -> GridFunction:
    """Largest average of ``|f|`` over grid-aligned cubes ``Q`` containing ``x``, ``|Q| <= cap``.

    Every integer cell count per side is scanned; cubes may stick out of
    the box (zero extension).
    """
    if not size_cap > 0:
        raise DomainError("size_cap must be positive")
    g = f.grid
    n = g.dimension
    a = np.abs(f.values).astype(float)
    kmax = int(math.floor(size_cap ** (1.0 / n) / g.spacing + 1e-9))
    out = a.copy()
    for k in range(2, kmax + 1):
        pad = np.pad(a, k - 1)
        means = _window_sums(pad, k) / k ** n
        mx = ndimage.maximum_filter(means, size=k, mode="constant", cval=0.0)
        sl = tuple(slice(k // 2, k // 2 + s) for s in a.shape)
        np.maximum(out, mx[sl], out=out)
    return GridFunction(g, out)


def grand_maximal(f: GridFunction, params: MaximalParams | None = None,
                  dictionary: TestFunctionDictionary | None = None,
                  variant: str = "vertical") -> GridFunction:
    """``sup_{psi, t} |psi_t * f|`` (vertical) or with ``sup_{|x-z|<t}`` (nontangential)."""
    params = params or MaximalParams()
    g = f.grid
    if dictionary is None:
        dictionary = default_dictionary(g.dimension, params.N, 1.0)
    if len(dictionary) == 0:
        raise DomainError("dictionary is empty")
    if variant not in ("vertical", "nontangential"):
        raise DomainError(f"unknown variant {variant!r}")
    vals = np.real(f.values).astype(float) if not f.is_complex else f.values
    out = np.zeros(g.shape)
    for t in params.t_grid(g):
        level = np.zeros(g.shape)
        for prof in dictionary.profiles:
            np.maximum(level, np.abs(conv_profile(vals, g, prof, t)), out=level)
        if variant == "nontangential":
            level = _disk_max(level, t / g.spacing)
        np.maximum(out, level, out=out)
    return GridFunction(g, out)


def _as_profile(psi0) -> Profile:
    if isinstance(psi0, Profile):
        return psi0
    if isinstance(psi0, GridFunction):
        pg = psi0.grid
        interp = RegularGridInterpolator(pg.axes(), psi0.values, method="linear",
                                         bounds_error=False, fill_value=0.0)
        corners = np.array([pg.origin, np.add(pg.origin, pg.extent)])
        rad = float(np.sqrt(np.sum(np.max(np.abs(corners), axis=0) ** 2)))
        n = pg.dimension

        def ev(u):
            u = np.asarray(u, dtype=float)
            return interp(u.reshape(-1, n)).reshape(u.shape[:-1])

        return Profile(ev, rad, "psi0-sampled")
    if callable(psi0):
        return Profile(psi0, 1.0, "psi0")
    raise DomainError("psi0 must be a Profile, GridFunction or callable")


def _profile_mass(prof: Profile, n: int) -> float:
    m = 2049 if n == 1 else 257
    s = prof.support
    ax = np.linspace(-s, s, m)
    d = ax[1] - ax[0]
    u = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), -1)
    return float(np.sum(prof(u)) * d ** n)


def _dyadic_convs(f: GridFunction, psi0, j_max: int) -> list[np.ndarray]:
    g = f.grid
    prof = _as_profile(psi0)
    if abs(_profile_mass(prof, g.dimension)) < 1e-12:
        raise PreconditionError("psi0 must have nonzero integral")
    vals = f.values
    return [np.abs(conv_profile(vals, g, prof, 2.0 ** -j)) for j in range(j_max + 1)]


def vertical_maximal(f: GridFunction, psi0=None, j_max: int | None = None) -> GridFunction:
    """``sup_{0 <= j <= j_max} |(psi0)_j * f|`` with ``(psi0)_j = 2^{jn} psi0(2^j .)``."""
    g = f.grid
    psi0 = default_psi0(g.dimension) if psi0 is None else psi0
    j_max = MaximalParams().jmax(g) if j_max is None else j_max
    convs = _dyadic_convs(f, psi0, j_max)
    return GridFunction(g, np.max(convs, axis=0))


def nontangential_vertical_maximal(f: GridFunction, psi0=None,
                                   params: MaximalParams | None = None) -> GridFunction:
    """``sup_{t in (0,1)} sup_{|x-y|<t} |(psi0)_t * f(y)|`` on the t-grid."""
    params = params or MaximalParams()
    g = f.grid
    prof = _as_profile(default_psi0(g.dimension) if psi0 is None else psi0)
    if abs(_profile_mass(prof, g.dimension)) < 1e-12:
        raise PreconditionError("psi0 must have nonzero integral")
    out = np.zeros(g.shape)
    for t in params.t_grid(g):
        c = np.abs(conv_profile(f.values, g, prof, t))
        np.maximum(out, _disk_max(c, t / g.spacing), out=out)
    return GridFunction(g, out)


def peetre_maximal(f: GridFunction, psi0=None, A: float = 2.0, B: float = 1.0,
                   j_max: int | None = None, chunk: int = 512) -> GridFunction:
    """``sup_{j, y} |(psi0)_j * f(x - y)| / ((1 + 2^j|y|)^A 2^{B|y|})`` over grid offsets."""
    if A < 0 or B < 0:
        raise DomainError("A and B must be nonnegative")
    g = f.grid
    psi0 = default_psi0(g.dimension) if psi0 is None else psi0
    j_max = MaximalParams().jmax(g) if j_max is None else j_max
    convs = _dyadic_convs(f, psi0, j_max)
    X = g.coordinates().reshape(-1, g.dimension)
    out = np.zeros(len(X))
    for j, c in enumerate(convs):
        u = c.ravel()
        for s in range(0, len(X), chunk):
            diff = X[s:s + chunk, None, :] - X[None, :, :]
            r = np.sqrt(np.sum(diff ** 2, axis=-1))
            m = (1 + 2.0 ** j * r) ** A * 2.0 ** (B * r)
            np.maximum(out[s:s + chunk], np.max(u[None, :] / m, axis=1), out=out[s:s + chunk])
    return GridFunction(g, out.reshape(g.shape))


def k_b_operator(f: GridFunction, B: float) -> GridFunction:
    """``int |f(y)| 2^{-B|x-y|} dy`` over the box."""
    if B < 0:
        raise DomainError("B must be nonnegative")
    g = f.grid
    N = g.points_per_axis
    d = offsets(N - 1, g.dimension) * g.spacing
    K = 2.0 ** (-B * np.sqrt(np.sum(d ** 2, axis=-1)))
    out = convolve_same(np.abs(f.values).astype(float), K) * g.cell_volume
    return GridFunction(g, np.maximum(out, 0.0))


def maximal_function(f: GridFunction, which: str, params: MaximalParams | None = None,
                     psi0=None) -> GridFunction:
    """Dispatch by name: grand, grand0, nontangential, vertical, vertical_nt, peetre, mloc."""
    params = params or MaximalParams()
    n = f.grid.dimension
    if which == "grand":
        d = default_dictionary(n, params.N, params.grand_R(f.grid))
        return grand_maximal(f, params, d, "vertical")
    if which == "grand0":
        return grand_maximal(f, params, default_dictionary(n, params.N, 1.0), "vertical")
    if which == "nontangential":
        d = default_dictionary(n, params.N, params.grand_R(f.grid))
        return grand_maximal(f, params, d, "nontangential")
    if which == "vertical":
        return vertical_maximal(f, psi0, params.jmax(f.grid))
    if which == "vertical_nt":
        return nontangential_vertical_maximal(f, psi0, params)
    if which == "peetre":
        return peetre_maximal(f, psi0, params.A, params.B, params.jmax(f.grid))
    if which == "mloc":
        return m_loc(f, params.size_cap)
    raise DomainError(f"unknown maximal function {which!r}")


def h_phi_quasinorm(f: GridFunction, phi: GrowthFunction, params: MaximalParams | None = None,
                    which: str = "grand", psi0=None, tol: float = 1e-10) -> float:
    """Luxembourg norm of the chosen maximal function of ``f``."""
    return luxembourg_norm(phi, maximal_function(f, which, params, psi0), tol).norm
