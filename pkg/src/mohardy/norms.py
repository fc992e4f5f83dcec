"""Luxembourg norms, the cube norms L^q_phi(Q) and ||chi_Q||."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, PreconditionError
from .grid import Cube, GridFunction
from .growth import GrowthFunction

__all__ = [
    "LuxembourgResult",
    "solve_modular",
    "luxembourg_norm",
    "modular",
    "lq_phi_norm",
    "chi_norm",
    "default_t_samples",
]


@dataclass(frozen=True)
class LuxembourgResult:
    norm: float
    modular_at_norm: float
    iterations: int
    bracket: tuple[float, float]

    def __float__(self):
        return self.norm


def default_t_samples() -> np.ndarray:
    return 2.0 ** np.arange(-10, 11)


def solve_modular(M: Callable[[float], float], scale: float, tol: float = 1e-10,
                  max_iter: int = 400) -> LuxembourgResult:
    """Smallest ``lam`` with ``M(lam) <= 1`` for nonincreasing ``M``.

    Geometric bisection from a bracket grown around ``scale``.  Returns the
    right endpoint, which always satisfies ``M <= 1``.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    if not scale > 0:
        raise DomainError("scale must be positive")
    it = 0
    hi = scale
    m_hi = M(hi)
    while not m_hi <= 1:
        if not np.isfinite(m_hi) and it > 60:
            raise DomainError("modular is not finite on the bracket")
        hi *= 4
        m_hi = M(hi)
        it += 1
        if it > 2000:
            raise DomainError("could not bracket the modular")
    lo = hi / 4
    m_lo = M(lo)
    while m_lo <= 1:
        hi, m_hi = lo, m_lo
        lo /= 4
        m_lo = M(lo)
        it += 1
        if lo == 0 or it > 4000:
            break
    while hi / lo - 1 > tol and it < max_iter:
        mid = math.sqrt(lo * hi)
        m_mid = M(mid)
        it += 1
        if m_mid <= 1:
            hi, m_hi = mid, m_mid
        else:
            lo = mid
        if abs(m_hi - 1) <= tol * 1e-3:
            break
    return LuxembourgResult(hi, float(m_hi), it, (lo, hi))


def _points(f: GridFunction):
    a = np.abs(f.values).ravel()
    nz = a > 0
    pts = f.grid.coordinates().reshape(-1, f.grid.dimension)[nz]
    return pts, a[nz]


def modular(phi: GrowthFunction, f: GridFunction, lam: float = 1.0) -> float:
    """``int phi(x, |f(x)| / lam) dx`` by the midpoint rule."""
    pts, a = _points(f)
    if a.size == 0:
        return 0.0
    return float(np.sum(phi(pts, a / lam)) * f.grid.cell_volume)


def luxembourg_norm(phi: GrowthFunction, f: GridFunction, tol: float = 1e-10) -> LuxembourgResult:
    """``inf{lam > 0 : int phi(x, |f|/lam) <= 1}`` by bisection.

    Examples
    --------
    >>> from mohardy.grid import Grid, GridFunction
    >>> from mohardy.growth import builtin_family
    >>> g = Grid.box(0, 2, 256)
    >>> f = GridFunction.from_callable(g, lambda x: (x[..., 0] <= 1) * 1.0)
    >>> round(luxembourg_norm(builtin_family("power", {"p": 1}), f).norm, 8)
    1.0
    """
    pts, a = _points(f)
    if a.size == 0:
        return LuxembourgResult(0.0, 0.0, 0, (0.0, 0.0))
    vol = f.grid.cell_volume
    if phi.x_independent:
        Phi = phi.orlicz
        M = lambda lam: float(np.sum(Phi(a / lam)) * vol)
    elif phi.weight is not None and phi.orlicz is not None:
        w = phi.weight(pts) * vol
        Phi = phi.orlicz
        M = lambda lam: float(np.dot(w, Phi(a / lam)))
    else:
        M = lambda lam: float(np.sum(phi(pts, a / lam)) * vol)
    return solve_modular(M, float(a.max()), tol)


def lq_phi_norm(f: GridFunction, Q: Cube | None, q: float, phi: GrowthFunction,
                t_samples: Sequence[float] | None = None) -> float:
    """``sup_t [phi(Q,t)^{-1} int |f|^q phi(x,t) dx]^{1/q}``, or ``max|f|`` if q = inf.

    ``Q=None`` uses the whole grid box.  Support outside ``Q`` is an error.
    """
    g = f.grid
    absf = np.abs(f.values)
    if Q is not None:
        box = g.index_box(Q)
        inside = np.zeros(g.shape, dtype=bool)
        inside[box] = True
        if np.any(absf[~inside] != 0):
            raise PreconditionError("function is not supported in the cube")
        vals = absf[box]
        pts = g.coordinates()[box]
    else:
        vals = absf
        pts = g.coordinates()
    if vals.size == 0:
        return 0.0
    if math.isinf(q):
        return float(vals.max())
    if q < 1:
        raise DomainError("q must be at least 1")
    t = np.asarray(default_t_samples() if t_samples is None else t_samples, dtype=float)
    pts = pts.reshape(-1, g.dimension)
    fq = vals.ravel() ** q
    if phi.orlicz is not None:
        w = np.ones(len(fq)) if phi.weight is None else phi.weight(pts)
        return float((np.dot(fq, w) / w.sum()) ** (1 / q))
    ph = phi(pts[:, None, :], t[None, :])
    ratio = (fq @ ph) / ph.sum(axis=0)
    return float(ratio.max() ** (1 / q))


def chi_norm(Q: Cube, phi: GrowthFunction, spacing: float | None = None,
             tol: float = 1e-12) -> float:
    """``||chi_Q||_{L^phi}``: the ``lam`` solving ``phi(Q, 1/lam) = 1``.

    Cached on ``phi`` per cube and quadrature spacing.
    """
    key = ("chi", Q.center, Q.side, spacing)
    hit = phi._cache.get(key)
    if hit is not None:
        return hit
    if phi.x_independent:
        vol = Q.volume
        M = lambda lam: float(vol * phi.orlicz(np.array([1.0 / lam]))[0])
    elif phi.weight is not None:
        wq = phi.weight_integral(Q, spacing)
        M = lambda lam: float(wq * phi.orlicz(np.array([1.0 / lam]))[0])
    else:
        from .growth import cube_nodes
        pts, vol = cube_nodes(Q, spacing)
        M = lambda lam: float(vol * np.sum(phi(pts, np.full(len(pts), 1.0 / lam))))
    val = solve_modular(M, 1.0, tol).norm
    phi._cache[key] = val
    return val
