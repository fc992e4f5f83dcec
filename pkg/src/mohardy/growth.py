"""Growth functions phi(x, t), uniform type checks and builtin families.

Evaluators follow one broadcasting convention: ``x`` has shape
``(..., n)`` and ``t`` broadcasts against ``x.shape[:-1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping

import numpy as np

from .errors import DomainError, NotAGrowthFunctionError
from .grid import Cube

__all__ = [
    "GrowthFunction",
    "OrliczFunction",
    "TypeCheck",
    "TypeSamples",
    "builtin_family",
    "from_descriptor",
    "check_uniform_type",
    "default_type_samples",
    "estimate_lower_type_index",
    "quasi_subadditivity_constant",
    "regularize",
    "cube_nodes",
]

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class OrliczFunction:
    """An Orlicz function ``Phi(t)`` with type exponents ``(p0, p1)``."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    p0: float
    p1: float = 1.0
    name: str = "orlicz"

    def __call__(self, t):
        return self.evaluator(np.asarray(t, dtype=float))

    def check(self, horizon: float = 2.0 ** 30) -> None:
        t = np.concatenate([[0.0], np.geomspace(2.0 ** -30, horizon, 121)])
        v = self(t)
        if v[0] != 0 or np.any(v[1:] <= 0) or np.any(np.diff(v) < 0):
            raise DomainError(f"{self.name}: not an Orlicz function on samples")
        if v[-1] <= v[len(v) // 2]:
            raise DomainError(f"{self.name}: no growth up to the sample horizon")


@dataclass(frozen=True, eq=False)
class GrowthFunction:
    """Evaluator with declared type metadata.

    Parameters
    ----------
    evaluator
        ``phi(x, t)``.
    lower_type, lower_constant
        Declared uniform lower type ``p`` and constant.  ``lower_constant``
        may be ``inf`` when the index is not attained; then
        ``lower_constant_fn`` supplies constants for smaller exponents.
    upper_type, upper_constant
        Declared uniform upper type (1 for proper growth functions).
    q
        Declared uniform local weight class index.
    weight, orlicz
        Set for product families ``weight(x) * orlicz(t)``; enables exact
        cube measures.
    whole_space_finite
        Whether ``phi(R^n, t)`` is finite (then single atoms are allowed).
    """

    evaluator: Evaluator
    lower_type: float
    lower_constant: float = 1.0
    upper_type: float = 1.0
    upper_constant: float = 1.0
    q: float = 1.0
    name: str = "custom"
    params: Mapping[str, Any] = field(default_factory=dict)
    lower_constant_fn: Callable[[float], float] | None = None
    weight: Callable[[np.ndarray], np.ndarray] | None = None
    orlicz: Callable[[np.ndarray], np.ndarray] | None = None
    whole_space_finite: bool = False
    strictly_increasing: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __call__(self, x, t):
        return self.evaluator(np.asarray(x, dtype=float), np.asarray(t, dtype=float))

    @property
    def x_independent(self) -> bool:
        return self.orlicz is not None and self.weight is None

    def critical_degree(self, n: int) -> int:
        """``m(phi) = floor(n (q/p - 1))``, clipped at zero."""
        return max(0, int(math.floor(n * (self.q / self.lower_type - 1) + 1e-12)))

    def default_N(self, n: int) -> int:
        return self.critical_degree(n) + 2

    def declared_constant(self, p: float, side: str) -> float:
        if side == "lower":
            if self.lower_constant_fn is not None:
                return float(self.lower_constant_fn(p))
            return self.lower_constant if p <= self.lower_type + 1e-12 else math.inf
        if side == "upper":
            return self.upper_constant if p >= self.upper_type - 1e-12 else math.inf
        raise DomainError(f"side must be 'lower' or 'upper', got {side!r}")

    def validate(self, dimension: int = 1) -> "GrowthFunction":
        """Sampled positivity, monotonicity and ``phi(x, 0) = 0``."""
        xs = np.linspace(-8, 8, 9)
        x = np.stack(np.meshgrid(*([xs] * dimension), indexing="ij"), -1).reshape(-1, dimension)
        t = np.concatenate([[0.0], 2.0 ** np.arange(-16, 17)])
        v = self(x[:, None, :], t[None, :])
        if np.any(~np.isfinite(v)):
            raise DomainError(f"{self.name}: non-finite values on samples")
        if np.any(v[:, 0] != 0):
            raise DomainError(f"{self.name}: phi(x, 0) must vanish")
        if np.any(v[:, 1:] <= 0):
            raise DomainError(f"{self.name}: phi(x, t) = 0 for some t > 0")
        if np.any(np.diff(v, axis=1) < -1e-14 * np.abs(v[:, 1:])):
            raise DomainError(f"{self.name}: not nondecreasing in t")
        return self

    def _renamed(self, family: str, params: Mapping) -> "GrowthFunction":
        return replace(self, params={"family": family, **dict(params)}, _cache={})

    # -- cube measures ------------------------------------------------------

    def measure(self, cube: Cube, t, spacing: float | None = None) -> np.ndarray:
        """``phi(Q, t) = int_Q phi(x, t) dx`` for an array of ``t``.

        Quadrature on the cube's own midpoint nodes at roughly ``spacing``.
        Product families reuse a cached weight integral.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.x_independent:
            return cube.volume * self.orlicz(t)
        if self.weight is not None and self.orlicz is not None:
            return self.weight_integral(cube, spacing) * self.orlicz(t)
        pts, vol = cube_nodes(cube, spacing)
        return vol * self(pts[:, None, :], t[None, :]).sum(axis=0)

    def weight_integral(self, cube: Cube, spacing: float | None = None) -> float:
        key = ("w", cube.center, cube.side, spacing)
        val = self._cache.get(key)
        if val is None:
            pts, vol = cube_nodes(cube, spacing)
            val = float(vol * np.sum(self.weight(pts)))
            self._cache[key] = val
        return val


def cube_nodes(cube: Cube, spacing: float | None = None, max_per_axis: int | None = None):
    """Midpoint nodes of ``cube`` split into ``m`` cells per axis."""
    n = cube.dimension
    if max_per_axis is None:
        max_per_axis = 4096 if n == 1 else 256
    if spacing is None:
        m = 64 if n == 1 else 32
    else:
        m = int(min(max(1, round(cube.side / spacing)), max_per_axis))
    d = cube.side / m
    ax = [c - cube.side / 2 + (np.arange(m) + 0.5) * d for c in cube.center]
    pts = np.stack(np.meshgrid(*ax, indexing="ij"), -1).reshape(-1, n)
    return pts, d ** n


# -- type checks ---------------------------------------------------------------


@dataclass(frozen=True)
class TypeSamples:
    x: np.ndarray  # (m, n)
    s: np.ndarray  # (m,)
    t: np.ndarray  # (m,)

    def __len__(self):
        return len(self.s)


@dataclass(frozen=True)
class TypeCheck:
    holds: bool
    worst_constant: float
    declared_constant: float


def default_type_samples(dimension: int, side: str, kmin: int = -16, kmax: int = 16,
                         x_points: np.ndarray | None = None) -> TypeSamples:
    """Tensor product of dyadic ``s``, dyadic ``t`` and a few points ``x``."""
    if x_points is None:
        xs = np.array([-4.0, -1.0, 0.0, 0.5, 3.0])
        x_points = np.stack(np.meshgrid(*([xs] * dimension), indexing="ij"), -1).reshape(-1, dimension)
    x_points = np.asarray(x_points, dtype=float).reshape(-1, dimension)
    if side == "lower":
        s = 2.0 ** np.arange(kmin, 1)
    elif side == "upper":
        s = 2.0 ** np.arange(0, kmax + 1)
    else:
        raise DomainError(f"side must be 'lower' or 'upper', got {side!r}")
    t = 2.0 ** np.arange(kmin, kmax + 1)
    X, S, T = np.meshgrid(np.arange(len(x_points)), s, t, indexing="ij")
    return TypeSamples(x_points[X.ravel()], S.ravel(), T.ravel())


def _type_ratios(phi: GrowthFunction, p: float, samples: TypeSamples) -> np.ndarray:
    x, s, t = samples.x, samples.s, samples.t
    num = phi(x, s * t)
    den = phi(x, t) * s ** p
    ok = den > 0
    return num[ok] / den[ok]


def check_uniform_type(phi: GrowthFunction, p: float, side: str,
                       samples: TypeSamples | None = None, dimension: int = 1,
                       constant: float | None = None) -> TypeCheck:
    """Worst sampled constant in ``phi(x, st) <= C s^p phi(x, t)``.

    ``holds`` compares against ``constant`` or else the declared constant.
    """
    if samples is None:
        samples = default_type_samples(dimension, side)
    if len(samples) == 0:
        raise DomainError("empty sample set")
    if side == "lower" and np.any((samples.s < 0) | (samples.s > 1)):
        raise DomainError("lower type samples need s in [0, 1]")
    if side == "upper" and np.any(samples.s < 1):
        raise DomainError("upper type samples need s >= 1")
    r = _type_ratios(phi, p, samples)
    worst = float(r.max()) if r.size else 0.0
    declared = phi.declared_constant(p, side) if constant is None else float(constant)
    return TypeCheck(worst <= declared * (1 + 1e-12), worst, declared)


def estimate_lower_type_index(phi: GrowthFunction, tolerance: float = 1e-3,
                              samples: TypeSamples | None = None, dimension: int = 1,
                              cap: float = 64.0) -> float:
    """Largest ``p`` in ``(0, 1]`` passing the sampled lower type test.

    A trial ``p`` passes when its worst constant stays below ``cap`` and is
    already attained on the half of the scale range with
    ``s >= sqrt(s_min)``, so the constant does not grow as the scale range
    widens.  Exact for power laws; a sampled proxy in general.
    """
    if tolerance <= 0:
        raise DomainError("tolerance must be positive")
    if samples is None:
        samples = default_type_samples(dimension, "lower")
    smin = samples.s[samples.s > 0].min()
    near = samples.s >= math.sqrt(smin)
    sub = TypeSamples(samples.x[near], samples.s[near], samples.t[near])

    def passes(p):
        full = _type_ratios(phi, p, samples).max()
        half = _type_ratios(phi, p, sub).max()
        return full <= cap and full <= half * (1 + 1e-9)

    lo, hi = 0.0, 1.0
    if passes(hi):
        return 1.0
    if not passes(tolerance / 2):
        raise NotAGrowthFunctionError(f"{phi.name}: no lower type in (0, 1] on samples")
    lo = tolerance / 2
    while hi - lo > tolerance / 2:
        mid = 0.5 * (lo + hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
    return lo


def quasi_subadditivity_constant(phi: GrowthFunction, rng: np.random.Generator,
                                 trials: int = 200, length: int = 8,
                                 dimension: int = 1) -> float:
    """Worst sampled ``phi(x, sum t_j) / sum phi(x, t_j)``."""
    x = rng.uniform(-4, 4, size=(trials, 1, dimension))
    t = 2.0 ** rng.uniform(-12, 12, size=(trials, length))
    lhs = phi(x[:, 0, :], t.sum(axis=1))
    rhs = phi(x, t).sum(axis=1)
    return float(np.max(lhs / rhs))


def regularize(phi: GrowthFunction, panels: int = 60, order: int = 8) -> GrowthFunction:
    """``phi~(x, t) = int_0^t phi(x, s) / s ds`` by composite Gauss-Legendre.

    Uses ``s = t e^{-u}``, so the integral is ``int_0^inf phi(x, t e^{-u}) du``
    truncated at ``u = panels``.
    """
    g, w = np.polynomial.legendre.leggauss(order)
    u = (np.arange(panels)[:, None] + 0.5 + 0.5 * g[None, :]).ravel()
    wu = np.tile(0.5 * w, panels)
    decay = np.exp(-u)

    def ev(x, t):
        x = np.asarray(x, dtype=float)
        t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
        vals = phi.evaluator(x[..., None, :], t[..., None] * decay)
        return vals @ wu

    return GrowthFunction(ev, phi.lower_type, math.inf, phi.upper_type, math.inf, phi.q,
                          name=f"regularized({phi.name})", params=dict(phi.params),
                          whole_space_finite=phi.whole_space_finite)


# -- builtin families ----------------------------------------------------------


def _norm(x):
    return np.sqrt(np.sum(np.asarray(x) ** 2, axis=-1))


def _weight(desc) -> tuple[Callable | None, float, str, bool]:
    """(callable or None for w=1, declared q, label, whole-space finite)."""
    if desc is None or desc == "one":
        return None, 1.0, "1", False
    kind = desc.get("kind", "constant")
    if kind == "constant":
        c = float(desc.get("value", 1.0))
        if c <= 0:
            raise DomainError("constant weight must be positive")
        return (lambda x: np.full(np.shape(x)[:-1], c)), 1.0, f"{c:g}", False
    if kind == "exp":
        rate = float(desc.get("rate", 1.0))
        cap = desc.get("cap")
        if cap is None:
            return (lambda x: np.exp(rate * _norm(x))), 1.0, f"exp({rate:g}|x|)", False
        cap = float(cap)
        if cap < 1:
            raise DomainError("exponential weight cap must be at least 1")
        return (lambda x: np.minimum(np.exp(rate * _norm(x)), cap)), 1.0, \
            f"min(exp({rate:g}|x|),{cap:g})", False
    if kind == "poly":
        gamma = float(desc.get("gamma", 0.5))
        finite = gamma < -1  # integrable on the line; informational only
        return (lambda x: (1 + _norm(x)) ** gamma), 1.0, f"(1+|x|)^{gamma:g}", finite
    raise DomainError(f"unknown weight kind {kind!r}")


def _theta_lower_constant(p: float) -> float:
    # sup_s s^{1-p} (1 + ln(1/s)) for the ratio ln(e+t)/ln(e+st)
    if p >= 1:
        return math.inf
    return math.exp(-p) / (1 - p)


def _orlicz(desc) -> tuple[Callable, float, float, float, Callable | None, str]:
    """(Phi, lower type, lower const, upper type, lower const fn, label)."""
    kind = desc.get("kind", "power")
    if kind == "power":
        p = float(desc.get("p", 1.0))
        if p <= 0:
            raise DomainError("power exponent must be positive")
        low = min(p, 1.0)

        def lc(r, p=p):
            return 1.0 if r <= p + 1e-12 else math.inf

        return (lambda t: np.power(t, p)), low, 1.0, max(p, 1.0), lc, f"t^{p:g}"
    if kind == "theta":
        p = float(desc.get("p", 0.5))
        if not 0 < p < 1:
            raise DomainError("theta lower type must lie in (0, 1)")
        return (lambda t: t / np.log(np.e + t)), p, _theta_lower_constant(p), 1.0, \
            _theta_lower_constant, "t/ln(e+t)"
    raise DomainError(f"unknown Orlicz kind {kind!r}")


def builtin_family(name: str, params: Mapping[str, Any] | None = None) -> GrowthFunction:
    """Construct one of the named families.

    ``product``
        ``weight(x) * Phi(t)``; ``params = {"weight": ..., "orlicz": ...}``.
    ``power``
        ``t^p`` (``p > 1`` allowed as an Orlicz-type comparison case).
    ``theta``
        ``t / ln(e + t)``; ``params = {"p": lower type}``.
    ``log``
        ``t^alpha / ([ln(e+|x|)]^beta + [ln(e+t)]^gamma)``.
    ``phi_alpha_weighted``
        ``(1+|x|)^gamma t^p`` carrying an ``alpha`` tag for the
        ``(1+t)^alpha``-normalized weight class.
    """
    params = dict(params or {})
    if name == "power":
        return builtin_family("product", {"weight": "one",
                                          "orlicz": {"kind": "power", "p": params.get("p", 1.0)}}) \
            ._renamed("power", params)
    if name == "theta":
        return builtin_family("product", {"weight": "one",
                                          "orlicz": {"kind": "theta", "p": params.get("p", 0.5)}}) \
            ._renamed("theta", params)
    if name == "product":
        w, q, wlabel, finite = _weight(params.get("weight", "one"))
        Phi, p, C, up, lcfn, plabel = _orlicz(params.get("orlicz", {"kind": "power", "p": 1.0}))
        if w is None:
            ev = (lambda x, t: np.broadcast_to(Phi(np.asarray(t, dtype=float)),
                                               np.broadcast_shapes(np.shape(x)[:-1], np.shape(t))).copy())
        else:
            ev = (lambda x, t: w(x) * Phi(t))
        phi = GrowthFunction(ev, p, C, up, 1.0, q, name=f"{wlabel}*{plabel}", params=params,
                             lower_constant_fn=lcfn, weight=w, orlicz=Phi,
                             whole_space_finite=finite)
        return phi.validate()
    if name == "log":
        a = float(params.get("alpha", 1.0))
        b = float(params.get("beta", 1.0))
        g = float(params.get("gamma", 1.0))
        if not 0 < a <= 1:
            raise DomainError("log family needs alpha in (0, 1]")
        if b < 0:
            raise DomainError("log family needs beta >= 0")
        if not 0 <= g <= 2 * a * (1 + math.log(2)):
            raise DomainError("log family needs gamma in [0, 2 alpha (1 + ln 2)]")

        def ev(x, t):
            t = np.asarray(t, dtype=float)
            return t ** a / (np.log(np.e + _norm(x)) ** b + np.log(np.e + t) ** g)

        def lcfn(p, a=a, g=g):
            if p > a + 1e-12:
                return math.inf
            if g == 0:
                return 1.0
            if p >= a - 1e-12:
                return math.inf
            d = a - p
            v = max(0.0, g / d - 1)
            return max(1.0, math.exp(-d * v) * (1 + v) ** g)

        return GrowthFunction(ev, a, lcfn(a), 1.0, 1.0, 1.0, name=f"log({a:g},{b:g},{g:g})",
                              params={"alpha": a, "beta": b, "gamma": g},
                              lower_constant_fn=lcfn).validate()
    if name == "phi_alpha_weighted":
        gamma = float(params.get("gamma", 0.5))
        p = float(params.get("p", 1.0))
        alpha = float(params.get("alpha", 1.0))
        if alpha <= 0:
            raise DomainError("alpha must be positive")
        phi = builtin_family("product", {"weight": {"kind": "poly", "gamma": gamma},
                                         "orlicz": {"kind": "power", "p": p}})
        return phi._renamed("phi_alpha_weighted", {"gamma": gamma, "p": p, "alpha": alpha})
    raise DomainError(f"unknown growth family {name!r}")


def from_descriptor(desc: Mapping[str, Any]) -> GrowthFunction:
    """Build from a JSON-style descriptor such as ``{"family": "log", "alpha": 1}``."""
    desc = dict(desc)
    name = desc.pop("family", None)
    if name is None:
        raise DomainError("growth descriptor needs a 'family' key")
    return builtin_family(name, desc)
