"""BMO-type norms over cube lattices and the scalar ``phi``/``psi``/``Phi_0`` calculus.

All cube integrals are midpoint sums over whole grid cells.  Cubes of one
size share a reference basis, so minimizing polynomials for a whole size
class come from one small Gram solve applied to a stack of windows.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .czd import _basis, monomial_exponents
from .errors import DomainError, PreconditionError
from .grid import Cube, Grid, GridFunction
from .growth import GrowthFunction, OrliczFunction, TypeCheck, default_type_samples, _type_ratios
from .norms import chi_norm, solve_modular
from .weights import CubeLattice, box_sums

__all__ = [
    "PhiIncreasing",
    "BmoReport",
    "bmo_phi_norm",
    "bmo_phi_report",
    "global_bmo_phi_norm",
    "nakai_yabuta_norms",
    "lattice_chi_norms",
    "cube_oscillations",
    "psi_from_phi",
    "phi0_from_psi",
    "orlicz_growth",
    "orlicz_type_check",
    "duality_pairing_bound",
    "multiplier_check",
    "MultiplierReport",
]

_WINDOW_BUDGET = 1 << 22


# -- scalar functions ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PhiIncreasing:
    """A positive increasing ``phi`` on ``(0, inf)``.

    Parameters
    ----------
    evaluator
        Vectorized ``r -> phi(r)``.
    almost_decreasing_ratio
        Whether ``phi(r)/r`` is almost decreasing.
    lower_type
        Declared lower type, if any.
    integral_comparable
        Whether ``phi(t)`` is comparable to ``int_0^t phi(r)/r dr``.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    name: str = "phi"
    almost_decreasing_ratio: bool = True
    lower_type: float | None = None
    integral_comparable: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise DomainError(f"{self.name}: r must be positive")
        return np.broadcast_to(self.evaluator(r), r.shape).astype(float)

    @classmethod
    def power(cls, a: float) -> "PhiIncreasing":
        """``r^a``; ``a = 0`` is ``phi = 1``."""
        if not 0 <= a <= 1:
            raise DomainError("power exponent must lie in [0, 1]")
        return cls(lambda r: r ** a, f"r^{a:g}", True, a if a > 0 else 0.0, a > 0)

    @staticmethod
    def _samples(kmin=-20, kmax=20):
        return 2.0 ** np.arange(kmin, kmax + 1, 0.5)

    def check(self) -> "PhiIncreasing":
        """Sampled positivity, monotonicity and the declared flags."""
        r = self._samples()
        v = self(r)
        if np.any(~np.isfinite(v)) or np.any(v <= 0):
            raise DomainError(f"{self.name}: not positive on samples")
        if np.any(np.diff(v) < -1e-14 * v[1:]):
            raise DomainError(f"{self.name}: not increasing on samples")
        if self.almost_decreasing_ratio and not math.isfinite(self.ratio_constant()):
            raise DomainError(f"{self.name}: phi(r)/r is not almost decreasing on samples")
        return self

    def ratio_constant(self) -> float:
        """Worst ``(phi(t)/t) / (phi(s)/s)`` over sampled ``t >= s``."""
        r = self._samples()
        q = self(r) / r
        # running minimum from the left bounds every later ratio
        return float(np.max(q / np.minimum.accumulate(q)))

    def integral(self, t) -> np.ndarray:
        """``int_0^t phi(r)/r dr`` by quadrature in ``log r``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tiny = np.finfo(float).tiny
        f = lambda u: float(self(np.array([max(math.exp(u), tiny)]))[0])
        out = []
        for x in t:
            with warnings.catch_warnings():
                warnings.simplefilter("error", integrate.IntegrationWarning)
                try:
                    out.append(integrate.quad(f, -np.inf, math.log(x), limit=200)[0])
                except integrate.IntegrationWarning:
                    out.append(math.inf)  # divergent, e.g. phi = 1
        return np.array(out)

    def integral_band(self, kmin: int = -12, kmax: int = 12) -> tuple[float, float]:
        """Range of ``phi(t) / int_0^t phi(r)/r dr`` over dyadic ``t``."""
        t = 2.0 ** np.arange(kmin, kmax + 1)
        with np.errstate(divide="ignore"):
            r = self(t) / self.integral(t)
        return float(r.min()), float(r.max())


def _log_integral(phi: PhiIncreasing, a: float, b: float) -> float:
    """``int_a^b phi(t)/t dt`` with ``0 < a <= b``."""
    key = ("logint", a, b)
    hit = phi._cache.get(key)
    if hit is None:
        f = lambda u: float(phi(np.array([math.exp(u)]))[0])
        hit = integrate.quad(f, math.log(a), math.log(b), limit=200, epsabs=0, epsrel=1e-12)[0]
        phi._cache[key] = hit
    return hit


def psi_from_phi(phi: PhiIncreasing) -> PhiIncreasing:
    """``psi(r) = phi(r) / int_{min(1,r)}^2 phi(t)/t dt``.

    Examples
    --------
    >>> psi = psi_from_phi(PhiIncreasing.power(1.0))
    >>> round(float(psi(0.5)), 12), round(float(psi(3.0)), 12)
    (0.333333333333, 3.0)
    """
    top = _log_integral(phi, 1.0, 2.0)

    def ev(r):
        r = np.asarray(r, dtype=float)
        flat = r.ravel()
        den = np.full(flat.shape, top)
        for i in np.nonzero(flat < 1)[0]:
            den[i] = _log_integral(phi, float(flat[i]), 1.0) + top
        return (phi(flat) / den).reshape(r.shape)

    return PhiIncreasing(ev, f"psi[{phi.name}]", True, None, False)


# -- Phi_0 ---------------------------------------------------------------------


def phi0_from_psi(psi: PhiIncreasing, n: int, kmin: int = -40, kmax: int = 40,
                  points: int = 512) -> OrliczFunction:
    """``Phi_0(t) = eta^{-1}(1/t)`` with ``eta(t) = psi(t^{-1/n}) / t``.

    ``eta`` is tabulated on ``points`` log-spaced nodes in ``[2^kmin, 2^kmax]``
    and inverted by monotone (PCHIP) interpolation in log-log coordinates,
    separately on each side of ``s = 1``, with linear log-log extrapolation
    outside the table.  Then
    ``||chi_Q||_{L^{Phi_0}} = 1 / Phi_0^{-1}(1/|Q|) = eta(1/|Q|) = psi(l(Q)) |Q|``.

    Raises
    ------
    PreconditionError
        If ``eta`` is not strictly decreasing on the table.
    """
    if n < 1:
        raise DomainError("dimension must be positive")
    if not kmin < 0 < kmax:
        raise DomainError("the table must straddle 1")
    # psi has a kink at r = 1, so s = 1 is a node shared by two interpolants
    half = points // 2
    left = np.geomspace(2.0 ** kmin, 1.0, half)
    right = np.geomspace(1.0, 2.0 ** kmax, points - half + 1)
    pieces = []
    for s in (left, right):
        eta = psi(s ** (-1.0 / n)) / s
        if np.any(~np.isfinite(eta)) or np.any(np.diff(eta) >= 0):
            raise PreconditionError(f"eta built from {psi.name} is not strictly decreasing")
        pieces.append((-np.log(eta), np.log(s)))  # log(1/eta) increasing
    (xl, yl), (xr, yr) = pieces
    pl = PchipInterpolator(xl, yl, extrapolate=False)
    pr = PchipInterpolator(xr, yr, extrapolate=False)
    lo_slope = (yl[1] - yl[0]) / (xl[1] - xl[0])
    hi_slope = (yr[-1] - yr[-2]) / (xr[-1] - xr[-2])
    split = xl[-1]

    def ev(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        pos = t > 0
        lt = np.log(t[pos])
        v = np.where(lt <= split, pl(np.clip(lt, xl[0], split)), pr(np.clip(lt, split, xr[-1])))
        below, above = lt < xl[0], lt > xr[-1]
        v[below] = yl[0] + lo_slope * (lt[below] - xl[0])
        v[above] = yr[-1] + hi_slope * (lt[above] - xr[-1])
        out[pos] = np.exp(v)
        return out

    return OrliczFunction(ev, n / (n + 1), 1.0, f"Phi0[{psi.name},n={n}]")


def orlicz_growth(Phi: OrliczFunction, lower_constant: float = math.inf,
                  upper_constant: float = math.inf) -> GrowthFunction:
    """View an Orlicz function as an ``x``-independent growth function."""
    ev = (lambda x, t: np.broadcast_to(Phi(np.asarray(t, dtype=float)),
                                       np.broadcast_shapes(np.shape(x)[:-1], np.shape(t))).copy())
    return GrowthFunction(ev, Phi.p0, lower_constant, Phi.p1, upper_constant, 1.0,
                          name=Phi.name, orlicz=Phi.evaluator)


def orlicz_type_check(Phi: OrliczFunction, p: float, side: str, k: int = 16,
                      drift: float = 1.05) -> TypeCheck:
    """Sampled type test that is stable under widening the scale range.

    The worst constant on dyadic samples in ``[2^{-2k}, 2^{2k}]`` must be
    finite and at most ``drift`` times the worst constant on
    ``[2^{-k}, 2^k]``.  A false exponent ``p`` shows up as a constant that
    keeps growing with the range.  The recorded declared constant is the
    narrow-range value.
    """
    g = orlicz_growth(Phi)
    narrow = _type_ratios(g, p, default_type_samples(1, side, -k, k, np.zeros((1, 1)))).max()
    wide = _type_ratios(g, p, default_type_samples(1, side, -2 * k, 2 * k, np.zeros((1, 1)))).max()
    holds = bool(np.isfinite(wide) and wide <= narrow * drift)
    return TypeCheck(holds, float(wide), float(narrow))


# -- lattice machinery -----------------------------------------------------------


def _window_index(grid: Grid, starts: np.ndarray, k: int) -> tuple:
    """Fancy index gathering ``(m, k^n)`` windows from a grid array."""
    n = grid.dimension
    off = np.stack(np.meshgrid(*([np.arange(k)] * n), indexing="ij"), -1).reshape(-1, n)
    idx = starts[:, None, :] + off[None, :, :]
    return tuple(idx[..., d] for d in range(n))


def _reference_basis(k: int, n: int, s: int) -> np.ndarray:
    """Monomials on the cell centres of ``[-1, 1]^n`` split into ``k`` cells."""
    u1 = (np.arange(k) + 0.5) / k * 2 - 1
    u = np.stack(np.meshgrid(*([u1] * n), indexing="ij"), -1).reshape(-1, n)
    return _basis(u, monomial_exponents(n, s))


@dataclass(frozen=True)
class Oscillations:
    """Per-cube ``int_Q |f - P_Q^s f|``, ``int_Q |f|`` and orthogonality defects."""

    oscillation: np.ndarray
    absolute: np.ndarray
    defect: np.ndarray


def cube_oscillations(f: GridFunction, lattice: CubeLattice, s: int) -> Oscillations:
    """Oscillations about the minimizing polynomials of degree ``s``.

    ``P_Q^s f`` is the ``L^2(Q)`` projection, so ``int_Q (f - P) x^alpha = 0``
    for ``|alpha| <= s``; the defect is that moment relative to
    ``int_Q |f| |x^alpha|`` in the scaled basis.
    """
    if s < 0:
        raise DomainError("degree must be nonnegative")
    g = lattice.grid
    if f.grid != g:
        raise DomainError("function and lattice live on different grids")
    n = g.dimension
    vals = np.asarray(f.values)
    cell = g.cell_volume
    m = len(lattice)
    osc = np.zeros(m)
    absint = np.zeros(m)
    defect = np.zeros(m)
    for k in np.unique(lattice.sizes):
        sel = np.nonzero(lattice.sizes == k)[0]
        k = int(k)
        B = _reference_basis(k, n, s)
        # too few cells for the basis: the fit interpolates and the residual vanishes
        Binv = np.linalg.pinv(B)
        chunk = max(1, _WINDOW_BUDGET // B.shape[0])
        for c0 in range(0, len(sel), chunk):
            part = sel[c0:c0 + chunk]
            W = vals[_window_index(g, lattice.starts[part], k)]
            coef = Binv @ W.T
            R = W - (B @ coef).T
            osc[part] = np.abs(R).sum(axis=1) * cell
            absint[part] = np.abs(W).sum(axis=1) * cell
            scale = np.maximum(np.abs(W) @ np.abs(B), 1e-300)
            defect[part] = np.max(np.abs(R @ B) / scale, axis=1)
    return Oscillations(osc, absint, defect)


def lattice_chi_norms(lattice: CubeLattice, phi: GrowthFunction, tol: float = 1e-12) -> np.ndarray:
    """``||chi_Q||_{L^phi}`` for every lattice cube, by midpoint quadrature on grid cells."""
    g = lattice.grid
    out = np.empty(len(lattice))
    if phi.x_independent:
        for k in np.unique(lattice.sizes):
            val = chi_norm(Cube(np.zeros(g.dimension), k * g.spacing), phi, g.spacing, tol)
            out[lattice.sizes == k] = val
        return out
    if phi.weight is not None and phi.orlicz is not None:
        w = phi.weight(g.coordinates()) * g.cell_volume
        W = box_sums(w, lattice.starts, lattice.sizes)
        Phi = phi.orlicz
        for i, wq in enumerate(W):
            out[i] = solve_modular(lambda lam: float(wq * Phi(np.array([1.0 / lam]))[0]), 1.0, tol).norm
        return out
    for i, Q in enumerate(lattice.cubes):
        out[i] = chi_norm(Q, phi, g.spacing, tol)
    return out


# -- bmo_phi ---------------------------------------------------------------------


@dataclass(frozen=True)
class BmoReport:
    """Per-cube contributions to ``||f||_{bmo_phi}``."""

    lattice: CubeLattice
    small: np.ndarray   # mask |Q| < 1
    terms: np.ndarray   # oscillation (small) or average (large) over ||chi_Q||
    chi: np.ndarray
    defect: np.ndarray
    whole_space: float

    @property
    def small_term(self) -> float:
        return float(self.terms[self.small].max()) if np.any(self.small) else 0.0

    @property
    def large_term(self) -> float:
        return float(self.terms[~self.small].max()) if np.any(~self.small) else 0.0

    @property
    def norm(self) -> float:
        return self.small_term + self.large_term + self.whole_space

    @property
    def max_defect(self) -> float:
        return float(self.defect[self.small].max()) if np.any(self.small) else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.lattice.grid.dimension
        w.writerow([f"start{d}" for d in range(n)] + ["cells", "side", "small", "chi", "term"])
        for st, k, l, sm, c, t in zip(self.lattice.starts, self.lattice.sizes, self.lattice.sides,
                                      self.small, self.chi, self.terms):
            w.writerow([int(v) for v in st] + [int(k), repr(float(l)), int(sm), repr(float(c)),
                                               repr(float(t))])
        return buf.getvalue()


def _is_small(lattice: CubeLattice) -> np.ndarray:
    return lattice.volumes < 1 * (1 - 1e-12)


def bmo_phi_report(f: GridFunction, phi: GrowthFunction, s: int, lattice: CubeLattice) -> BmoReport:
    """Per-cube terms of ``||f||_{bmo_phi}``.

    Small cubes (``|Q| < 1``) contribute ``int_Q |f - P_Q^s f| / ||chi_Q||``
    and the others ``int_Q |f| / ||chi_Q||``.  When ``phi`` is flagged with
    a finite whole-space measure, the box stands in for the whole space in
    the extra term ``int |f| / ||chi_box||``.
    """
    osc = cube_oscillations(f, lattice, s)
    chi = lattice_chi_norms(lattice, phi)
    small = _is_small(lattice)
    terms = np.where(small, osc.oscillation, osc.absolute) / chi
    whole = 0.0
    if phi.whole_space_finite:
        g = f.grid
        whole = float(np.sum(np.abs(f.values)) * g.cell_volume) / chi_norm(g.bounding_cube, phi, g.spacing)
    return BmoReport(lattice, small, terms, chi, osc.defect, whole)


def bmo_phi_norm(f: GridFunction, phi: GrowthFunction, s: int, lattice: CubeLattice) -> float:
    """``||f||_{bmo_phi}`` as a maximum over the lattice; see :func:`bmo_phi_report`."""
    return bmo_phi_report(f, phi, s, lattice).norm


def global_bmo_phi_norm(f: GridFunction, phi: GrowthFunction, s: int, lattice: CubeLattice) -> float:
    """``sup_Q int_Q |f - P_Q^s f| / ||chi_Q||_{L^phi}`` over every lattice cube."""
    osc = cube_oscillations(f, lattice, s)
    return float(np.max(osc.oscillation / lattice_chi_norms(lattice, phi)))


def nakai_yabuta_norms(f: GridFunction, phi: PhiIncreasing, lattice: CubeLattice) -> dict:
    """``BMO^phi`` and ``bmo^phi`` norms normalized by ``phi(l(Q)) |Q|``.

    Returns ``{"bmo_phi_small": ..., "BMO_phi_small": ...}`` where the
    first is the local norm (oscillation on small cubes plus averages of
    ``|f|`` on large ones) and the second the global oscillation norm.
    """
    osc = cube_oscillations(f, lattice, 0)
    den = phi(lattice.sides) * lattice.volumes
    o = osc.oscillation / den
    a = osc.absolute / den
    small = _is_small(lattice)
    local = (float(o[small].max()) if np.any(small) else 0.0) + \
        (float(a[~small].max()) if np.any(~small) else 0.0)
    return {"bmo_phi_small": local, "BMO_phi_small": float(o.max())}


# -- duality and multipliers -------------------------------------------------------


@dataclass(frozen=True)
class PairingBound:
    worst_ratio: float
    pairings: np.ndarray
    bmo_norm: float
    violation: bool


def duality_pairing_bound(g: GridFunction, atoms: Sequence, phi: GrowthFunction, s: int,
                          lattice: CubeLattice) -> PairingBound:
    """Worst ``|int g a| / ||g||_{bmo_phi}`` over normalized atoms.

    A vanishing norm with a nonzero pairing is flagged as a violation and
    reported with an infinite ratio.
    """
    cell = g.grid.cell_volume
    gv = np.asarray(g.values)
    pair = np.array([abs(complex(np.sum(gv * np.asarray(a.values.values)) * cell)) for a in atoms])
    nrm = bmo_phi_norm(g, phi, s, lattice)
    top = float(pair.max()) if pair.size else 0.0
    if nrm == 0:
        bad = top > 1e-12 * max(1.0, float(np.abs(gv).max()))
        return PairingBound(math.inf if bad else 0.0, pair, 0.0, bad)
    return PairingBound(top / nrm, pair, nrm, False)


@dataclass(frozen=True)
class MultiplierReport:
    psi_norm: float
    sup_norm: float
    ratios: list
    constant: float

    @property
    def bound(self) -> float:
        return self.psi_norm + self.sup_norm

    def to_dict(self) -> dict:
        return {"BMO_psi": self.psi_norm, "sup": self.sup_norm, "ratios": list(self.ratios),
                "constant": self.constant}


def multiplier_check(g: GridFunction, phi: PhiIncreasing, fs: Sequence[GridFunction],
                     lattice: CubeLattice) -> MultiplierReport:
    """Ratios ``||f g||_{bmo^phi} / ||f||_{bmo^phi}`` against ``||g||_{BMO^psi} + ||g||_inf``.

    ``constant`` is the smallest ``C`` with every ratio at most
    ``C (||g||_{BMO^psi} + ||g||_inf)``; zero-norm test functions are skipped.
    """
    if not phi.almost_decreasing_ratio:
        raise PreconditionError(f"{phi.name}: phi(r)/r must be almost decreasing")
    psi = psi_from_phi(phi)
    psi_norm = nakai_yabuta_norms(g, psi, lattice)["BMO_phi_small"]
    sup = float(np.max(np.abs(g.values)))
    ratios = []
    for f in fs:
        base = nakai_yabuta_norms(f, phi, lattice)["bmo_phi_small"]
        if base == 0:
            continue
        ratios.append(nakai_yabuta_norms(f * g, phi, lattice)["bmo_phi_small"] / base)
    bound = psi_norm + sup
    worst = max(ratios) if ratios else 0.0
    C = worst / bound if bound > 0 else (0.0 if worst == 0 else math.inf)
    return MultiplierReport(psi_norm, sup, ratios, C)
