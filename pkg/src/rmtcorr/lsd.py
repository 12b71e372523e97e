"""Limiting spectral distributions of sample correlation matrices.

Closed forms for the Marchenko-Pastur and semicircle laws, fixed-point
solvers for the general Stieltjes equations, and inversion to densities,
CDFs and quantiles.

For ``p/n -> gamma > 0`` the transform ``s`` of the limit solves

    s = sum_j w_j / (t_j (1 - gamma - gamma z s) - z)

and for ``p/n -> 0`` the limit of ``sqrt(n/p)(R - Gamma)`` has

    s~ = -sum_j w_j t_j / (z + t_j s~),    s = -sum_j w_j / (z + t_j s~).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq

from .errors import ConvergenceError

__all__ = [
    "AtomicMeasure",
    "LimitLaw",
    "mp_edges",
    "mp_density",
    "mp_stieltjes_closed",
    "semicircle_density",
    "semicircle_stieltjes",
    "solve_stieltjes",
    "solve_stieltjes_zero_gamma",
    "underline_s",
    "mp_law",
    "semicircle_law",
    "law_from_stieltjes",
    "quantile",
    "general_support",
    "read_law_csv",
]

DAMPING = 0.5
STEP_TOL = 1e-12
MAX_ITER = 10_000
RESIDUAL_TOL = 1e-10
DEFAULT_ETA = 1e-4
DEFAULT_NUM = 2001
MASS_TOL = 2e-3


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite probability measure ``sum_j w_j delta_{t_j}``, atoms ascending."""

    t: NDArray[np.float64]
    w: NDArray[np.float64]

    def __init__(self, t: ArrayLike, w: ArrayLike | None = None):
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        w = np.full(t.size, 1.0 / t.size) if w is None else np.atleast_1d(np.asarray(w, dtype=np.float64))
        if t.ndim != 1 or t.shape != w.shape or t.size == 0:
            raise ValueError("atoms and weights must be nonempty vectors of equal length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(w))):
            raise ValueError("atoms and weights must be finite")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {w.sum():.15g}")
        order = np.argsort(t, kind="stable")
        t, w = t[order], w[order]
        t.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "w", w)

    @classmethod
    def delta(cls, c: float = 1.0) -> AtomicMeasure:
        return cls([c], [1.0])

    @classmethod
    def from_pairs(cls, pairs: Iterable[Iterable[float]]) -> AtomicMeasure:
        arr = np.asarray(list(pairs), dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("expected a list of (atom, weight) pairs")
        return cls(arr[:, 0], arr[:, 1])

    @classmethod
    def from_eigenvalues(cls, values: ArrayLike, decimals: int = 12) -> AtomicMeasure:
        """ESD of a matrix, with numerically equal eigenvalues merged."""
        v = np.round(np.asarray(values, dtype=np.float64).ravel(), decimals)
        atoms, counts = np.unique(v, return_counts=True)
        w = counts / counts.sum()
        w[-1] = 1.0 - w[:-1].sum()
        return cls(atoms, w)

    def pairs(self) -> list[list[float]]:
        return [[float(a), float(b)] for a, b in zip(self.t, self.w)]

    def cdf(self, x: ArrayLike) -> NDArray[np.float64]:
        """Right-continuous distribution function."""
        cum = np.concatenate([[0.0], np.cumsum(self.w)])
        cum[-1] = 1.0
        return cum[np.searchsorted(self.t, np.asarray(x, dtype=np.float64), side="right")]

    def moment(self, k: int) -> float:
        return float(np.sum(self.w * self.t ** k))

    @property
    def support(self) -> tuple[float, float]:
        return float(self.t[0]), float(self.t[-1])

    @property
    def jump_points(self) -> NDArray[np.float64]:
        return self.t

    def distance_to_support(self, x: float) -> float:
        return float(np.min(np.abs(self.t - x)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AtomicMeasure):
            return NotImplemented
        return np.array_equal(self.t, other.t) and np.array_equal(self.w, other.w)

    def __hash__(self) -> int:
        return hash((self.t.tobytes(), self.w.tobytes()))


def _as_upper(z: ArrayLike) -> NDArray[np.complex128]:
    z = np.asarray(z, dtype=np.complex128)
    if np.any(~(z.imag > 0)):
        raise ValueError("z must lie in the upper half-plane (Im z > 0)")
    return z


def _check_gamma(gamma: float) -> None:
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")


def mp_edges(gamma: float) -> tuple[float, float]:
    _check_gamma(gamma)
    r = math.sqrt(gamma)
    return (1.0 - r) ** 2, (1.0 + r) ** 2


def mp_density(gamma: float, x: ArrayLike) -> NDArray[np.float64] | float:
    """Absolutely continuous part of the MP law; the mass at 0 for gamma > 1 is not included."""
    a, b = mp_edges(gamma)
    x_arr = np.asarray(x, dtype=np.float64)
    inside = (x_arr > a) & (x_arr < b)
    xs = np.where(inside, x_arr, 1.0)
    f = np.where(inside, np.sqrt(np.clip((b - xs) * (xs - a), 0.0, None)) / (2.0 * math.pi * gamma * xs), 0.0)
    return float(f) if f.ndim == 0 else f


def _edge_sqrt(z: NDArray[np.complex128], a: float, b: float) -> NDArray[np.complex128]:
    # sqrt((z-a)(z-b)) analytic off [a, b], ~ z at infinity, in C+ for z in C+
    return np.sqrt(z - a) * np.sqrt(z - b)


def mp_stieltjes_closed(gamma: float, z: ArrayLike) -> NDArray[np.complex128] | complex:
    """Stieltjes transform of the MP law (includes the mass at 0 when gamma > 1)."""
    a, b = mp_edges(gamma)
    zz = _as_upper(z)
    s = (1.0 - gamma - zz + _edge_sqrt(zz, a, b)) / (2.0 * gamma * zz)
    return complex(s) if s.ndim == 0 else s


def semicircle_density(x: ArrayLike) -> NDArray[np.float64] | float:
    x_arr = np.asarray(x, dtype=np.float64)
    f = np.sqrt(np.clip(4.0 - x_arr * x_arr, 0.0, None)) / (2.0 * math.pi)
    return float(f) if f.ndim == 0 else f


def semicircle_stieltjes(z: ArrayLike) -> NDArray[np.complex128] | complex:
    zz = _as_upper(z)
    s = (_edge_sqrt(zz, -2.0, 2.0) - zz) / 2.0
    return complex(s) if s.ndim == 0 else s


def underline_s(s: ArrayLike, gamma: float, z: ArrayLike) -> NDArray[np.complex128]:
    """Companion transform ``-(1 - gamma)/z + gamma s``."""
    return -(1.0 - gamma) / np.asarray(z) + gamma * np.asarray(s)


def underline_residual(s: ArrayLike, gamma: float, H: AtomicMeasure, z: ArrayLike) -> NDArray[np.float64]:
    """Residual of ``z = -1/s_ + gamma sum w t / (1 + t s_)`` (the equivalent companion form)."""
    z = np.asarray(z, dtype=np.complex128)
    su = underline_s(s, gamma, z)
    rhs = -1.0 / su + gamma * np.sum(H.w * H.t / (1.0 + H.t * su[..., None]), axis=-1)
    return np.abs(z - rhs)


# general equation, gamma > 0

def _phi(s, z, gamma, t, w):
    d = t * (1.0 - gamma - gamma * z[:, None] * s[:, None]) - z[:, None]
    return np.sum(w / d, axis=1), np.sum(w * t * gamma * z[:, None] / (d * d), axis=1)


def _phi_zero(s, z, t, w):
    d = z[:, None] + t * s[:, None]
    return -np.sum(w * t / d, axis=1), np.sum(w * t * t / (d * d), axis=1)


def _relative(s, f):
    # absolute below |s| = 1, relative above (|s| ~ 1/eta next to a point mass)
    return np.abs(s - f) / np.maximum(1.0, np.abs(s))


def _fixed_point(phi, s, max_iter):
    """Damped iteration ``s <- (1-d) s + d phi(s)`` on every point until the step is tiny."""
    active = np.ones(s.shape, dtype=bool)
    iters = 0
    while active.any() and iters < max_iter:
        idx = np.flatnonzero(active)
        f, _ = phi(s[idx], idx)
        new = (1.0 - DAMPING) * s[idx] + DAMPING * f
        step = np.abs(new - s[idx])
        s[idx] = new
        active[idx[step < STEP_TOL]] = False
        iters += 1
    return s, iters


def _newton(phi, s, steps=30):
    for _ in range(steps):
        f, df = phi(s, np.arange(s.size))
        g = s - f
        with np.errstate(divide="ignore", invalid="ignore"):
            upd = g / (1.0 - df)
        ok = np.isfinite(upd)
        cand = np.where(ok, s - upd, s)
        # never leave the upper half-plane
        cand = np.where(cand.imag > 0, cand, s)
        if np.array_equal(cand, s):
            break
        s = cand
    return s


def _poly_roots_general(zk, gamma, t, w):
    P = np.polynomial.polynomial
    lin = [np.array([ti * (1.0 - gamma) - zk, -gamma * zk * ti]) for ti in t]
    prod_all = np.array([1.0 + 0j])
    for a in lin:
        prod_all = P.polymul(prod_all, a)
    poly = P.polymul(np.array([0.0, 1.0]), prod_all)
    for j in range(t.size):
        others = np.array([1.0 + 0j])
        for i, a in enumerate(lin):
            if i != j:
                others = P.polymul(others, a)
        poly = P.polysub(poly, w[j] * others)
    return P.polyroots(poly)


def _poly_roots_zero(zk, t, w):
    P = np.polynomial.polynomial
    lin = [np.array([zk, ti]) for ti in t]
    prod_all = np.array([1.0 + 0j])
    for a in lin:
        prod_all = P.polymul(prod_all, a)
    poly = P.polymul(np.array([0.0, 1.0]), prod_all)
    for j in range(t.size):
        others = np.array([1.0 + 0j])
        for i, a in enumerate(lin):
            if i != j:
                others = P.polymul(others, a)
        poly = P.polyadd(poly, w[j] * t[j] * others)
    return P.polyroots(poly)


def _repair(s, z, residual_fn, roots_fn, admissible):
    """Replace unconverged points by the admissible polynomial root nearest the iterate."""
    bad = np.flatnonzero((residual_fn(s) >= RESIDUAL_TOL) | ~admissible(s, z))
    for k in bad:
        roots = roots_fn(z[k])
        roots = roots[admissible(roots, np.full(roots.shape, z[k]))]
        if roots.size == 0:
            continue
        res = residual_fn(roots, k)
        good = roots[res < RESIDUAL_TOL]
        if good.size > 1:
            warnings.warn(f"several admissible roots at z={z[k]}; taking the one nearest the iterate",
                          RuntimeWarning, stacklevel=3)
        pick = good if good.size else roots
        s[k] = pick[np.argmin(np.abs(pick - s[k]))]
    return s


def solve_stieltjes(gamma: float, H: AtomicMeasure, z: ArrayLike, *, max_iter: int = MAX_ITER) -> NDArray[np.complex128] | complex:
    """Stieltjes transform of ``F_{gamma,H}`` at points ``z`` of the upper half-plane.

    Damped fixed-point iteration from ``s0 = -1/z``, then Newton polishing.
    Points still above the residual tolerance are resolved from the roots of
    the equivalent polynomial equation. Raises :class:`ConvergenceError` if
    any point ends with residual ``>= 1e-10`` (relative once ``|s| > 1``).
    """
    _check_gamma(gamma)
    zz = _as_upper(z)
    shape = zz.shape
    zf = zz.ravel()
    t, w = H.t, H.w

    def phi(s, idx):
        return _phi(s, zf[idx], gamma, t, w)

    def residual(s, k=None):
        zk = zf if k is None else np.full(s.shape, zf[k])
        return _relative(s, _phi(s, zk, gamma, t, w)[0])

    def admissible(s, zk):
        return (s.imag > 0) & (underline_s(s, gamma, zk).imag > 0)

    s, iters = _fixed_point(phi, -1.0 / zf, max_iter)
    s = _newton(phi, s)
    s = _repair(s, zf, residual, lambda zk: _poly_roots_general(zk, gamma, t, w), admissible)
    res = residual(s)
    worst = float(np.max(res))
    if worst >= RESIDUAL_TOL or np.any(s.imag <= 0):
        raise ConvergenceError("Stieltjes fixed point did not converge", worst, iters)
    s = s.reshape(shape)
    return complex(s) if s.ndim == 0 else s


def solve_stieltjes_zero_gamma(H: AtomicMeasure, z: ArrayLike, *, max_iter: int = MAX_ITER,
                               return_tilde: bool = False):
    """Stieltjes transform of the ``p/n -> 0`` limit of ``sqrt(n/p)(R - Gamma)``.

    Solves for ``s~`` with ``Im s~ > 0`` (the selection rule), then evaluates ``s``.
    """
    zz = _as_upper(z)
    shape = zz.shape
    zf = zz.ravel()
    t, w = H.t, H.w

    def phi(s, idx):
        return _phi_zero(s, zf[idx], t, w)

    def residual(s, k=None):
        zk = zf if k is None else np.full(s.shape, zf[k])
        return _relative(s, _phi_zero(s, zk, t, w)[0])

    def admissible(s, zk):
        return s.imag > 0

    st, iters = _fixed_point(phi, -1.0 / zf, max_iter)
    st = _newton(phi, st)
    st = _repair(st, zf, residual, lambda zk: _poly_roots_zero(zk, t, w), admissible)
    worst = float(np.max(residual(st)))
    if worst >= RESIDUAL_TOL or np.any(st.imag <= 0):
        raise ConvergenceError("companion fixed point did not converge", worst, iters)
    s = -np.sum(w / (zf[:, None] + t * st[:, None]), axis=1)
    s = s.reshape(shape)
    st = st.reshape(shape)
    if s.ndim == 0:
        s, st = complex(s), complex(st)
    return (s, st) if return_tilde else s


# laws

@dataclass
class LimitLaw:
    """A limiting spectral distribution on a grid, with an optional point mass.

    ``cdf_grid`` is the CDF of the continuous part only, normalized to end at
    ``1 - point_mass``; ``total_mass`` keeps the raw quadrature result.
    """

    kind: str
    x: NDArray[np.float64]
    density: NDArray[np.float64]
    cdf_grid: NDArray[np.float64]
    support_hull: tuple[float, float]
    point_mass: tuple[float, float] | None = None
    total_mass: float = 1.0
    gamma: float | None = None
    H: AtomicMeasure | None = None
    eta: float | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def mass_at_point(self) -> float:
        return 0.0 if self.point_mass is None else self.point_mass[1]

    @property
    def support(self) -> tuple[float, float]:
        lo, hi = self.support_hull
        if self.point_mass is not None:
            lo, hi = min(lo, self.point_mass[0]), max(hi, self.point_mass[0])
        return lo, hi

    @property
    def jump_points(self) -> NDArray[np.float64]:
        if self.point_mass is None:
            return np.empty(0)
        return np.array([self.point_mass[0]])

    def cdf(self, x: ArrayLike) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=np.float64)
        c = np.interp(x, self.x, self.cdf_grid, left=0.0, right=self.cdf_grid[-1])
        if self.point_mass is not None:
            c = c + self.point_mass[1] * (x >= self.point_mass[0])
        return np.clip(c, 0.0, 1.0)

    def pdf(self, x: ArrayLike) -> NDArray[np.float64]:
        return np.interp(np.asarray(x, dtype=np.float64), self.x, self.density, left=0.0, right=0.0)

    def quantile(self, q: float) -> float:
        return quantile(self, q)

    def header(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "gamma": self.gamma,
            "H": None if self.H is None else self.H.pairs(),
            "eta": self.eta,
            "point_masses": [] if self.point_mass is None else [list(self.point_mass)],
            "support": list(self.support),
            "total_mass": self.total_mass,
        }

    def to_csv(self, path) -> None:
        """Two-column CSV ``x,density`` preceded by a ``# {json}`` header line."""
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps(self.header(), sort_keys=True) + "\n")
            fh.write("x,density\n")
            for xi, fi in zip(self.x, self.density):
                fh.write(f"{xi:.17g},{fi:.17g}\n")


def read_law_csv(path) -> tuple[dict[str, Any], NDArray[np.float64], NDArray[np.float64]]:
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path}: missing JSON header line")
        header = json.loads(first[2:])
        if fh.readline().strip() != "x,density":
            raise ValueError(f"{path}: expected column header 'x,density'")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, data[:, 0], data[:, 1]


def _cosine_grid(lo: float, hi: float, num: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    theta = np.linspace(0.0, math.pi, num)
    return 0.5 * (lo + hi) - 0.5 * (hi - lo) * np.cos(theta), theta


def _cumtrapz(y: NDArray[np.float64], x: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.concatenate([[0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))])


def mp_law(gamma: float, num: int = DEFAULT_NUM) -> LimitLaw:
    """MP law from its closed-form density, integrated in the angle variable."""
    a, b = mp_edges(gamma)
    x, theta = _cosine_grid(a, b, num)
    dens = mp_density(gamma, x)
    # f(x) dx = ((b-a)/2)^2 sin^2(theta) / (2 pi gamma x) dtheta is smooth even when a = 0
    half = 0.5 * (b - a)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(x > 0, half * half * np.sin(theta) ** 2 / (2.0 * math.pi * gamma * x), 0.0)
    if a == 0.0:
        g[0] = half / (math.pi * gamma)  # sin^2(theta)/x -> 2/half as theta -> 0
    cont = _cumtrapz(g, theta)
    mass0 = max(0.0, 1.0 - 1.0 / gamma)
    raw = float(cont[-1]) + mass0
    cont = cont * ((1.0 - mass0) / cont[-1])
    pm = (0.0, mass0) if mass0 > 0 else None
    return LimitLaw("mp", x, dens, cont, (a, b), pm, raw, gamma=gamma, H=AtomicMeasure.delta(1.0))


def semicircle_law(num: int = DEFAULT_NUM, scale: float = 1.0) -> LimitLaw:
    """Semicircle law on ``[-2 scale, 2 scale]`` with its exact CDF."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    x, theta = _cosine_grid(-2.0 * scale, 2.0 * scale, num)
    dens = semicircle_density(x / scale) / scale
    cdf = (theta - np.sin(theta) * np.cos(theta)) / math.pi
    cdf[-1] = 1.0
    return LimitLaw("semicircle", x, dens, cdf, (-2.0 * scale, 2.0 * scale), None, 1.0,
                    H=AtomicMeasure.delta(scale))


def general_support(gamma: float, H: AtomicMeasure) -> tuple[float, float]:
    """Hull of the support of ``F_{gamma,H}`` (ignoring the point mass at 0).

    Edges are the values ``psi(alpha*)`` at the critical points of
    ``psi(a) = a + gamma sum w t a / (a - t)`` outside the atoms.
    """
    _check_gamma(gamma)
    t, w = H.t, H.w
    pos = t[t > 0]
    if pos.size == 0:
        return 0.0, 0.0
    wpos = w[t > 0]

    def psi(a):
        return a + gamma * np.sum(wpos * pos * a / (a - pos))

    def dpsi(a):
        return 1.0 - gamma * np.sum(wpos * pos * pos / (a - pos) ** 2)

    tmax, tmin = float(pos[-1]), float(pos[0])
    # upper edge: dpsi runs from -inf (a -> tmax+) to 1 (a -> inf)
    lo_a = tmax * (1.0 + 1e-12) + 1e-300
    while dpsi(lo_a) > 0:
        lo_a = tmax + 0.5 * (lo_a - tmax)
    hi_a = 2.0 * tmax + 1.0
    while dpsi(hi_a) <= 0:
        hi_a *= 2.0
    upper = psi(brentq(dpsi, lo_a, hi_a, xtol=1e-15, rtol=1e-15))
    # lower edge: dpsi(0) = 1 - gamma * H(t > 0); the critical point lies in
    # (0, tmin) when that is positive and in (-inf, 0) when it is negative
    c0 = 1.0 - gamma * wpos.sum()
    lower = 0.0
    if c0 > 0:
        hi_a = tmin * (1.0 - 1e-12)
        while dpsi(hi_a) > 0:
            hi_a = tmin - 0.5 * (tmin - hi_a)
        lower = psi(brentq(dpsi, 0.0, hi_a, xtol=1e-15, rtol=1e-15))
    elif c0 < 0:
        lo_a = -1.0
        while dpsi(lo_a) <= 0:
            lo_a *= 2.0
        lower = psi(brentq(dpsi, lo_a, 0.0, xtol=1e-15, rtol=1e-15))
    return max(lower, 0.0), upper


def law_from_stieltjes(kind: str, gamma: float | None = None, H: AtomicMeasure | None = None,
                       x_range: tuple[float, float] | None = None, num: int = DEFAULT_NUM,
                       eta: float = DEFAULT_ETA) -> LimitLaw:
    """Limit law recovered by Stieltjes inversion ``f(x) = Im s(x + i eta) / pi``.

    ``kind`` is one of ``mp``, ``semicircle``, ``general`` or
    ``general_zero_gamma``. The CDF is the trapezoid integral of the clipped
    density. For ``gamma > 1`` a point mass ``1 - 1/gamma`` sits at 0; its
    contribution ``-mass/z`` is removed before inverting.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    if num < 3:
        raise ValueError("grid needs at least 3 points")
    if kind == "mp":
        H = AtomicMeasure.delta(1.0)
    elif kind == "semicircle":
        H = AtomicMeasure.delta(1.0)
    elif kind not in ("general", "general_zero_gamma"):
        raise ValueError(f"unknown law kind {kind!r}")
    if H is None:
        raise ValueError(f"law kind {kind!r} needs an atomic measure H")

    zero_gamma = kind in ("semicircle", "general_zero_gamma")
    if zero_gamma:
        scale = float(np.max(np.abs(H.t)))
        hull = x_range if x_range is not None else (-3.0 * scale, 3.0 * scale)
        mass0 = 0.0
    else:
        if gamma is None:
            raise ValueError(f"law kind {kind!r} needs gamma")
        hull = general_support(gamma, H)
        mass0 = max(0.0, 1.0 - 1.0 / gamma)
        if x_range is not None:
            hull = x_range
    x = np.linspace(hull[0], hull[1], num)
    z = x + 1j * eta
    if zero_gamma:
        s = solve_stieltjes_zero_gamma(H, z)
    else:
        s = solve_stieltjes(gamma, H, z) + mass0 / z
    dens = np.clip(s.imag / math.pi, 0.0, None)
    cont = _cumtrapz(dens, x)
    raw = float(cont[-1]) + mass0
    if cont[-1] > 0:
        cont = cont * ((1.0 - mass0) / cont[-1])
    if zero_gamma and x_range is None:
        nz = np.flatnonzero(dens > 1e-3 * dens.max())
        hull = (float(x[nz[0]]), float(x[nz[-1]]))
    pm = (0.0, mass0) if mass0 > 0 else None
    return LimitLaw(kind, x, dens, cont, (float(hull[0]), float(hull[1])), pm, raw,
                    gamma=None if zero_gamma else gamma, H=H, eta=eta)


def quantile(law: LimitLaw, q: float) -> float:
    """``inf{x : F(x) >= q}``; ``q = 0`` and ``q = 1`` give the support endpoints."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile level must lie in [0, 1], got {q}")
    lo, hi = law.support
    if q == 0.0:
        return lo
    if q == 1.0:
        return hi
    mass = law.mass_at_point
    if law.point_mass is not None and law.point_mass[0] <= law.x[0]:
        if q <= mass:
            return law.point_mass[0]
        target = q - mass
    else:
        target = q
    c = law.cdf_grid
    k = int(np.searchsorted(c, target, side="left"))
    if k <= 0:
        return float(law.x[0])
    if k >= c.size:
        return float(law.x[-1])
    c0, c1 = c[k - 1], c[k]
    frac = 0.0 if c1 == c0 else (target - c0) / (c1 - c0)
    return float(law.x[k - 1] + frac * (law.x[k] - law.x[k - 1]))
