"""Estimators of the population correlation matrix and its spectrum.

Two families:

* hard thresholding of the sample correlation matrix at ``t = M sqrt(log p / n)``;
* unbiased power-trace estimates from averages over increasing index paths,
  followed by a moment-matching reconstruction of the eigenvalues.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import lsq_linear

from ._backend import increasing_path_sum
from .errors import InfeasibleMomentsError
from .matrix import SymmetricMatrix, as_symmetric, eigenvalues, sym_eigen

__all__ = [
    "ThresholdRule",
    "default_threshold",
    "threshold_estimate",
    "path_product",
    "increasing_path_average_bruteforce",
    "moment_estimate",
    "moment_estimates",
    "trace_path_estimate",
    "MomentVector",
    "estimate_correlation_moments",
    "SpectrumEstimate",
    "reconstruct_spectrum",
    "hankel_min_eigenvalue",
    "read_data_csv",
]

DEFAULT_M = 2.1
DEFAULT_ELL = 6
MAX_ORDER = 8
BRUTEFORCE_MAX_N = 14
GRID_SIZE = 401
HANKEL_TOL = 1e-10
ATOMIC_RANK_TOL = 1e-12   # relative eigenvalue below which a moment Hankel matrix is singular


def default_threshold(p: int, n: int, M: float = DEFAULT_M) -> float:
    """``M sqrt(ln p / n)``."""
    if p < 2:
        raise ValueError(f"threshold needs p >= 2, got {p}")
    if n < 1:
        raise ValueError(f"threshold needs n >= 1, got {n}")
    return M * math.sqrt(math.log(p) / n)


@dataclass(frozen=True)
class ThresholdRule:
    """Hard threshold ``t_p = M sqrt(log p / n)``; consistency needs ``M > 2``."""

    p: int
    n: int
    M: float = DEFAULT_M

    def __post_init__(self) -> None:
        if not self.M > 0:
            raise ValueError(f"M must be positive, got {self.M}")
        if self.M <= 2:
            warnings.warn(f"M={self.M} <= 2: the thresholded estimator is not guaranteed consistent",
                          UserWarning, stacklevel=3)

    @property
    def t(self) -> float:
        return default_threshold(self.p, self.n, self.M)


def threshold_estimate(m: SymmetricMatrix | ArrayLike, rule: ThresholdRule | float) -> SymmetricMatrix:
    """Zero every off-diagonal entry with ``|m_ij| <= t``; the diagonal is kept."""
    t = rule.t if isinstance(rule, ThresholdRule) else float(rule)
    a = as_symmetric(m).values
    out = np.where(np.abs(a) > t, a, 0.0)
    np.fill_diagonal(out, np.diag(a))
    return SymmetricMatrix(out)


def path_product(m: ArrayLike, sigma: tuple[int, ...]) -> float:
    """``prod_i m[sigma_i, sigma_{i+1}]`` with ``sigma_{k+1} = sigma_1`` (0-based indices)."""
    m = np.asarray(m, dtype=np.float64)
    n = m.shape[0]
    if len(sigma) == 0:
        raise ValueError("path must have at least one index")
    for s in sigma:
        if not 0 <= s < n:
            raise IndexError(f"path index {s} out of range for a {n} x {n} matrix")
    nxt = tuple(sigma[1:]) + (sigma[0],)
    return float(np.prod(m[list(sigma), list(nxt)]))


def increasing_path_average_bruteforce(m: ArrayLike, k: int) -> float:
    """Average of ``path_product`` over all ``C(n, k)`` strictly increasing paths."""
    m = np.ascontiguousarray(m, dtype=np.float64)
    n = m.shape[0]
    if n > BRUTEFORCE_MAX_N:
        raise ValueError(f"brute force is limited to n <= {BRUTEFORCE_MAX_N} (got n={n}); use moment_estimate")
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n={n}, got {k}")
    return increasing_path_sum(m, k) / math.comb(n, k)


def _log_binom(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _divide_binom(total: float, n: int, k: int) -> float:
    """``total / C(n, k)``; exact integer divisor when it fits a double, log-space otherwise."""
    if _log_binom(n, k) < 700.0:
        return total / float(math.comb(n, k))
    return total * math.exp(-_log_binom(n, k))


def _b_inverse_sqrt(B: ArrayLike | None, p: int) -> NDArray[np.float64]:
    if B is None:
        return np.ones(p)
    b = np.asarray(B.values if isinstance(B, SymmetricMatrix) else B, dtype=np.float64)
    if b.ndim == 2:
        if np.any(b - np.diag(np.diag(b))):
            raise ValueError("B must be diagonal")
        b = np.diag(b)
    if b.shape != (p,):
        raise ValueError(f"B must have {p} diagonal entries, got shape {b.shape}")
    if np.any(~(b > 0)):
        raise ValueError(f"B must be positive; entry {int(np.flatnonzero(~(b > 0))[0])} is not")
    return 1.0 / np.sqrt(b)


BLOCK = 1024


def _upper_times(Y: NDArray[np.float64], W: NDArray[np.float64]) -> NDArray[np.float64]:
    """``triu(Y'Y, 1) @ W`` without forming the ``n x n`` matrix.

    Row ``t`` of the product is ``y_t' sum_{s>t} y_s w_s'``; blocks are swept
    from the end while that suffix sum is carried as a ``p x q`` matrix.
    """
    n = Y.shape[1]
    out = np.empty_like(W)
    tail = np.zeros((Y.shape[0], W.shape[1]))
    for start in range(((n - 1) // BLOCK) * BLOCK, -1, -BLOCK):
        stop = min(start + BLOCK, n)
        yb = Y[:, start:stop]
        wb = W[start:stop]
        out[start:stop] = np.triu(yb.T @ yb, 1) @ wb + yb.T @ tail
        tail += yb @ wb
    return out


def moment_estimates(X: ArrayLike, B: ArrayLike | None, orders: range | list[int],
                     *, max_order: int = MAX_ORDER) -> dict[int, float]:
    """``C(n,k)^-1 tr(G^(k-1) X' B^-1 X)`` for several ``k`` in one pass.

    ``G`` is the strictly upper triangle of the ``n x n`` matrix ``X' B^-1 X``.
    With ``Y = B^(-1/2) X`` the trace equals ``tr(Y G^(k-1) Y')``; each
    further order applies ``G`` blockwise in ``O(n p (p + BLOCK))`` time and
    never stores ``G``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"data must be p x n, got shape {X.shape}")
    p, n = X.shape
    orders = sorted(set(int(k) for k in orders))
    if not orders:
        return {}
    if orders[0] < 1:
        raise ValueError("orders must be >= 1")
    if orders[-1] > n:
        raise ValueError(f"order k={orders[-1]} exceeds the sample size n={n}")
    if orders[-1] > max_order:
        raise ValueError(f"order k={orders[-1]} exceeds the cap {max_order}; raise max_order explicitly")
    Y = X * _b_inverse_sqrt(B, p)[:, None]
    W = Y.T.copy()
    out = {}
    for k in range(1, orders[-1] + 1):
        if k > 1:
            W = _upper_times(Y, W)
        if k in orders:
            tr = float(np.einsum("ij,ji->", Y, W))
            out[k] = _divide_binom(tr, n, k)
    return out


def trace_path_estimate(m: ArrayLike, k: int) -> float:
    """``C(n,k)^-1 tr(G^(k-1) m)`` with ``G`` the strictly upper triangle of ``m``.

    Equals :func:`increasing_path_average_bruteforce` for any symmetric
    ``m``; :func:`moment_estimate` is this formula applied to ``X' B^-1 X``.
    """
    m = np.asarray(m, dtype=np.float64)
    n = m.shape[0]
    if m.ndim != 2 or m.shape[1] != n:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n={n}, got {k}")
    G = np.triu(m, 1)
    W = m.copy()
    for _ in range(k - 1):
        W = G @ W
    return _divide_binom(float(np.trace(W)), n, k)


def moment_estimate(X: ArrayLike, B: ArrayLike | None, k: int, *, max_order: int = MAX_ORDER) -> float:
    """Unbiased estimate of ``tr((B^(-1/2) Sigma B^(-1/2))^k)`` for a fixed diagonal ``B``."""
    return moment_estimates(X, B, [k], max_order=max_order)[k]


@dataclass(frozen=True)
class MomentVector:
    """``(p, m_2, ..., m_ell)``: estimated power sums of the correlation spectrum."""

    p: int
    values: tuple[float, ...]   # m_2 .. m_ell

    @property
    def ell(self) -> int:
        return len(self.values) + 1

    def as_array(self) -> NDArray[np.float64]:
        """Power sums of orders 1..ell; the first is ``p``."""
        return np.array((float(self.p),) + tuple(self.values))

    def normalized(self) -> NDArray[np.float64]:
        """Moments of the spectral distribution, orders 0..ell."""
        return np.concatenate([[1.0], self.as_array() / self.p])

    @classmethod
    def from_spectrum(cls, spectrum: ArrayLike, ell: int) -> MomentVector:
        lam = np.asarray(spectrum, dtype=np.float64)
        if abs(lam.sum() - lam.size) > 1e-9 * lam.size:
            raise ValueError("a correlation spectrum must sum to its length")
        return cls(lam.size, tuple(float(np.sum(lam ** k)) for k in range(2, ell + 1)))


def estimate_correlation_moments(X: ArrayLike, ell: int = DEFAULT_ELL, *,
                                 max_order: int = MAX_ORDER) -> MomentVector:
    """Power sums of the correlation spectrum with ``B = diag(S)``."""
    X = np.asarray(X, dtype=np.float64)
    if ell < 2:
        raise ValueError(f"ell must be at least 2, got {ell}")
    p, n = X.shape
    if n < ell:
        raise ValueError(f"need n >= ell, got n={n}, ell={ell}")
    b = np.einsum("ij,ij->i", X, X) / n
    est = moment_estimates(X, b, range(2, ell + 1), max_order=max_order)
    return MomentVector(p, tuple(est[k] for k in range(2, ell + 1)))


def hankel_min_eigenvalue(mu: ArrayLike) -> float:
    """Smallest eigenvalue over the Hankel matrices ``[mu_{i+j}]`` and ``[mu_{i+j+1}]``.

    Both are PSD for the moments ``mu_0..mu_ell`` of a measure on ``[0, inf)``.
    """
    mu = np.asarray(mu, dtype=np.float64)
    ell = mu.size - 1
    worst = math.inf
    for shift in (0, 1):
        size = (ell - shift) // 2 + 1
        if size < 1:
            continue
        h = np.array([[mu[i + j + shift] for j in range(size)] for i in range(size)])
        scale = np.sqrt(np.outer(np.diag(h), np.diag(h)))
        scale[scale == 0] = 1.0
        worst = min(worst, float(eigenvalues(h / scale)[-1]))
    return worst


@dataclass
class SpectrumEstimate:
    """Estimated eigenvalues (descending) with the fitted grid measure and residuals."""

    eigenvalues: NDArray[np.float64]
    grid: NDArray[np.float64]
    weights: NDArray[np.float64]
    moment_residuals: NDArray[np.float64]   # relative, orders 1..ell
    trace_residual: float                   # sum of the estimates minus p, before rescaling
    hankel_min: float
    ell: int
    meta: dict[str, Any] = field(default_factory=dict)

    def l1_error(self, truth: ArrayLike) -> float:
        truth = np.sort(np.asarray(truth, dtype=np.float64))[::-1]
        return float(np.mean(np.abs(self.eigenvalues - truth)))

    def metadata(self) -> dict[str, Any]:
        return {
            "ell": self.ell,
            "grid": {"lo": float(self.grid[0]), "hi": float(self.grid[-1]), "size": int(self.grid.size)},
            "moment_residuals": [float(r) for r in self.moment_residuals],
            "trace_residual": self.trace_residual,
            "hankel_min_eigenvalue": self.hankel_min,
            **self.meta,
        }

    def to_csv(self, path, metadata_path=None) -> None:
        """CSV ``index,estimate`` (1-based) plus JSON metadata next to it."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "estimate"])
            for i, v in enumerate(self.eigenvalues, start=1):
                w.writerow([i, repr(float(v))])
        metadata_path = metadata_path or f"{path}.json"
        with open(metadata_path, "w") as fh:
            json.dump(self.metadata(), fh, indent=2, sort_keys=True)


def reconstruct_spectrum(m: MomentVector, p: int | None = None, *, grid_max: float | None = None,
                         grid_size: int = GRID_SIZE, strict: bool = True) -> SpectrumEstimate:
    """Eigenvalues whose power sums match ``m``, via a nonnegative grid measure.

    Fits weights on a uniform grid over ``[0, max(4, 2 m_2 / p)]`` by
    nonnegative least squares
    under the mass, trace and moment constraints (rows scaled to unit
    target). The fitted measure is cut into ``p`` slices of mass ``1/p`` in
    quantile order and each eigenvalue is the mean of its slice; the result
    is rescaled so that it sums to ``p`` exactly.

    When a moment Hankel matrix is singular the moments come from a finitely
    atomic measure, which is then unique; its atoms are taken directly (roots
    of the null-space polynomial) instead of from the grid fit.

    Moments failing the Hankel positivity test raise
    :class:`InfeasibleMomentsError` when ``strict``; otherwise the fit returns the
    closest feasible fit and the violation is reported in ``hankel_min``.
    """
    p = m.p if p is None else p
    if p != m.p:
        raise ValueError(f"moment vector is for p={m.p}, not {p}")
    if m.ell < 2:
        raise ValueError("need at least the second moment")
    mu = m.normalized()
    if not np.all(np.isfinite(mu)):
        raise InfeasibleMomentsError("moments must be finite")
    hmin = hankel_min_eigenvalue(mu)
    if strict:
        if mu[2] < mu[1] ** 2 * (1.0 - 1e-12):
            raise InfeasibleMomentsError(
                f"m_2 = {m.values[0]:.6g} < m_1^2 / p = {p:.6g}: violates Cauchy-Schwarz")
        if hmin < -HANKEL_TOL:
            raise InfeasibleMomentsError(f"moment Hankel matrix is not PSD (min eigenvalue {hmin:.3e})")
    hi = grid_max if grid_max is not None else max(4.0, 2.0 * mu[2])
    x = np.linspace(0.0, hi, grid_size)
    atomic = _atomic_measure(mu, hi)
    if atomic is not None:
        # singular Hankel matrix: the representing measure is unique and finitely atomic
        t, wt = atomic
        w = np.zeros(grid_size)
        np.add.at(w, np.clip(np.rint(t / x[1]).astype(int), 0, grid_size - 1), wt)
        fitted = np.vander(t, m.ell + 1, increasing=True).T @ wt
        residuals = (fitted[1:] - mu[1:]) / np.maximum(np.abs(mu[1:]), 1e-12)
        lam = _bin_means(t, wt, p)[::-1].copy()
        trace_residual = float(lam.sum() - p)
        lam *= p / lam.sum()
        return SpectrumEstimate(lam, x, w, residuals, trace_residual, hmin, m.ell, {"method": "atomic"})
    ell = m.ell
    powers = np.vstack([x ** k for k in range(ell + 1)])        # orders 0..ell
    target = mu.copy()
    scale = 1.0 / np.maximum(np.abs(target), 1e-12)
    A = powers * scale[:, None]
    b = target * scale
    # bounded-variable least squares with lower bound 0 is NNLS
    w = lsq_linear(A, b, bounds=(0.0, np.inf), method="bvls", tol=1e-14).x
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        raise InfeasibleMomentsError("no nonnegative measure on the grid fits the moments")
    w = w / w.sum()
    fitted = powers @ w
    residuals = (fitted[1:] - target[1:]) / np.maximum(np.abs(target[1:]), 1e-12)
    lam = _bin_means(x, w, p)[::-1].copy()
    trace_residual = float(lam.sum() - p)
    if lam.sum() > 0:
        lam *= p / lam.sum()
    return SpectrumEstimate(lam, x, w, residuals, trace_residual, hmin, ell, {"method": "grid"})


def _atomic_measure(mu: NDArray[np.float64], hi: float):
    """Atoms and weights of the unique measure with moments ``mu`` when some Hankel matrix is singular.

    Looks for the smallest ``r`` with ``[mu_{i+j}]_{i,j<=r}`` numerically singular; the
    null vector holds the coefficients of the polynomial whose roots are the atoms.
    Returns ``None`` unless the roots are real, distinct, lie in ``[0, hi]``, carry
    positive weights and reproduce every moment.
    """
    ell = mu.size - 1
    for r in range(1, ell // 2 + 1):
        h = np.array([[mu[i + j] for j in range(r + 1)] for i in range(r + 1)])
        d = 1.0 / np.sqrt(np.diag(h))
        dec = sym_eigen(h * d[:, None] * d[None, :])
        if dec.eigenvalues[-1] > ATOMIC_RANK_TOL * dec.eigenvalues[0]:
            continue
        coef = dec.eigenvectors[:, -1] * d
        if abs(coef[-1]) < 1e-12 * np.abs(coef).max():
            return None
        roots = np.roots(coef[::-1])
        if np.any(np.abs(roots.imag) > 1e-8 * max(1.0, hi)):
            return None
        t = np.sort(roots.real)
        if t[0] < -1e-9 * hi or t[-1] > hi * (1 + 1e-9) or np.any(np.diff(t) <= 0):
            return None
        t = np.clip(t, 0.0, None)
        V = np.vander(t, ell + 1, increasing=True).T
        wt = np.linalg.lstsq(V[: r], mu[: r], rcond=None)[0]
        if np.any(wt <= 0) or np.max(np.abs(V @ wt - mu) / np.maximum(np.abs(mu), 1e-12)) > 1e-8:
            return None
        return t, wt / wt.sum()
    return None


def _bin_means(x: NDArray[np.float64], w: NDArray[np.float64], p: int) -> NDArray[np.float64]:
    """Mean of the measure ``sum w_j delta_{x_j}`` over each of ``p`` equal-mass slices, ascending."""
    edges = np.concatenate([[0.0], np.cumsum(w)])
    edges[-1] = 1.0
    levels = np.arange(p + 1) / p
    # first moment of the quantile function between consecutive levels
    first = np.concatenate([[0.0], np.cumsum(w * x)])
    def partial(u):
        j = np.clip(np.searchsorted(edges, u, side="right") - 1, 0, x.size - 1)
        return first[j] + (u - edges[j]) * x[j]
    return np.diff(partial(levels)) * p


def read_data_csv(path) -> NDArray[np.float64]:
    """Dense ``p x n`` data matrix: one row per variable, comma separated, no header."""
    try:
        X = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise ValueError(f"{path}: not a numeric comma-separated matrix ({exc})") from None
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise ValueError(f"{path}: non-finite value at row {bad[0] + 1}, column {bad[1] + 1}")
    return X
