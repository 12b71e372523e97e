"""Sample covariance and correlation matrices and the statistics built on them."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .matrix import SymmetricMatrix, as_symmetric, eigenvalues, spectral_norm

__all__ = [
    "sample_covariance",
    "sample_correlation",
    "q_transform",
    "ComparisonReport",
    "comparison_report",
    "ExtremeReport",
    "extreme_report",
    "extreme_from_eigenvalues",
    "max_offdiag_scaled",
    "weyl_gap",
]


def _as_data(X: ArrayLike) -> NDArray[np.float64]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"data must be a p x n matrix, got shape {X.shape}")
    if X.shape[1] < 1:
        raise ValueError("need at least one observation")
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise ValueError(f"data has a non-finite entry at ({bad[0]}, {bad[1]})")
    return X


def sample_covariance(X: ArrayLike) -> SymmetricMatrix:
    """``S = X X' / n`` (no centering: the model has mean zero)."""
    X = _as_data(X)
    return SymmetricMatrix(X @ X.T / X.shape[1])


def sample_correlation(S: SymmetricMatrix | ArrayLike) -> SymmetricMatrix:
    """``R_ij = S_ij / sqrt(S_ii S_jj)`` with the diagonal set to exactly one."""
    s = as_symmetric(S).values
    d = np.diag(s)
    bad = np.flatnonzero(~(d > 0))
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"S[{i},{i}] = {d[i]!r} is not positive; coordinate {i} has no variance")
    inv = 1.0 / np.sqrt(d)
    r = s * inv[:, None] * inv[None, :]
    np.fill_diagonal(r, 1.0)
    return SymmetricMatrix(r)


def q_transform(X: ArrayLike, sigma: SymmetricMatrix | ArrayLike) -> SymmetricMatrix:
    """``S^Q = Q Q' / n`` with ``Q = diag(Sigma)^(-1/2) X``."""
    X = _as_data(X)
    d = as_symmetric(sigma).diagonal()
    if d.shape[0] != X.shape[0]:
        raise ValueError(f"Sigma has dimension {d.shape[0]}, data has p={X.shape[0]}")
    bad = np.flatnonzero(~(d > 0))
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"Sigma[{i},{i}] = {d[i]!r} is not positive")
    Q = X / np.sqrt(d)[:, None]
    return SymmetricMatrix(Q @ Q.T / X.shape[1])


@dataclass(frozen=True)
class ComparisonReport:
    """Scaled gaps between the sample statistics and their diagonal proxies."""

    diag_gap: float
    inv_sqrt_gap: float
    r_vs_q_gap: float
    p: int
    n: int
    gamma_hat: float

    def to_dict(self) -> dict:
        return asdict(self)


def comparison_report(X: ArrayLike, sigma: SymmetricMatrix | ArrayLike, n: int | None = None,
                      p: int | None = None, *, S: SymmetricMatrix | None = None,
                      R: SymmetricMatrix | None = None) -> ComparisonReport:
    """Diagonal and operator-norm gaps scaled by ``sqrt(n/p)``.

    ``S`` and ``R`` may be passed when already computed.
    """
    X = _as_data(X)
    p_x, n_x = X.shape
    p = p_x if p is None else p
    n = n_x if n is None else n
    if (p, n) != (p_x, n_x):
        raise ValueError(f"declared (p, n) = ({p}, {n}) but data is {p_x} x {n_x}")
    sig = as_symmetric(sigma)
    S = sample_covariance(X) if S is None else S
    R = sample_correlation(S) if R is None else R
    scale = math.sqrt(n / p)
    s_d = S.diagonal()
    sig_d = sig.diagonal()
    diag_gap = scale * float(np.max(np.abs(s_d - sig_d)))
    inv_sqrt_gap = scale * float(np.max(np.abs(1.0 / np.sqrt(s_d) - 1.0 / np.sqrt(sig_d))))
    diff = R.values - q_transform(X, sig).values
    r_vs_q = 0.0 if not np.any(diff) else scale * spectral_norm(diff)
    return ComparisonReport(diag_gap, inv_sqrt_gap, r_vs_q, p, n, p / n)


@dataclass(frozen=True)
class ExtremeReport:
    """Largest and ``min(p, n)``-th largest eigenvalue, raw and centered/scaled."""

    top_scaled: float
    bottom_scaled: float
    lambda_max: float
    lambda_min: float

    def to_dict(self) -> dict:
        return asdict(self)


def extreme_from_eigenvalues(w: ArrayLike, n: int, p: int) -> ExtremeReport:
    w = np.sort(np.asarray(w, dtype=np.float64))[::-1]
    if w.size != p:
        raise ValueError(f"expected {p} eigenvalues, got {w.size}")
    top = float(w[0])
    bottom = float(w[min(p, n) - 1])
    scale = math.sqrt(n / p)
    return ExtremeReport(scale * (top - 1.0), scale * (bottom - 1.0), top, bottom)


def extreme_report(M: SymmetricMatrix | ArrayLike, n: int, p: int) -> ExtremeReport:
    """Extreme eigenvalue statistics of ``S`` or ``R`` built from a ``p x n`` sample.

    Eigenvalues past rank ``min(p, n)`` are structural zeros and are ignored.
    """
    m = as_symmetric(M)
    if m.dim != p:
        raise ValueError(f"matrix has dimension {m.dim}, expected p={p}")
    return extreme_from_eigenvalues(eigenvalues(m), n, p)


def max_offdiag_scaled(R: SymmetricMatrix | ArrayLike, n: int, p: int | None = None) -> float:
    """``sqrt(n / log p) * max_{i != j} |R_ij|`` (natural log)."""
    r = as_symmetric(R).values
    p = r.shape[0] if p is None else p
    if p < 2:
        raise ValueError("max off-diagonal statistic needs p >= 2")
    iu = np.triu_indices(r.shape[0], 1)
    return math.sqrt(n / math.log(p)) * float(np.max(np.abs(r[iu])))


def weyl_gap(A: SymmetricMatrix | ArrayLike, B: SymmetricMatrix | ArrayLike) -> tuple[float, float]:
    """``(max_i |lambda_i(A) - lambda_i(B)|, ||A - B||)``; the first never exceeds the second."""
    a = as_symmetric(A)
    b = as_symmetric(B)
    shift = float(np.max(np.abs(eigenvalues(a) - eigenvalues(b))))
    return shift, spectral_norm(a.values - b.values)
