"""Dense symmetric matrices, their eigendecompositions and spectral distributions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ._backend import jacobi_eigh
from .errors import ConvergenceError

__all__ = [
    "SymmetricMatrix",
    "EigenDecomposition",
    "EmpiricalSpectralDistribution",
    "as_symmetric",
    "sym_eigen",
    "eigenvalues",
    "spectral_norm",
    "kolmogorov_distance",
]

JACOBI_RTOL = 1e-13
JACOBI_MAX_SWEEPS = 100
KOLMOGOROV_GRID = 2048


class SymmetricMatrix:
    """Real symmetric ``p x p`` matrix backed by an immutable float64 array.

    The upper triangle of the input is authoritative; the lower triangle is
    overwritten with its mirror so that ``m[i, j] == m[j, i]`` holds exactly.
    """

    __slots__ = ("_a",)

    def __init__(self, values: ArrayLike):
        a = np.array(values, dtype=np.float64, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if a.shape[0] < 1:
            raise ValueError("dimension must be at least 1")
        lower = np.tril_indices(a.shape[0], -1)
        a[lower] = a.T[lower]
        a.setflags(write=False)
        self._a = a

    @classmethod
    def identity(cls, p: int) -> SymmetricMatrix:
        return cls(np.eye(p))

    @classmethod
    def diagonal_matrix(cls, diag: ArrayLike) -> SymmetricMatrix:
        return cls(np.diag(np.asarray(diag, dtype=np.float64)))

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    @property
    def values(self) -> NDArray[np.float64]:
        """Read-only view of the full dense storage."""
        return self._a

    def __array__(self, dtype=None, copy=None):
        if dtype is None or np.dtype(dtype) == self._a.dtype:
            return self._a.copy() if copy else self._a
        return self._a.astype(dtype)

    def __getitem__(self, idx):
        return self._a[idx]

    def __repr__(self) -> str:
        return f"SymmetricMatrix(dim={self.dim})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SymmetricMatrix):
            return NotImplemented
        return self._a.shape == other._a.shape and bool(np.array_equal(self._a, other._a))

    __hash__ = None  # type: ignore[assignment]

    def __add__(self, other: SymmetricMatrix) -> SymmetricMatrix:
        return SymmetricMatrix(self._a + as_symmetric(other)._a)

    def __sub__(self, other: SymmetricMatrix) -> SymmetricMatrix:
        return SymmetricMatrix(self._a - as_symmetric(other)._a)

    def __mul__(self, scalar: float) -> SymmetricMatrix:
        return SymmetricMatrix(self._a * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> SymmetricMatrix:
        return SymmetricMatrix(-self._a)

    def diagonal(self) -> NDArray[np.float64]:
        return np.diag(self._a).copy()

    def trace(self) -> float:
        return float(np.trace(self._a))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self._a)))


def as_symmetric(m: SymmetricMatrix | ArrayLike) -> SymmetricMatrix:
    return m if isinstance(m, SymmetricMatrix) else SymmetricMatrix(m)


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in descending order with matching orthonormal columns."""

    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.float64] | None
    sweeps: int = 0

    def reconstruct(self) -> NDArray[np.float64]:
        if self.eigenvectors is None:
            raise ValueError("decomposition was computed without eigenvectors")
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.T


def sym_eigen(m: SymmetricMatrix | ArrayLike, *, vectors: bool = True) -> EigenDecomposition:
    """Jacobi eigendecomposition, eigenvalues sorted from largest to smallest.

    Equal eigenvalues keep the order in which the rotations left them
    (stable sort), so callers must not rely on a particular basis inside an
    eigenspace.
    """
    sm = as_symmetric(m)
    if not sm.is_finite():
        bad = np.argwhere(~np.isfinite(sm.values))[0]
        raise ValueError(f"matrix has a non-finite entry at ({bad[0]}, {bad[1]})")
    work = np.ascontiguousarray(sm.values, dtype=np.float64).copy()
    w, q, sweeps, off = jacobi_eigh(work, vectors, JACOBI_RTOL, JACOBI_MAX_SWEEPS)
    target = JACOBI_RTOL * float(np.linalg.norm(sm.values))
    if off >= target and off > 0.0:
        raise ConvergenceError("Jacobi iteration did not converge", float(off), int(sweeps))
    order = np.argsort(-np.asarray(w), kind="stable")
    w = np.asarray(w)[order]
    if q is not None:
        q = np.ascontiguousarray(np.asarray(q)[:, order])
    return EigenDecomposition(eigenvalues=w, eigenvectors=q, sweeps=int(sweeps))


def eigenvalues(m: SymmetricMatrix | ArrayLike) -> NDArray[np.float64]:
    """Descending eigenvalues only (skips eigenvector accumulation)."""
    return sym_eigen(m, vectors=False).eigenvalues


def spectral_norm(m: SymmetricMatrix | ArrayLike) -> float:
    w = eigenvalues(m)
    return float(max(abs(w[0]), abs(w[-1])))


class Distribution(Protocol):
    def cdf(self, x: ArrayLike) -> NDArray[np.float64]: ...

    @property
    def support(self) -> tuple[float, float]: ...

    @property
    def jump_points(self) -> NDArray[np.float64]: ...


class EmpiricalSpectralDistribution:
    """Uniform measure on a finite list of eigenvalues."""

    def __init__(self, points: ArrayLike):
        pts = np.sort(np.asarray(points, dtype=np.float64).ravel())
        if pts.size == 0:
            raise ValueError("empirical spectral distribution needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("eigenvalues must be finite")
        pts.setflags(write=False)
        self.points = pts

    @classmethod
    def of(cls, m: SymmetricMatrix | ArrayLike) -> EmpiricalSpectralDistribution:
        return cls(eigenvalues(m))

    def __len__(self) -> int:
        return self.points.size

    def cdf(self, x: ArrayLike) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=np.float64)
        return np.searchsorted(self.points, x, side="right") / self.points.size

    @property
    def support(self) -> tuple[float, float]:
        return float(self.points[0]), float(self.points[-1])

    @property
    def jump_points(self) -> NDArray[np.float64]:
        return np.unique(self.points)


def kolmogorov_distance(f: Distribution, g: Distribution, *, grid_size: int = KOLMOGOROV_GRID) -> float:
    """Sup-distance between two CDFs evaluated on a common grid.

    The grid is the union of both jump sets (with their left limits) and
    ``grid_size`` equispaced points spanning both supports.
    """
    jumps = np.concatenate([np.asarray(f.jump_points), np.asarray(g.jump_points)])
    lo = min(f.support[0], g.support[0])
    hi = max(f.support[1], g.support[1])
    grid = np.concatenate([
        jumps,
        np.nextafter(jumps, -np.inf),
        np.linspace(lo, hi, grid_size),
    ])
    if grid.size == 0:
        raise ValueError("empty spectrum")
    return float(np.max(np.abs(f.cdf(grid) - g.cdf(grid))))
