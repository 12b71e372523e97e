"""Seeded generation of data matrices ``X = A Z``.

Entry laws for ``Z`` are standardized to mean 0 and variance 1. Mixing
matrices ``A`` come from a small set of families; every constructed ``A`` is
checked against the uniform bounds

    c1 < min_i (A A')_ii   and   ||A||^2 <= c2

with ``c1 = 1e-6`` and ``c2 = 1e6``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .matrix import SymmetricMatrix, spectral_norm, sym_eigen
from .rng import RandomStream

__all__ = [
    "EntryLaw",
    "MixingSpec",
    "MixingMatrix",
    "DataModel",
    "sample_Z",
    "build_A",
    "generate",
    "correlation_with_spectrum",
]

C1_MIN = 1e-6
C2_MAX = 1e6
UNIT_DIAG_TOL = 1e-10
LAWS = ("gaussian", "rademacher", "uniform", "student_t", "pareto_sym")
MIXINGS = ("identity", "ar1", "row_scaled", "spiked")


@dataclass(frozen=True)
class EntryLaw:
    """Distribution of the iid entries of ``Z``.

    ``student_t`` takes ``nu > 4`` (finite fourth moment). ``pareto_sym``
    takes ``alpha`` in (2, 4): unit variance but infinite fourth moment.
    """

    kind: str = "gaussian"
    nu: float | None = None
    alpha: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in LAWS:
            raise ValueError(f"unknown entry law {self.kind!r}; expected one of {LAWS}")
        if self.kind == "student_t":
            if self.nu is None or not self.nu > 4:
                raise ValueError(f"student_t needs nu > 4, got {self.nu}")
        if self.kind == "pareto_sym":
            if self.alpha is None or not 2 < self.alpha < 4:
                raise ValueError(f"pareto_sym needs alpha in (2, 4), got {self.alpha}")

    @property
    def params(self) -> dict[str, float]:
        if self.kind == "student_t":
            return {"nu": self.nu}
        if self.kind == "pareto_sym":
            return {"alpha": self.alpha}
        return {}

    @property
    def finite_fourth_moment(self) -> bool:
        return self.kind != "pareto_sym"

    @classmethod
    def from_params(cls, kind: str, params: dict[str, Any] | None = None) -> EntryLaw:
        params = dict(params or {})
        unknown = set(params) - {"nu", "alpha"}
        if unknown:
            raise ValueError(f"unknown law_params {sorted(unknown)} for law {kind!r}")
        return cls(kind, nu=params.get("nu"), alpha=params.get("alpha"))


def sample_Z(law: EntryLaw, p: int, n: int, stream: RandomStream) -> NDArray[np.float64]:
    """``p x n`` matrix of iid standardized entries drawn from ``stream``."""
    if p < 1 or n < 1:
        raise ValueError(f"p and n must be positive, got p={p}, n={n}")
    shape = (p, n)
    if law.kind == "gaussian":
        return stream.standard_normal(shape)
    if law.kind == "rademacher":
        return 2.0 * stream.integers(0, 2, size=shape).astype(np.float64) - 1.0
    if law.kind == "uniform":
        return (2.0 * stream.random(shape) - 1.0) * math.sqrt(3.0)
    if law.kind == "student_t":
        nu = law.nu
        return stream.standard_t(nu, shape) * math.sqrt((nu - 2.0) / nu)
    # symmetrized Pareto: |V| = U^(-1/alpha) has E V^2 = alpha / (alpha - 2)
    alpha = law.alpha
    u = 1.0 - stream.random(shape)  # in (0, 1]
    sign = 2.0 * stream.integers(0, 2, size=shape) - 1.0
    return sign * u ** (-1.0 / alpha) * math.sqrt((alpha - 2.0) / alpha)


def _as_tuple_matrix(values: ArrayLike | None) -> tuple[tuple[float, ...], ...] | None:
    if values is None:
        return None
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"lambda must be a square matrix, got shape {arr.shape}")
    return tuple(tuple(float(x) for x in row) for row in arr)


@dataclass(frozen=True)
class MixingSpec:
    """Family and parameters of the ``p x p`` mixing matrix ``A``.

    ``spiked`` takes the leading block ``lam`` (a correlation matrix: PSD
    with unit diagonal); the remaining ``p - m`` coordinates are independent.
    """

    kind: str
    p: int
    rho: float = 0.0
    scales: tuple[float, ...] | None = None
    lam: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in MIXINGS:
            raise ValueError(f"unknown mixing {self.kind!r}; expected one of {MIXINGS}")
        if self.p < 1:
            raise ValueError(f"p must be positive, got {self.p}")
        if self.kind == "ar1" and not 0.0 <= self.rho < 1.0:
            raise ValueError(f"ar1 needs rho in [0, 1), got {self.rho}")
        if self.kind == "row_scaled":
            if self.scales is None or len(self.scales) != self.p:
                raise ValueError(f"row_scaled needs {self.p} scales")
            if min(self.scales) <= 0:
                raise ValueError("row_scaled scales must be positive")
        if self.kind == "spiked":
            if self.lam is None:
                raise ValueError("spiked mixing needs the leading block 'lambda'")
            if len(self.lam) > self.p:
                raise ValueError(f"lambda block ({len(self.lam)}) larger than p={self.p}")

    @classmethod
    def from_params(cls, kind: str, p: int, params: dict[str, Any] | None = None) -> MixingSpec:
        params = dict(params or {})
        allowed = {"identity": set(), "ar1": {"rho"}, "row_scaled": {"scales"},
                   "spiked": {"lambda", "spectrum", "rotation_seed"}}.get(kind, set())
        unknown = set(params) - allowed
        if unknown:
            raise ValueError(f"unknown mixing_params {sorted(unknown)} for mixing {kind!r}")
        lam = params.get("lambda")
        if kind == "spiked" and lam is None and "spectrum" in params:
            lam = correlation_with_spectrum(params["spectrum"], seed=params.get("rotation_seed", 0))
        scales = params.get("scales")
        return cls(
            kind,
            int(p),
            rho=float(params.get("rho", 0.0)),
            scales=tuple(float(s) for s in scales) if scales is not None else None,
            lam=_as_tuple_matrix(lam),
        )

    @property
    def params(self) -> dict[str, Any]:
        if self.kind == "ar1":
            return {"rho": self.rho}
        if self.kind == "row_scaled":
            return {"scales": list(self.scales)}
        if self.kind == "spiked":
            return {"lambda": [list(r) for r in self.lam]}
        return {}


@dataclass(frozen=True)
class MixingMatrix:
    """``A`` with its population covariance and correlation matrices."""

    A: NDArray[np.float64] = field(repr=False)
    sigma: SymmetricMatrix = field(repr=False)
    gamma: SymmetricMatrix = field(repr=False)
    c1: float   # realized min_i Sigma_ii
    c2: float   # realized ||A||^2


def _psd_sqrt(m: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    dec = sym_eigen(m)
    w = dec.eigenvalues
    q = dec.eigenvectors
    root = (q * np.sqrt(np.clip(w, 0.0, None))) @ q.T
    return 0.5 * (root + root.T), w


@lru_cache(maxsize=16)
def build_A(spec: MixingSpec) -> MixingMatrix:
    """Construct ``A``, ``Sigma = A A'`` and ``Gamma``; verify the bounds on ``A``."""
    p = spec.p
    if spec.kind == "identity":
        A = np.eye(p)
        norm_sq = 1.0
    elif spec.kind == "row_scaled":
        s = np.asarray(spec.scales)
        A = np.diag(s)
        norm_sq = float(np.max(s) ** 2)
    elif spec.kind == "ar1":
        idx = np.arange(p)
        toeplitz = spec.rho ** np.abs(idx[:, None] - idx[None, :])
        if spec.rho == 0.0:
            A, norm_sq = np.eye(p), 1.0
        else:
            A, w = _psd_sqrt(toeplitz)
            norm_sq = float(w[0])
    else:
        lam = np.asarray(spec.lam)
        m = lam.shape[0]
        if np.max(np.abs(np.diag(lam) - 1.0)) > UNIT_DIAG_TOL:
            raise ValueError("lambda block must have unit diagonal")
        root, w = _psd_sqrt(lam)
        if w[-1] < -1e-10:
            raise ValueError(f"lambda block is not positive semidefinite (min eigenvalue {w[-1]:.3e})")
        A = np.eye(p)
        A[:m, :m] = root
        norm_sq = float(max(w[0], 1.0)) if m < p else float(w[0])

    sigma_arr = A @ A.T
    if spec.kind == "identity":
        sigma_arr = np.eye(p)
    sigma = SymmetricMatrix(sigma_arr)
    d = np.sqrt(np.diag(sigma_arr))
    gamma_arr = sigma_arr / np.outer(d, d)
    np.fill_diagonal(gamma_arr, 1.0)
    gamma = SymmetricMatrix(gamma_arr)
    c1 = float(np.min(np.diag(sigma_arr)))
    if not c1 > C1_MIN:
        raise ValueError(f"min diagonal of A A' is {c1:.3e}, below the bound {C1_MIN}")
    if norm_sq > C2_MAX:
        raise ValueError(f"||A||^2 = {norm_sq:.3e} exceeds the bound {C2_MAX}")
    A.setflags(write=False)
    return MixingMatrix(A=A, sigma=sigma, gamma=gamma, c1=c1, c2=norm_sq)


def correlation_with_spectrum(spectrum: ArrayLike, *, seed: int = 0, max_attempts: int = 8,
                              tol: float = 1e-6) -> NDArray[np.float64]:
    """Correlation matrix (unit diagonal, PSD) with the given eigenvalues.

    The eigenvalues must be nonnegative and average to one. Starts from
    ``Q diag(spectrum) Q'`` for a seeded orthogonal ``Q`` and applies Givens
    rotations (Bendel-Mickey) that move each diagonal entry to one while
    keeping the spectrum fixed. The final unit-diagonal rescaling is accepted
    only if it moves no eigenvalue by more than ``tol``; otherwise a new ``Q``
    is tried.
    """
    lam = np.sort(np.asarray(spectrum, dtype=np.float64))[::-1]
    m = lam.size
    if m == 0 or lam[-1] < -1e-12:
        raise ValueError("spectrum must be nonempty and nonnegative")
    if abs(lam.sum() - m) > 1e-9 * m:
        raise ValueError(f"spectrum must sum to its length {m} (unit diagonal), got {lam.sum():.12g}")
    for attempt in range(max_attempts):
        stream = RandomStream(seed + attempt)
        q, r = np.linalg.qr(stream.standard_normal((m, m)))
        q = q * np.sign(np.diag(r))
        a = (q * lam) @ q.T
        a = 0.5 * (a + a.T)
        _givens_to_unit_diagonal(a)
        d = np.sqrt(np.clip(np.diag(a), 1e-300, None))
        a = a / np.outer(d, d)
        np.fill_diagonal(a, 1.0)
        got = sym_eigen(a, vectors=False).eigenvalues
        if np.max(np.abs(got - lam)) < tol:
            return SymmetricMatrix(a).values.copy()
    raise ValueError(f"could not realize spectrum within {tol} after {max_attempts} attempts")


def _givens_to_unit_diagonal(a: NDArray[np.float64]) -> None:
    m = a.shape[0]
    for i in range(m - 1):
        aii = a[i, i]
        if aii == 1.0:
            continue
        partner = None
        for j in range(i + 1, m):
            if (aii > 1.0) != (a[j, j] > 1.0) and a[j, j] != 1.0:
                partner = j
                break
        if partner is None:
            continue
        j = partner
        aiid, ajjd, aij = aii - 1.0, a[j, j] - 1.0, a[i, j]
        dd = math.sqrt(max(aij * aij - aiid * ajjd, 0.0))
        t = (aij + math.copysign(dd, aij)) / ajjd
        c = 1.0 / math.sqrt(1.0 + t * t)
        s = c * t
        g = np.eye(m)
        g[i, i] = g[j, j] = c
        g[i, j] = s
        g[j, i] = -s
        a[:] = g.T @ a @ g


@dataclass(frozen=True)
class DataModel:
    """Entry law, mixing family, dimensions and seed of one data matrix."""

    law: EntryLaw
    mixing: MixingSpec
    p: int
    n: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError(f"p must be at least 1, got {self.p}")
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        if self.mixing.p != self.p:
            raise ValueError(f"mixing dimension {self.mixing.p} != p={self.p}")

    @property
    def gamma_ratio(self) -> float:
        return self.p / self.n

    def with_seed(self, seed: int) -> DataModel:
        return DataModel(self.law, self.mixing, self.p, self.n, int(seed))

    def with_n(self, n: int) -> DataModel:
        return DataModel(self.law, self.mixing, self.p, int(n), self.seed)

    def to_dict(self) -> dict[str, Any]:
        return {
            "law": self.law.kind,
            "law_params": self.law.params,
            "mixing": self.mixing.kind,
            "mixing_params": self.mixing.params,
            "p": self.p,
            "n": self.n,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> DataModel:
        missing = {"law", "mixing", "p", "n"} - set(d)
        if missing:
            raise ValueError(f"model is missing fields {sorted(missing)}")
        unknown = set(d) - {"law", "law_params", "mixing", "mixing_params", "p", "n", "seed"}
        if unknown:
            raise ValueError(f"model has unknown fields {sorted(unknown)}")
        p = int(d["p"])
        return cls(
            law=EntryLaw.from_params(d["law"], d.get("law_params")),
            mixing=MixingSpec.from_params(d["mixing"], p, d.get("mixing_params")),
            p=p,
            n=int(d["n"]),
            seed=int(d.get("seed", 0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> DataModel:
        return cls.from_dict(json.loads(text))


def generate(model: DataModel, stream: RandomStream | None = None) -> NDArray[np.float64]:
    """Data matrix ``X = A Z``; bit-identical for a fixed model seed."""
    stream = stream if stream is not None else RandomStream(model.seed)
    Z = sample_Z(model.law, model.p, model.n, stream)
    spec = model.mixing
    if spec.kind == "identity" or (spec.kind == "ar1" and spec.rho == 0.0):
        return Z
    if spec.kind == "row_scaled":
        return np.asarray(spec.scales)[:, None] * Z
    A = build_A(spec).A
    if spec.kind == "spiked":
        m = len(spec.lam)
        X = Z.copy()
        X[:m] = A[:m, :m] @ Z[:m]
        return X
    return A @ Z


def mixing_norm_sq(A: ArrayLike) -> float:
    """``||A||^2`` computed directly as the spectral norm of ``A A'``."""
    A = np.asarray(A, dtype=np.float64)
    return spectral_norm(A @ A.T)
