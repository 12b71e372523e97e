"""Spiked correlation model: the psi map and limits of the spiked sample eigenvalues.

The population correlation matrix is ``blockdiag(Lambda, V_p)`` where the
fixed ``m x m`` block ``Lambda`` carries eigenvalues ``alpha_i`` (with
multiplicities ``m_i``) and the ESD of ``V_p`` tends to the bulk ``H``.
A spike is detectable when ``psi'(alpha) > 0``; the matching sample
eigenvalues then converge to ``psi(alpha)``. Otherwise they stick to the
``H(alpha)``-quantile of the bulk limit law.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .datagen import MixingSpec, correlation_with_spectrum
from .lsd import AtomicMeasure, LimitLaw, law_from_stieltjes, mp_law, quantile

__all__ = [
    "SpikedModel",
    "SpikePrediction",
    "psi",
    "psi_prime",
    "classify_spikes",
    "spike_threshold_delta1",
    "write_predictions_csv",
]

SUPPORT_TOL = 1e-9


def _check_off_support(alpha: float, H: AtomicMeasure) -> None:
    d = H.distance_to_support(alpha)
    if d <= SUPPORT_TOL:
        raise ValueError(f"alpha={alpha} lies on an atom of H (distance {d:.1e}); psi is singular there")


def psi(alpha: float, gamma: float, H: AtomicMeasure) -> float:
    """``alpha + gamma * sum_j w_j t_j alpha / (alpha - t_j)``."""
    _check_off_support(alpha, H)
    return float(alpha + gamma * np.sum(H.w * H.t * alpha / (alpha - H.t)))


def psi_prime(alpha: float, gamma: float, H: AtomicMeasure) -> float:
    """``1 - gamma * sum_j w_j t_j^2 / (alpha - t_j)^2``."""
    _check_off_support(alpha, H)
    return float(1.0 - gamma * np.sum(H.w * H.t ** 2 / (alpha - H.t) ** 2))


def spike_threshold_delta1(gamma: float) -> tuple[float, float]:
    """For ``H = delta_1``: spikes are detectable exactly outside ``[1 - sqrt(gamma), 1 + sqrt(gamma)]``."""
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    r = math.sqrt(gamma)
    return 1.0 - r, 1.0 + r


@dataclass(frozen=True)
class SpikedModel:
    """Spikes ``(alpha_i, m_i)``, bulk ``H`` and aspect ratio ``gamma``.

    ``support_hull`` replaces the atom set of ``H`` as the support when ``H``
    discretizes a continuous law.
    """

    spikes: tuple[tuple[float, int], ...]
    H: AtomicMeasure = field(default_factory=lambda: AtomicMeasure.delta(1.0))
    gamma: float = 0.5
    p: int | None = None
    support_hull: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        spikes = tuple(sorted(((float(a), int(m)) for a, m in self.spikes), key=lambda s: -s[0]))
        object.__setattr__(self, "spikes", spikes)
        if not spikes:
            raise ValueError("need at least one spike")
        if any(m < 1 for _, m in spikes):
            raise ValueError("multiplicities must be positive")
        if len({a for a, _ in spikes}) != len(spikes):
            raise ValueError("spike values must be distinct; use the multiplicity instead")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.p is not None and self.p <= self.m:
            raise ValueError(f"p={self.p} must exceed the spike block size m={self.m}")
        if not any(not self.in_support(a) for a, _ in spikes):
            raise ValueError("at least one alpha must lie outside supp(H)")

    @property
    def m(self) -> int:
        return sum(m for _, m in self.spikes)

    @property
    def spectrum(self) -> np.ndarray:
        """Eigenvalues of ``Lambda`` in decreasing order."""
        return np.repeat([a for a, _ in self.spikes], [m for _, m in self.spikes])

    def in_support(self, alpha: float) -> bool:
        if self.support_hull is not None:
            lo, hi = self.support_hull
            return lo - SUPPORT_TOL <= alpha <= hi + SUPPORT_TOL
        return self.H.distance_to_support(alpha) <= SUPPORT_TOL

    def mixing(self, p: int | None = None, rotation_seed: int = 0) -> MixingSpec:
        """Mixing spec with identity bulk; ``Lambda`` realized with unit diagonal."""
        p = self.p if p is None else p
        if p is None:
            raise ValueError("p is required to instantiate the model")
        if not (self.H.t.size == 1 and self.H.t[0] == 1.0):
            raise ValueError("Monte Carlo instantiation supports the identity bulk H = delta_1 only")
        lam = correlation_with_spectrum(self.spectrum, seed=rotation_seed)
        return MixingSpec("spiked", p, lam=tuple(tuple(r) for r in lam))


@dataclass(frozen=True)
class SpikePrediction:
    alpha: float
    multiplicity: int
    nu: int | None          # ranks nu+1 .. nu+multiplicity (1-based)
    detectable: bool
    psi_prime: float
    predicted_limit: float

    @property
    def ranks(self) -> list[int] | None:
        if self.nu is None:
            return None
        return list(range(self.nu + 1, self.nu + self.multiplicity + 1))

    def to_dict(self) -> dict:
        return asdict(self)


def _bulk_law(model: SpikedModel) -> LimitLaw:
    if model.H.t.size == 1 and model.H.t[0] == 1.0:
        return mp_law(model.gamma)
    return law_from_stieltjes("general", model.gamma, model.H)


def classify_spikes(model: SpikedModel, law: LimitLaw | None = None) -> list[SpikePrediction]:
    """Predicted a.s. limits of the sample eigenvalues at each spike's ranks.

    Ranks count the eigenvalues of ``Gamma_p`` above ``alpha``: larger spikes
    plus ``(p - m)(1 - H(alpha))`` bulk values (needs ``model.p``).
    Values of ``alpha`` inside the support are not spikes and are skipped.
    """
    out = []
    for alpha, mult in model.spikes:
        if model.in_support(alpha):
            warnings.warn(f"alpha={alpha} lies in supp(H); it is not a spike and is skipped",
                          RuntimeWarning, stacklevel=2)
            continue
        larger = sum(m for a, m in model.spikes if a > alpha)
        h_alpha = float(model.H.cdf(alpha))
        nu = None
        if model.p is not None:
            nu = larger + int(round((model.p - model.m) * (1.0 - h_alpha)))
        elif h_alpha == 1.0:
            nu = larger
        d = psi_prime(alpha, model.gamma, model.H)
        if d > 0:
            limit = psi(alpha, model.gamma, model.H)
        else:
            law = _bulk_law(model) if law is None else law
            limit = quantile(law, h_alpha)
        out.append(SpikePrediction(alpha, mult, nu, d > 0, d, limit))
    return out


def write_predictions_csv(path, predictions: Sequence[SpikePrediction],
                          mc: Sequence[tuple[float, float]] | None = None) -> None:
    """Columns ``alpha,multiplicity,detectable,predicted_limit,mc_mean,mc_sd``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "multiplicity", "detectable", "predicted_limit", "mc_mean", "mc_sd"])
        for i, pr in enumerate(predictions):
            mean, sd = (mc[i] if mc is not None else (float("nan"), float("nan")))
            w.writerow([repr(pr.alpha), pr.multiplicity, int(pr.detectable), repr(pr.predicted_limit),
                        repr(float(mean)), repr(float(sd))])
