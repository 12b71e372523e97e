"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``.

Same algorithms and the same rotation schedule, expressed with numpy fancy
indexing instead of explicit loops. Selected by :mod:`rmtcorr._backend` when
the extension is missing or ``RMTCORR_PURE_PYTHON`` is set.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np


def _round_robin(m: int) -> list[tuple[np.ndarray, np.ndarray]]:
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        first = np.array(players[: m // 2], dtype=np.intp)
        second = np.array(players[::-1][: m // 2], dtype=np.intp)
        rounds.append((np.minimum(first, second), np.maximum(first, second)))
        players = [players[0], players[-1], *players[1:-1]]
    return rounds


def jacobi_eigh(a: np.ndarray, want_vectors: bool = True, rtol: float = 1e-13,
                max_sweeps: int = 100):
    n = a.shape[0]
    m = n + (n % 2)
    rounds = [(P[Q < n], Q[Q < n]) for P, Q in _round_robin(m)]
    v = np.eye(n) if want_vectors else None
    target = rtol * np.sqrt(np.sum(a * a))
    off = _off_norm(a)
    sweep = 0
    while off >= target and off > 0.0 and sweep < max_sweeps:
        sweep += 1
        for P, Q in rounds:
            apq = a[P, Q]
            app = a[P, P]
            aqq = a[Q, Q]
            live = apq != 0.0
            if sweep > 3:
                tiny = ((np.abs(app) + 100.0 * np.abs(apq) == np.abs(app))
                        & (np.abs(aqq) + 100.0 * np.abs(apq) == np.abs(aqq)))
                a[P[tiny], Q[tiny]] = 0.0
                a[Q[tiny], P[tiny]] = 0.0
                live &= ~tiny
            if not live.any():
                continue
            P, Q, apq, app, aqq = P[live], Q[live], apq[live], app[live], aqq[live]
            theta = (aqq - app) / (2.0 * apq)
            with np.errstate(over="ignore"):
                t = np.where(np.abs(theta) > 1e150, 0.5 / theta,
                             np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0)))
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            g, h = a[:, P].copy(), a[:, Q].copy()
            a[:, P] = c * g - s * h
            a[:, Q] = s * g + c * h
            g, h = a[P, :].copy(), a[Q, :].copy()
            a[P, :] = c[:, None] * g - s[:, None] * h
            a[Q, :] = s[:, None] * g + c[:, None] * h
            a[P, Q] = 0.0
            a[Q, P] = 0.0
            if v is not None:
                g, h = v[:, P].copy(), v[:, Q].copy()
                v[:, P] = c * g - s * h
                v[:, Q] = s * g + c * h
        off = _off_norm(a)
    return np.diag(a).copy(), v, sweep, off


def _off_norm(a: np.ndarray) -> float:
    upper = np.triu(a, 1)
    return float(np.sqrt(2.0 * np.sum(upper * upper)))


def increasing_path_sum(m: np.ndarray, k: int) -> float:
    n = m.shape[0]
    if k < 1 or k > n:
        raise ValueError("k must satisfy 1 <= k <= n")
    total = 0.0
    for sigma in combinations(range(n), k):
        prod = m[sigma[-1], sigma[0]]
        for i in range(k - 1):
            prod *= m[sigma[i], sigma[i + 1]]
        total += prod
    return float(total)
