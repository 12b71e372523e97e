"""Compare the compiled kernels with the numpy fallback.

The Jacobi kernels work in place, so every call gets a fresh copy.

    python3 benchmarks/bench_kernels.py [--sizes 50 100 200] [--repeat 3]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from rmtcorr import _fallback

try:
    from rmtcorr import _kernels
except ImportError:  # extension not built
    _kernels = None


def _best(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 100, 200])
    ap.add_argument("--path-n", type=int, default=60)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _kernels is None:
        print("compiled extension not available; timing fallback only")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<22}{'size':>6}{'fallback s':>12}{'compiled s':>12}{'speedup':>9}")
    for p in args.sizes:
        b = rng.standard_normal((p, p))
        a = (b + b.T) / 2
        t_py = _best(lambda: _fallback.jacobi_eigh(a.copy()), args.repeat)
        row = f"{'jacobi_eigh':<22}{p:>6}{t_py:>12.4f}"
        if _kernels is not None:
            w_c = _kernels.jacobi_eigh(a.copy())[0]
            np.testing.assert_allclose(np.sort(w_c), np.linalg.eigvalsh(a), atol=1e-9)
            t_c = _best(lambda: _kernels.jacobi_eigh(a.copy()), args.repeat)
            row += f"{t_c:>12.4f}{t_py / t_c:>8.1f}x"
        print(row)
    m = rng.standard_normal((args.path_n, args.path_n))
    m = m + m.T
    for k in (2, 3, 4):
        t_py = _best(lambda: _fallback.increasing_path_sum(m, k), args.repeat)
        row = f"{'increasing_path_sum':<22}{f'k={k}':>6}{t_py:>12.4f}"
        if _kernels is not None:
            assert np.isclose(_kernels.increasing_path_sum(m, k), _fallback.increasing_path_sum(m, k), rtol=1e-10)
            t_c = _best(lambda: _kernels.increasing_path_sum(m, k), args.repeat)
            row += f"{t_c:>12.4f}{t_py / max(t_c, 1e-9):>8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
