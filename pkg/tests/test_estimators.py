import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rmtcorr.datagen import DataModel, EntryLaw, MixingSpec, build_A, generate
from rmtcorr.errors import InfeasibleMomentsError
from rmtcorr.estimators import (
    MomentVector,
    ThresholdRule,
    default_threshold,
    estimate_correlation_moments,
    hankel_min_eigenvalue,
    increasing_path_average_bruteforce,
    moment_estimate,
    moment_estimates,
    path_product,
    read_data_csv,
    reconstruct_spectrum,
    threshold_estimate,
    trace_path_estimate,
)
from rmtcorr.matrix import SymmetricMatrix

M3 = np.array([[1.0, 2, 3], [2, 4, 5], [3, 5, 6]])


def itertools_path_average(m, k):
    """Independent enumeration with itertools."""
    n = m.shape[0]
    total = 0.0
    for sigma in itertools.combinations(range(n), k):
        prod = 1.0
        for a, b in zip(sigma, sigma[1:] + sigma[:1]):
            prod *= m[a, b]
        total += prod
    return total / math.comb(n, k)


class TestThreshold:
    def test_default_values(self):
        assert default_threshold(100, 100, 2.1) == pytest.approx(2.1 * math.sqrt(math.log(100) / 100), rel=1e-15)
        assert default_threshold(100, 100, 2.1) == pytest.approx(0.450653, abs=1e-6)
        assert default_threshold(math.e ** 2, 4, 2.1) == pytest.approx(1.4849, abs=1e-4)
        assert default_threshold(50, 400) == pytest.approx(default_threshold(50, 100) / 2)

    def test_rule_warns_below_two(self):
        with pytest.warns(UserWarning):
            ThresholdRule(10, 10, M=2.0)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            ThresholdRule(10, 10, M=2.1)

    def test_identity_unchanged(self):
        np.testing.assert_array_equal(threshold_estimate(np.eye(4), 0.9).values, np.eye(4))

    def test_all_small_gives_diagonal(self):
        r = np.array([[1, .1, -.2], [.1, 1, .05], [-.2, .05, 1]])
        np.testing.assert_array_equal(threshold_estimate(r, 0.3).values, np.eye(3))

    def test_hand_case(self):
        r = np.array([[1, .6, .3], [.6, 1, -.44], [.3, -.44, 1]])
        out = threshold_estimate(r, 0.45).values
        np.testing.assert_array_equal(out, [[1, .6, 0], [.6, 1, 0], [0, 0, 1]])

    def test_diagonal_kept(self):
        out = threshold_estimate(np.diag([0.1, 0.2]), 0.5)
        np.testing.assert_array_equal(out.values, np.diag([0.1, 0.2]))

    @given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
    def test_idempotent(self, seed, t):
        a = np.random.default_rng(seed).uniform(-1, 1, (6, 6))
        m = SymmetricMatrix((a + a.T) / 2)
        once = threshold_estimate(m, t)
        assert threshold_estimate(once, t) == once


class TestPathProduct:
    def test_self_loop(self):
        assert path_product(M3, (1,)) == 4.0

    def test_hand_cases(self):
        assert path_product(M3, (0, 1)) == 4.0
        assert path_product(M3, (0, 1, 2)) == 30.0

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            path_product(M3, (0, 3))


class TestBruteForce:
    def test_worked_case(self):
        assert increasing_path_average_bruteforce(M3, 2) == pytest.approx(38 / 3, rel=1e-15)

    def test_k_one_is_mean_diagonal(self, rng):
        m = rng.standard_normal((7, 7))
        assert increasing_path_average_bruteforce(m, 1) == pytest.approx(np.trace(m) / 7)

    def test_k_equals_n(self, rng):
        m = rng.standard_normal((5, 5))
        assert increasing_path_average_bruteforce(m, 5) == pytest.approx(path_product(m, (0, 1, 2, 3, 4)))

    def test_matches_itertools(self, rng):
        for n, k in [(6, 2), (7, 3), (8, 4), (9, 5)]:
            m = rng.standard_normal((n, n))
            assert increasing_path_average_bruteforce(m, k) == pytest.approx(itertools_path_average(m, k), rel=1e-12)

    def test_too_large(self):
        with pytest.raises(ValueError, match="moment_estimate"):
            increasing_path_average_bruteforce(np.eye(15), 2)


class TestMomentEstimate:
    def test_worked_case(self):
        # M3 is indefinite, so it is not X'X for real X; check the trace formula itself
        G = np.triu(M3, 1)
        np.testing.assert_array_equal(np.diag(G @ M3), [13, 25, 0])
        assert np.trace(G @ M3) / math.comb(3, 2) == 38 / 3
        assert increasing_path_average_bruteforce(M3, 2) == pytest.approx(38 / 3, rel=1e-15)

    def test_trace_route_exact(self):
        assert trace_path_estimate(M3, 2) == 38 / 3
        assert increasing_path_average_bruteforce(M3, 2) == 38 / 3

    @given(st.integers(0, 2**32 - 1), st.integers(1, 10), st.integers(1, 4))
    def test_trace_route_matches_bruteforce(self, seed, n, k):
        k = min(k, n)
        a = np.random.default_rng(seed).uniform(-2, 2, (n, n))
        m = a + a.T
        want = increasing_path_average_bruteforce(m, k)
        assert abs(trace_path_estimate(m, k) - want) <= 1e-10 * max(1.0, abs(want))

    def test_gram_worked_case(self):
        X = np.array([[1.0, 0.0, 2.0], [0.0, 1.0, 1.0]])
        m = X.T @ X
        assert moment_estimate(X, None, 2) == pytest.approx(itertools_path_average(m, 2), rel=1e-15)

    def test_k_one(self, rng):
        X = rng.standard_normal((4, 9))
        b = rng.uniform(0.5, 2, 4)
        assert moment_estimate(X, b, 1) == pytest.approx(np.trace(X.T @ np.diag(1 / b) @ X) / 9)

    def test_b_as_matrix_or_vector(self, rng):
        X = rng.standard_normal((4, 9))
        b = rng.uniform(0.5, 2, 4)
        assert moment_estimate(X, np.diag(b), 3) == pytest.approx(moment_estimate(X, b, 3), rel=1e-14)

    def test_errors(self, rng):
        X = rng.standard_normal((3, 4))
        with pytest.raises(ValueError, match="exceeds the sample size"):
            moment_estimate(X, None, 5)
        with pytest.raises(ValueError):
            moment_estimate(X, np.array([1.0, 0.0, 1.0]), 2)
        with pytest.raises(ValueError, match="diagonal"):
            moment_estimate(X, np.ones((3, 3)), 2)

    def test_large_n_no_overflow(self, rng):
        X = rng.standard_normal((5, 3000))
        val = moment_estimate(X, None, 6)
        assert math.isfinite(val)
        assert abs(val - 5) < 2.0

    @given(st.integers(0, 2**32 - 1), st.integers(1, 10), st.integers(1, 4), st.integers(1, 6))
    def test_path_identity(self, seed, n, k, p):
        k = min(k, n)
        g = np.random.default_rng(seed)
        X = g.standard_normal((p, n))
        b = g.uniform(0.5, 2.0, p)
        m = X.T @ (X / b[:, None])
        got = moment_estimate(X, b, k)
        want = increasing_path_average_bruteforce(m, k)
        assert abs(got - want) <= 1e-10 * max(1.0, abs(want))

    def test_several_orders_at_once(self, rng):
        X = rng.standard_normal((4, 8))
        many = moment_estimates(X, None, [2, 3, 5])
        for k, v in many.items():
            assert v == pytest.approx(moment_estimate(X, None, k), rel=1e-13)

    def test_unbiased_small_monte_carlo(self):
        # p=3, n=6, k=2 with B = diag(Sigma) fixed
        spec = MixingSpec("ar1", 3, rho=0.6)
        A = build_A(spec).A
        sigma = A @ A.T
        b = np.diag(sigma)
        g = np.random.default_rng(11)
        reps = 20000
        Z = g.standard_normal((reps, 3, 6))
        X = A @ Z
        Y = X / np.sqrt(b)[None, :, None]
        M = np.einsum("rit,ris->rts", Y, Y)
        G = np.triu(M, 1)
        vals = np.einsum("rij,rji->r", G, M) / math.comb(6, 2)
        gamma = sigma / np.sqrt(np.outer(b, b))
        exact = np.trace(gamma @ gamma)
        assert abs(vals.mean() - exact) < 3 * vals.std(ddof=1) / math.sqrt(reps)
        for r in range(5):
            assert vals[r] == pytest.approx(moment_estimate(X[r], b, 2), rel=1e-12)


class TestCorrelationMoments:
    def test_minimal(self, rng):
        mv = estimate_correlation_moments(rng.standard_normal((5, 20)), 2)
        assert mv.ell == 2
        assert mv.as_array()[0] == 5.0
        assert len(mv.values) == 1

    def test_identity_second_moment(self):
        p, n = 50, 500
        vals = []
        for seed in range(5):
            X = generate(DataModel(EntryLaw(), MixingSpec("identity", p), p, n, seed=seed))
            vals.append(estimate_correlation_moments(X, 3).values[0])
        # sd of one estimate is about p * sqrt(2 p) / n = 0.5
        assert abs(np.mean(vals) - p) < 1.5

    def test_spiked_second_moment(self):
        spec = MixingSpec("spiked", 4, lam=((1.0, 0.8), (0.8, 1.0)))
        vals = [estimate_correlation_moments(generate(DataModel(EntryLaw(), spec, 4, 20000, seed=s)), 2).values[0]
                for s in range(4)]
        assert np.mean(vals) == pytest.approx(5.28, abs=0.1)

    def test_needs_enough_samples(self, rng):
        with pytest.raises(ValueError):
            estimate_correlation_moments(rng.standard_normal((3, 4)), 6)


class TestReconstruct:
    def test_identity(self):
        est = reconstruct_spectrum(MomentVector.from_spectrum(np.ones(10), 6))
        np.testing.assert_allclose(est.eigenvalues, 1.0, atol=0.01)
        assert est.eigenvalues.sum() == pytest.approx(10)

    def test_two_atoms(self):
        mv = MomentVector(4, (5.0, 7.0, 10.25))
        est = reconstruct_spectrum(mv)
        np.testing.assert_allclose(est.eigenvalues, [1.5, 1.5, 0.5, 0.5], atol=0.02)

    def test_close_atoms_exact(self):
        # atoms 0.15 apart: a spread grid measure matches these moments to ~1e-9
        spec = np.repeat([1.72, 1.57, 0.31], [4, 1, 5])
        est = reconstruct_spectrum(MomentVector.from_spectrum(spec, 6), grid_max=4.0)
        assert est.meta["method"] == "atomic"
        np.testing.assert_allclose(est.eigenvalues, spec, atol=1e-8)

    def test_off_grid_atoms_exact(self):
        spec = np.array([2.3456, 1.0, 1.0, 0.3272, 0.3272])
        est = reconstruct_spectrum(MomentVector.from_spectrum(spec, 6))
        np.testing.assert_allclose(est.eigenvalues, np.sort(spec)[::-1], atol=1e-7)

    def test_generic_moments_use_grid(self):
        spec = np.random.default_rng(3).uniform(0.2, 2.0, 12)
        est = reconstruct_spectrum(MomentVector.from_spectrum(spec * 12 / spec.sum(), 6))
        assert est.meta["method"] == "grid"

    def test_two_atom_weights_by_hand(self):
        # atoms 1.5 and 0.5 with weights w, 1 - w: mean 1 gives w = 1/2, then m_2/p = 1.25
        w = 0.5
        assert 4 * (w * 1.5 + (1 - w) * 0.5) == 4
        assert 4 * (w * 1.5 ** 2 + (1 - w) * 0.5 ** 2) == 5.0
        assert 4 * (w * 1.5 ** 3 + (1 - w) * 0.5 ** 3) == 7.0

    def test_output_contract(self):
        est = reconstruct_spectrum(MomentVector.from_spectrum([2.5, 1.0, 0.5, 0.0], 5))
        assert np.all(np.diff(est.eigenvalues) <= 0)
        assert np.all(est.eigenvalues >= 0)
        assert est.eigenvalues.size == 4
        assert abs(est.eigenvalues.sum() - 4) < 1e-12
        assert np.max(np.abs(est.moment_residuals)) < 1e-6

    def test_cauchy_schwarz_violation(self):
        with pytest.raises(InfeasibleMomentsError, match="Cauchy-Schwarz"):
            reconstruct_spectrum(MomentVector(4, (3.0, 5.0)))

    def test_hankel_violation(self):
        # mean 1, second moment 2, but third moment far too small
        with pytest.raises(InfeasibleMomentsError, match="Hankel"):
            reconstruct_spectrum(MomentVector(10, (20.0, 5.0, 100.0)))

    def test_projection_mode(self):
        est = reconstruct_spectrum(MomentVector(10, (20.0, 5.0, 100.0)), strict=False)
        assert est.hankel_min < 0
        assert est.eigenvalues.size == 10

    def test_hankel_of_true_measure(self):
        mu = [np.mean(np.array([0.2, 1.0, 1.8]) ** k) for k in range(7)]
        assert hankel_min_eigenvalue(mu) > -1e-12

    def test_csv(self, tmp_path):
        est = reconstruct_spectrum(MomentVector.from_spectrum([1.5, 0.5], 4))
        path = tmp_path / "s.csv"
        est.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "index,estimate"
        assert len(lines) == 3
        import json
        meta = json.loads((tmp_path / "s.csv.json").read_text())
        assert meta["ell"] == 4 and meta["grid"]["size"] == 401

    def test_read_data_csv(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("1,2,3\n4,5,6\n")
        np.testing.assert_array_equal(read_data_csv(path), [[1, 2, 3], [4, 5, 6]])
        path.write_text("1,2\n4,nan\n")
        with pytest.raises(ValueError, match="row 2, column 2"):
            read_data_csv(path)
