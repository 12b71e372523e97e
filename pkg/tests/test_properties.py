"""Property suites; run standalone with ``pytest tests/test_properties.py``."""

import math

import numpy as np
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from rmtcorr.datagen import DataModel, EntryLaw, MixingSpec, build_A, generate
from rmtcorr.estimators import MomentVector, reconstruct_spectrum
from rmtcorr.lsd import AtomicMeasure, solve_stieltjes, solve_stieltjes_zero_gamma
from rmtcorr.matrix import eigenvalues, sym_eigen
from rmtcorr.stats import q_transform, sample_correlation, sample_covariance, weyl_gap

seeds = st.integers(0, 2**63 - 1)
finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@st.composite
def symmetric(draw, max_p=12):
    p = draw(st.integers(1, max_p))
    a = draw(arrays(np.float64, (p, p), elements=finite))
    return (a + a.T) / 2


@st.composite
def data_matrix(draw, max_p=10, max_n=30):
    p = draw(st.integers(2, max_p))
    n = draw(st.integers(2, max_n))
    seed = draw(seeds)
    X = np.random.default_rng(seed).standard_normal((p, n))
    scales = draw(arrays(np.float64, p, elements=st.floats(1e-3, 1e3)))
    return scales[:, None] * X


@st.composite
def atomic(draw, max_atoms=4):
    k = draw(st.integers(1, max_atoms))
    t = draw(st.lists(st.floats(0.05, 5.0), min_size=k, max_size=k, unique=True))
    w = np.array(draw(st.lists(st.floats(0.1, 1.0), min_size=k, max_size=k)))
    w = w / w.sum()
    w[-1] = 1.0 - w[:-1].sum()
    return AtomicMeasure(t, w)


upper_half = st.tuples(st.floats(-5, 10), st.floats(1e-3, 5)).map(lambda c: complex(c[0], c[1]))


class TestEigenProperties:
    @given(symmetric())
    def test_orthogonal_and_reconstructs(self, a):
        dec = sym_eigen(a)
        q = dec.eigenvectors
        assert np.max(np.abs(q.T @ q - np.eye(a.shape[0]))) <= 1e-10
        assert np.max(np.abs(dec.reconstruct() - a)) <= 1e-9 * (1 + np.max(np.abs(a)))

    @given(symmetric())
    def test_trace_equals_eigenvalue_sum(self, a):
        assert abs(np.sum(eigenvalues(a)) - np.trace(a)) <= 1e-9 * (1 + np.max(np.abs(a))) * a.shape[0]

    @given(st.integers(1, 12), seeds)
    def test_weyl(self, p, seed):
        g = np.random.default_rng(seed)
        a = g.standard_normal((p, p))
        b = g.standard_normal((p, p)) * g.uniform(0, 2)
        a, b = a + a.T, b + b.T
        shift, norm = weyl_gap(a, b)
        assert shift <= norm * (1 + 1e-10) + 1e-12


class TestCorrelationProperties:
    @given(data_matrix())
    def test_psd_unit_diagonal_trace(self, X):
        R = sample_correlation(sample_covariance(X))
        p = X.shape[0]
        assert np.all(np.diag(R.values) == 1.0)
        assert np.max(np.abs(R.values)) <= 1 + 1e-12
        assert abs(R.trace() - p) <= 1e-12 * p
        assert eigenvalues(R)[-1] >= -1e-10

    @given(data_matrix(), seeds)
    def test_scale_invariance(self, X, seed):
        d = np.exp(np.random.default_rng(seed).uniform(-5, 5, X.shape[0]))
        r1 = sample_correlation(sample_covariance(d[:, None] * X)).values
        r2 = sample_correlation(sample_covariance(X)).values
        np.testing.assert_allclose(r1, r2, atol=1e-12)

    @given(seeds, st.sampled_from(["ar1", "spiked", "row_scaled"]), st.integers(3, 15), st.integers(3, 40))
    def test_weyl_transfer_per_replication(self, seed, kind, p, n):
        if kind == "ar1":
            spec = MixingSpec("ar1", p, rho=0.7)
        elif kind == "spiked":
            spec = MixingSpec("spiked", p, lam=((1.0, 0.8), (0.8, 1.0)))
        else:
            spec = MixingSpec("row_scaled", p, scales=tuple(np.linspace(0.5, 3, p)))
        X = generate(DataModel(EntryLaw(), spec, p, n, seed=seed))
        R = sample_correlation(sample_covariance(X))
        shift, norm = weyl_gap(R, q_transform(X, build_A(spec).sigma))
        assert shift <= norm * (1 + 1e-10) + 1e-12


class TestSolverProperties:
    @given(atomic(), st.floats(0.05, 4.0), upper_half)
    def test_positive_imaginary_part(self, H, gamma, z):
        s = solve_stieltjes(gamma, H, z)
        assert s.imag > 0
        phi = np.sum(H.w / (H.t * (1 - gamma - gamma * z * s) - z))
        assert abs(s - phi) / max(1.0, abs(s)) < 1e-10

    @given(atomic(), upper_half)
    def test_zero_gamma_positive(self, H, z):
        s, st_ = solve_stieltjes_zero_gamma(H, z, return_tilde=True)
        assert s.imag > 0 and st_.imag > 0


class TestDeterminism:
    @given(seeds, st.sampled_from(["gaussian", "rademacher", "uniform", "student_t", "pareto_sym"]))
    def test_generate_bit_identical(self, seed, law):
        params = {"student_t": {"nu": 6.0}, "pareto_sym": {"alpha": 3.0}}.get(law)
        model = DataModel(EntryLaw.from_params(law, params), MixingSpec("ar1", 6, rho=0.3), 6, 11, seed=seed)
        a, b = generate(model), generate(DataModel.from_json(model.to_json()))
        assert a.tobytes() == b.tobytes()

    def test_run_byte_identical_across_workers(self, tmp_path):
        from rmtcorr.experiments import ExperimentConfig, run_experiment, write_rows_csv
        cfg = ExperimentConfig.from_dict({
            "experiment": "threshold", "reps": 4, "master_seed": 99,
            "model": {"law": "rademacher", "mixing": "ar1", "mixing_params": {"rho": 0.2}, "p": 12, "n": 30},
        })
        for jobs, name in ((1, "a.csv"), (3, "b.csv")):
            write_rows_csv(run_experiment(cfg, jobs=jobs), tmp_path / name)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


class TestReconstructionProperty:
    @given(st.integers(4, 12), st.data())
    def test_on_grid_atoms_recovered(self, p, data):
        # spectra with at most 3 distinct grid values, summing to p
        step = 4.0 / 400
        k = data.draw(st.integers(1, 3))
        if k == 1:
            spectrum = np.ones(p)
        else:
            cuts = sorted(data.draw(st.lists(st.integers(1, p - 1), min_size=k - 1, max_size=k - 1, unique=True)))
            counts = np.diff([0] + cuts + [p])
            idx = data.draw(st.lists(st.integers(0, 400), min_size=k - 1, max_size=k - 1, unique=True))
            rest = 100 * p - sum(int(c) * i for c, i in zip(counts[:-1], idx))
            assume(rest % counts[-1] == 0 and 0 <= rest // counts[-1] <= 400)
            assume(rest // counts[-1] not in idx)
            spectrum = np.repeat([i * step for i in idx] + [rest // counts[-1] * step], counts)
        mv = MomentVector.from_spectrum(spectrum, 6)
        est = reconstruct_spectrum(mv, grid_max=4.0)
        assert np.max(np.abs(est.eigenvalues - np.sort(spectrum)[::-1])) <= step * (1 + 1e-6)
