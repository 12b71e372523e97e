import math

import numpy as np
import pytest
from scipy import integrate

from rmtcorr.datagen import DataModel, EntryLaw, MixingSpec, generate
from rmtcorr.errors import ConvergenceError
from rmtcorr.lsd import (
    AtomicMeasure,
    general_support,
    law_from_stieltjes,
    mp_density,
    mp_edges,
    mp_law,
    mp_stieltjes_closed,
    quantile,
    read_law_csv,
    semicircle_density,
    semicircle_law,
    semicircle_stieltjes,
    solve_stieltjes,
    solve_stieltjes_zero_gamma,
    underline_residual,
    underline_s,
)
from rmtcorr.matrix import EmpiricalSpectralDistribution, eigenvalues, kolmogorov_distance
from rmtcorr.stats import sample_correlation, sample_covariance


def z_grid(num=100, re=(-1.0, 6.0), im=(1e-3, 3.0)):
    g = np.random.default_rng(0)
    return g.uniform(*re, num) + 1j * np.exp(g.uniform(np.log(im[0]), np.log(im[1]), num))


def residual(gamma, H, z, s):
    phi = np.sum(H.w / (H.t * (1 - gamma - gamma * z * s)[..., None] - z[..., None]), axis=-1)
    return np.abs(s - phi) / np.maximum(1.0, np.abs(s))


class TestAtomicMeasure:
    def test_sorted_and_normalized(self):
        h = AtomicMeasure([3.0, 1.0], [0.25, 0.75])
        np.testing.assert_array_equal(h.t, [1.0, 3.0])
        np.testing.assert_array_equal(h.w, [0.75, 0.25])

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            AtomicMeasure([1.0, 2.0], [0.5, 0.6])

    def test_weights_positive(self):
        with pytest.raises(ValueError):
            AtomicMeasure([1.0, 2.0], [1.5, -0.5])

    def test_cdf_right_continuous(self):
        h = AtomicMeasure([0.0, 2.0], [0.5, 0.5])
        np.testing.assert_array_equal(h.cdf([-1, 0, 1, 2, 3]), [0, 0.5, 0.5, 1, 1])

    def test_moment_and_support(self):
        h = AtomicMeasure([0.5, 1.5], [0.5, 0.5])
        assert h.moment(2) == pytest.approx(1.25)
        assert h.support == (0.5, 1.5)
        assert h.distance_to_support(1.0) == pytest.approx(0.5)

    def test_from_eigenvalues_merges_repeats(self):
        h = AtomicMeasure.from_eigenvalues([1.0, 1.0, 3.0, 1.0 + 1e-15])
        assert h.pairs() == [[1.0, 0.75], [3.0, 0.25]]


class TestClosedForms:
    def test_mp_density_values(self):
        assert mp_density(1.0, 2.0) == pytest.approx(1 / (2 * math.pi))
        assert mp_density(0.25, 3.0) == 0.0
        for g in (0.1, 0.5, 1.0, 3.0):
            a, b = mp_edges(g)
            assert mp_density(g, a) == 0.0
            assert mp_density(g, b) == 0.0

    def test_mp_density_bad_gamma(self):
        with pytest.raises(ValueError):
            mp_density(0.0, 1.0)

    @pytest.mark.parametrize("gamma", [0.25, 1.0])
    def test_mp_density_integrates_to_one(self, gamma):
        a, b = mp_edges(gamma)
        val, _ = integrate.quad(lambda x: mp_density(gamma, x), a, b, limit=200)
        assert val == pytest.approx(1.0, abs=1e-6)

    def test_mp_stieltjes_against_quadrature(self):
        gamma = 0.5
        a, b = mp_edges(gamma)
        for z in (2 + 0.5j, 0.1 + 1j, 4 + 0.2j):
            re, _ = integrate.quad(lambda x: (mp_density(gamma, x) / (x - z)).real, a, b, limit=200)
            im, _ = integrate.quad(lambda x: (mp_density(gamma, x) / (x - z)).imag, a, b, limit=200)
            assert abs(mp_stieltjes_closed(gamma, z) - (re + 1j * im)) < 1e-7

    def test_mp_stieltjes_positive_imaginary(self):
        for gamma in (0.3, 1.0, 2.5):
            assert np.all(mp_stieltjes_closed(gamma, z_grid()).imag > 0)

    def test_mp_tail(self):
        # s(z) = -1/z - E[x]/z^2 - ..., so the relative error is about 1/x
        for x in (5e3, 1e4):
            s = mp_stieltjes_closed(0.25, x + 1e-6j)
            assert abs(s - (-1 / x)) <= 1e-3 * abs(1 / x)

    def test_mp_rejects_lower_half_plane(self):
        with pytest.raises(ValueError):
            mp_stieltjes_closed(0.5, 1 - 1j)

    def test_semicircle_values(self):
        assert semicircle_density(0.0) == pytest.approx(1 / math.pi)
        assert semicircle_density(2.0) == 0.0
        assert semicircle_density(-2.0) == 0.0
        assert semicircle_stieltjes(1j) == pytest.approx(1j * (math.sqrt(5) - 1) / 2, abs=1e-14)

    def test_semicircle_against_quadrature(self):
        z = 0.7 + 0.3j
        re, _ = integrate.quad(lambda x: (semicircle_density(x) / (x - z)).real, -2, 2, limit=200)
        im, _ = integrate.quad(lambda x: (semicircle_density(x) / (x - z)).imag, -2, 2, limit=200)
        assert abs(semicircle_stieltjes(z) - (re + 1j * im)) < 1e-7


class TestSolver:
    @pytest.mark.parametrize("gamma", [0.1, 0.5, 1.0, 2.0, 4.0])
    def test_delta_one_matches_closed_form(self, gamma):
        z = z_grid()
        s = solve_stieltjes(gamma, AtomicMeasure.delta(1.0), z)
        np.testing.assert_allclose(s, mp_stieltjes_closed(gamma, z), atol=1e-8)
        assert np.all(s.imag > 0)

    def test_example_point(self):
        z = 2 + 0.01j
        assert abs(solve_stieltjes(0.5, AtomicMeasure.delta(1.0), z) - mp_stieltjes_closed(0.5, z)) < 1e-8

    @pytest.mark.parametrize("c", [0.5, 3.0])
    def test_scaled_delta(self, c):
        z = z_grid(50)
        s = solve_stieltjes(0.5, AtomicMeasure.delta(c), z)
        np.testing.assert_allclose(s, mp_stieltjes_closed(0.5, z / c) / c, atol=1e-8)

    def test_small_gamma_limit(self):
        H = AtomicMeasure([0.5, 1.5], [0.5, 0.5])
        z = 2 + 1j
        s = solve_stieltjes(1e-6, H, z)
        assert abs(s - np.sum(H.w / (H.t - z))) < 1e-4

    def test_two_atom_residual(self):
        H = AtomicMeasure([0.5, 2.0], [0.7, 0.3])
        for gamma in (0.2, 1.0, 3.0):
            z = z_grid(100, re=(-1, 10))
            s = solve_stieltjes(gamma, H, z)
            assert np.all(s.imag > 0)
            assert np.max(residual(gamma, H, z, s)) < 1e-10

    def test_underline_form(self):
        H = AtomicMeasure([0.5, 2.0], [0.7, 0.3])
        z = z_grid(30)
        s = solve_stieltjes(0.4, H, z)
        assert np.max(underline_residual(s, 0.4, H, z)) < 1e-9
        delta = AtomicMeasure.delta(1.0)
        s1 = solve_stieltjes(0.4, delta, z)
        np.testing.assert_allclose(underline_s(s1, 0.4, z), -(1 - 0.4) / z + 0.4 * s1)

    def test_rejects_real_z(self):
        with pytest.raises(ValueError):
            solve_stieltjes(0.5, AtomicMeasure.delta(1.0), 1.0 + 0j)

    def test_convergence_error_carries_residual(self, monkeypatch):
        import rmtcorr.lsd as lsd
        monkeypatch.setattr(lsd, "_newton", lambda phi, s, steps=30: s)
        monkeypatch.setattr(lsd, "_repair", lambda s, *a, **k: s)
        with pytest.raises(ConvergenceError) as info:
            solve_stieltjes(0.5, AtomicMeasure([0.5, 2.0], [0.5, 0.5]), 1.0 + 1e-6j, max_iter=2)
        assert info.value.residual > 0


class TestZeroGammaSolver:
    def test_delta_one_is_semicircle(self):
        z = z_grid(100, re=(-3, 3))
        np.testing.assert_allclose(solve_stieltjes_zero_gamma(AtomicMeasure.delta(1.0), z),
                                   semicircle_stieltjes(z), atol=1e-8)

    @pytest.mark.parametrize("c", [0.5, 2.0])
    def test_scaled(self, c):
        z = z_grid(50, re=(-5, 5))
        np.testing.assert_allclose(solve_stieltjes_zero_gamma(AtomicMeasure.delta(c), z),
                                   semicircle_stieltjes(z / c) / c, atol=1e-8)

    def test_tail(self):
        z = 1e3j
        s = solve_stieltjes_zero_gamma(AtomicMeasure([0.5, 1.5], [0.5, 0.5]), z)
        assert abs(s - (-1 / z)) <= 1e-3 * abs(1 / z)

    def test_companion_residuals(self):
        H = AtomicMeasure([0.5, 1.5], [0.4, 0.6])
        z = z_grid(60, re=(-4, 4))
        s, st = solve_stieltjes_zero_gamma(H, z, return_tilde=True)
        phi_t = -np.sum(H.w * H.t / (z[:, None] + H.t * st[:, None]), axis=1)
        phi_s = -np.sum(H.w / (z[:, None] + H.t * st[:, None]), axis=1)
        assert np.max(np.abs(st - phi_t) / np.maximum(1, np.abs(st))) < 1e-10
        np.testing.assert_allclose(s, phi_s, atol=1e-12)
        assert np.all(s.imag > 0) and np.all(st.imag > 0)


class TestInversion:
    def test_mp_density_recovered(self):
        law = law_from_stieltjes("mp", 0.25)
        a, b = mp_edges(0.25)
        x = np.linspace(a, b, 500)[5:-5]
        assert np.max(np.abs(law.pdf(x) - mp_density(0.25, x))) < 5e-3
        assert law.total_mass == pytest.approx(1.0, abs=2e-3)

    def test_semicircle_recovered(self):
        law = law_from_stieltjes("general_zero_gamma", H=AtomicMeasure.delta(1.0))
        x = np.linspace(-1.95, 1.95, 300)
        assert np.max(np.abs(law.pdf(x) - semicircle_density(x))) < 5e-3
        assert law.total_mass == pytest.approx(1.0, abs=2e-3)

    @pytest.mark.parametrize("gamma", [0.5, 2.0, 4.0])
    def test_point_mass_above_one(self, gamma):
        law = law_from_stieltjes("general", gamma, AtomicMeasure([0.5, 1.5], [0.5, 0.5]))
        assert law.total_mass == pytest.approx(1.0, abs=2e-3)
        if gamma > 1:
            assert law.point_mass == (0.0, pytest.approx(1 - 1 / gamma))
        else:
            assert law.point_mass is None
        assert np.all(law.density >= 0)
        assert np.all(np.diff(law.cdf(np.linspace(-1, 20, 400))) >= 0)

    def test_general_support_matches_mp(self):
        for g in (0.25, 0.5, 2.0):
            lo, hi = general_support(g, AtomicMeasure.delta(1.0))
            a, b = mp_edges(g)
            assert lo == pytest.approx(a, abs=1e-8)
            assert hi == pytest.approx(b, abs=1e-8)

    def test_csv_round_trip(self, tmp_path):
        law = mp_law(2.0, num=101)
        path = tmp_path / "law.csv"
        law.to_csv(path)
        header, x, f = read_law_csv(path)
        assert header["kind"] == "mp"
        assert header["point_masses"] == [[0.0, pytest.approx(0.5)]]
        np.testing.assert_array_equal(x, law.x)
        np.testing.assert_array_equal(f, law.density)

    def test_rejects_bad_eta(self):
        with pytest.raises(ValueError):
            law_from_stieltjes("mp", 0.5, eta=0.0)


class TestQuantile:
    def test_mp_edges(self):
        law = mp_law(0.25)
        assert quantile(law, 0) == pytest.approx(0.25)
        assert quantile(law, 1) == pytest.approx(2.25)
        assert quantile(mp_law(1.0), 0) == pytest.approx(0.0)

    def test_semicircle_median(self):
        assert quantile(semicircle_law(), 0.5) == pytest.approx(0.0, abs=1e-9)

    def test_range(self):
        with pytest.raises(ValueError):
            quantile(mp_law(0.5), 1.5)

    def test_inverse_of_cdf(self):
        law = mp_law(0.5)
        for x in np.linspace(0.2, 2.8, 27):
            assert quantile(law, float(law.cdf(x))) == pytest.approx(x, abs=1e-3)

    def test_point_mass_quantile(self):
        law = mp_law(2.0)
        assert quantile(law, 0.3) == 0.0
        assert quantile(law, 0.75) > 0.0

    def test_mp_median_against_quadrature(self):
        gamma = 0.5
        a, b = mp_edges(gamma)
        med = quantile(mp_law(gamma), 0.5)
        val, _ = integrate.quad(lambda x: mp_density(gamma, x), a, med, limit=200)
        assert val == pytest.approx(0.5, abs=1e-4)


class TestConvergenceToLaw:
    def test_proportional_regime(self):
        p, n = 400, 800
        X = generate(DataModel(EntryLaw(), MixingSpec("identity", p), p, n, seed=3))
        esd = EmpiricalSpectralDistribution(eigenvalues(sample_correlation(sample_covariance(X))))
        assert kolmogorov_distance(esd, mp_law(0.5)) < 0.05

    def test_zero_regime(self):
        p, n = 100, 10000
        X = generate(DataModel(EntryLaw(), MixingSpec("identity", p), p, n, seed=3))
        R = sample_correlation(sample_covariance(X)).values
        w = eigenvalues(math.sqrt(n / p) * (R - np.eye(p)))
        assert kolmogorov_distance(EmpiricalSpectralDistribution(w), semicircle_law()) < 0.08
