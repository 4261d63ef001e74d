import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qspec import (
    CoefficientCurve,
    FrequencyGrid,
    GridMismatchError,
    SpectrumGrid,
    StationaryFamilyModel,
    TriangularArrayModel,
    classical_tv_spectrum,
    classical_wv_spectrum,
    copula_tv_spectrum,
    discrete_wigner,
    indicator_cov_stationary,
    l2_distance,
    stationary_truncation,
    sup_distance,
    wv_quantile_spectrum,
)
from qspec.spectra import Provenance, _periodic_weights

from conftest import omega_index

TWO_PI = 2.0 * math.pi


class TestFrequencyGrid:
    def test_fourier_layout(self):
        g = FrequencyGrid.fourier(512)
        assert len(g) == 512
        assert g.omegas[0] == pytest.approx(-math.pi + TWO_PI / 512)
        assert g.omegas[-1] == math.pi
        assert np.all(np.diff(g.omegas) > 0)

    def test_fourier_odd(self):
        g = FrequencyGrid.fourier(5)
        assert_allclose(g.omegas, TWO_PI * np.array([-2, -1, 0, 1, 2]) / 5)

    def test_validation(self):
        with pytest.raises(ValueError):
            FrequencyGrid(omegas=np.array([0.5, 0.2]))
        with pytest.raises(ValueError):
            FrequencyGrid(omegas=np.array([-math.pi, 0.0]))  # -pi excluded
        with pytest.raises(ValueError):
            FrequencyGrid(omegas=np.array([0.0, 4.0]))

    def test_periodic_weights_sum_to_2pi(self, grid):
        w = _periodic_weights(grid.omegas)
        assert w.sum() == pytest.approx(TWO_PI)
        assert_allclose(w, TWO_PI / 512)


class TestCopulaTvSpectrum:
    def test_iid_flat_at_quarter(self, grid):
        fam = StationaryFamilyModel(u=0.5, a=0.0)
        spec = copula_tv_spectrum(fam, [(0.5, 0.5)], grid)
        assert np.max(np.abs(spec.values - 0.25 / TWO_PI)) < 1e-12

    def test_iid_flat_off_diagonal(self, grid):
        fam = StationaryFamilyModel(u=0.5, a=0.0)
        spec = copula_tv_spectrum(fam, [(0.3, 0.7)], grid)
        assert np.max(np.abs(spec.values - 0.09 / TWO_PI)) < 1e-12

    def test_normalization_quadrature(self, grid):
        # trapezoid integral over the full grid recovers gamma_0
        fam = StationaryFamilyModel(u=0.5, a=0.5)
        spec = copula_tv_spectrum(fam, [(0.5, 0.5)], grid, H=60)
        integral = spec.integrate()[0]
        assert abs(integral - 0.25) < 1e-6

    def test_auto_truncation_tail(self):
        assert stationary_truncation(0.0) == 1
        H = stationary_truncation(0.7)
        assert 0.7 ** (H + 1) / (math.pi * 0.3) < 1e-10
        assert 0.7**H / (math.pi * 0.3) >= 1e-10

    def test_doubling_H_within_tail_bound(self, grid):
        fam = StationaryFamilyModel(u=0.5, a=0.6)
        a = copula_tv_spectrum(fam, [(0.25, 0.6)], grid, H=8)
        b = copula_tv_spectrum(fam, [(0.25, 0.6)], grid, H=16)
        assert sup_distance(a, b) <= a.tail_bound

    def test_conjugation_across_tau_pairs(self, grid):
        rng = np.random.default_rng(21)
        for _ in range(5):
            fam = StationaryFamilyModel(u=0.5, a=rng.uniform(-0.9, 0.9))
            t1, t2 = rng.uniform(0.05, 0.95, size=2)
            spec = copula_tv_spectrum(fam, [(t1, t2), (t2, t1)], grid)
            assert np.max(np.abs(spec.values[0] - np.conj(spec.values[1]))) < 1e-12

    def test_conjugate_symmetry_in_omega(self, grid):
        fam = StationaryFamilyModel(u=0.5, a=0.45)
        spec = copula_tv_spectrum(fam, [(0.3, 0.8)], grid)
        om = grid.omegas
        # omega = pi has no mirror on this grid; check all interior pairs
        for j in range(len(om) - 1):
            k = len(om) - 2 - j
            assert om[k] == pytest.approx(-om[j])
            assert spec.values[0, k] == pytest.approx(np.conj(spec.values[0, j]), abs=1e-12)

    def test_diagonal_tau_real(self, grid):
        fam = StationaryFamilyModel(u=0.5, a=-0.7)
        spec = copula_tv_spectrum(fam, [(0.25, 0.25)], grid)
        assert np.max(np.abs(spec.values.imag)) < 1e-12

    def test_H_validation(self, grid):
        fam = StationaryFamilyModel(u=0.5, a=0.5)
        with pytest.raises(ValueError):
            copula_tv_spectrum(fam, [(0.5, 0.5)], grid, H=0)


class TestWvQuantileSpectrum:
    def test_iid_flat(self, grid, iid_model):
        spec = wv_quantile_spectrum(iid_model, 512, [(0.5, 0.5)], grid)
        assert np.max(np.abs(spec.values - 0.25 / TWO_PI)) < 1e-12

    def test_single_term_sum(self, grid, tv_model_1024):
        spec = wv_quantile_spectrum(tv_model_1024, 512, [(0.3, 0.7)], grid, H=0)
        assert np.max(np.abs(spec.values - 0.09 / TWO_PI)) < 1e-10

    def test_default_truncation_is_cube_root(self, grid, tv_model_1024):
        spec = wv_quantile_spectrum(tv_model_1024, 512, [(0.5, 0.5)], grid)
        assert spec.provenance.H == 11  # ceil(1024^(1/3))

    def test_iid_matches_iid_copula_spectrum(self, grid, iid_model):
        wv = wv_quantile_spectrum(iid_model, 512, [(0.4, 0.4)], grid)
        tv = copula_tv_spectrum(iid_model.family_at(0.5), [(0.4, 0.4)], grid)
        assert sup_distance(tv, wv) < 1e-12

    def test_near_conjugate_symmetry_in_omega(self, grid, tv_model_1024):
        # floor asymmetry at odd lags perturbs the pairing by at most O(1/T)
        spec = wv_quantile_spectrum(tv_model_1024, 512, [(0.25, 0.75)], grid)
        om = grid.omegas
        tol = 10.0 / tv_model_1024.T
        for j in range(0, len(om) - 1, 37):
            k = len(om) - 2 - j
            assert abs(spec.values[0, k] - np.conj(spec.values[0, j])) < tol


class TestClassicalSpectra:
    def test_white_noise_flat(self, grid):
        fam = StationaryFamilyModel(u=0.5, a=0.0, innovation_sd=1.3)
        spec = classical_tv_spectrum(fam, grid)
        assert_allclose(spec.values.real, 1.3**2 / TWO_PI, rtol=1e-14)

    def test_ar_half_closed_form_at_zero(self, grid):
        fam = StationaryFamilyModel(u=0.5, a=0.5)
        spec = classical_tv_spectrum(fam, grid)
        i0 = omega_index(grid, 0.0)
        assert abs(spec.values[i0].real - 2.0 / math.pi) < 1e-10

    def test_even_and_real(self, grid):
        fam = StationaryFamilyModel(u=0.5, a=0.42)
        spec = classical_tv_spectrum(fam, grid)
        assert np.max(np.abs(spec.values.imag)) == 0.0
        om = grid.omegas
        for j in range(0, len(om) - 1, 29):
            k = len(om) - 2 - j
            assert spec.values[k].real == pytest.approx(spec.values[j].real, rel=1e-12)

    def test_closed_form_matches_truncated_sum(self, grid):
        # cross-check against the direct covariance Fourier sum
        fam = StationaryFamilyModel(u=0.5, a=0.5)
        spec = classical_tv_spectrum(fam, grid)
        var = fam.marginal_sd**2
        H = 200
        direct = np.full(len(grid.omegas), var, dtype=complex)
        for h in range(H, 0, -1):
            direct += 2.0 * var * 0.5**h * np.cos(h * grid.omegas)
        direct /= TWO_PI
        assert np.max(np.abs(spec.values - direct)) < 1e-10

    def test_wv_white_noise_constant(self, grid, iid_model):
        spec = classical_wv_spectrum(iid_model, 0.5, grid)
        assert_allclose(spec.values.real, 1.0, rtol=1e-12)

    def test_wv_constant_curve_tail_bound(self, grid, const_model):
        # |f_T - 2 pi f| bounded by the geometric covariance tail
        a, sig2 = 0.5, 1.0
        H = 13
        f_T = classical_wv_spectrum(const_model, 0.5, grid, H=H)
        f = classical_tv_spectrum(const_model.family_at(0.5), grid)
        scaled = SpectrumGrid(
            omegas=grid.omegas,
            values=TWO_PI * f.values,
            tau_pairs=None,
            provenance=f.provenance,
        )
        tail = 2.0 * sig2 * a ** (H + 1) / ((1 - a) * (1 - a * a))
        assert sup_distance(f_T, scaled) <= tail


class TestDiscreteWigner:
    def test_zero_signal(self, grid):
        row = discrete_wigner(np.zeros(64, dtype=complex), 32, grid)
        assert np.all(row.values == 0.0)

    def test_imaginary_part_cancels(self, grid):
        rng = np.random.default_rng(8)
        for _ in range(20):
            sig = rng.standard_normal(65) + 1j * rng.standard_normal(65)
            t = int(rng.integers(0, 65))
            row = discrete_wigner(sig, t, grid)
            assert np.max(np.abs(row.values.imag)) < 1e-12

    def test_tone_peaks_at_nearest_grid_frequency(self, grid):
        rng = np.random.default_rng(15)
        n = 257
        for _ in range(10):
            omega0 = float(rng.uniform(0.1, math.pi / 2 - 0.1))
            sig = np.exp(1j * omega0 * np.arange(n))
            row = discrete_wigner(sig, n // 2, grid).values.real
            nearest = int(np.argmin(np.abs(grid.omegas - omega0)))
            # the doubled phase aliases omega0 +- pi to the same value, so the
            # nearest grid frequency must attain the global maximum (ties ok)
            assert row[nearest] >= row.max() - 1e-9

    def test_boundary_clipping(self, grid):
        sig = np.exp(1j * 0.3 * np.arange(33))
        row_edge = discrete_wigner(sig, 0, grid)  # tau range reduces to {0}
        assert_allclose(row_edge.values.real, np.abs(sig[0]) ** 2 / TWO_PI, rtol=1e-12)

    def test_t_out_of_range(self, grid):
        with pytest.raises(IndexError):
            discrete_wigner(np.ones(8, dtype=complex), 8, grid)


class TestDistances:
    def _spec(self, grid, values):
        return SpectrumGrid(
            omegas=grid.omegas,
            values=values,
            tau_pairs=((0.5, 0.5),),
            provenance=Provenance(kind="copula_tv", u=0.5),
        )

    def test_identical_zero(self, grid):
        fam = StationaryFamilyModel(u=0.5, a=0.3)
        a = copula_tv_spectrum(fam, [(0.5, 0.5)], grid)
        assert sup_distance(a, a) == 0.0
        assert l2_distance(a, a) == 0.0

    def test_constant_offset(self, grid):
        base = np.ones((1, len(grid.omegas)), dtype=complex)
        a = self._spec(grid, base)
        b = self._spec(grid, base + 0.125)
        assert sup_distance(a, b) == pytest.approx(0.125)
        assert l2_distance(a, b) == pytest.approx(0.125**2 * TWO_PI, rel=1e-12)

    def test_grid_mismatch_rejected(self, grid):
        fam = StationaryFamilyModel(u=0.5, a=0.3)
        a = copula_tv_spectrum(fam, [(0.5, 0.5)], grid)
        b = copula_tv_spectrum(fam, [(0.5, 0.5)], FrequencyGrid.fourier(256))
        with pytest.raises(GridMismatchError):
            sup_distance(a, b)
        c = copula_tv_spectrum(fam, [(0.25, 0.75)], grid)
        with pytest.raises(GridMismatchError):
            sup_distance(a, c)
        d = classical_tv_spectrum(fam, grid)
        with pytest.raises(GridMismatchError):
            l2_distance(a, d)


class TestCsvRoundTrip:
    def test_tau_spectrum(self, grid, tv_model_1024):
        spec = wv_quantile_spectrum(
            tv_model_1024, 512, [(0.5, 0.5), (0.25, 0.75)], grid, H=5
        )
        text = spec.to_csv()
        assert text.splitlines()[0] == "provenance,u_or_t0,T,H,omega,tau1,tau2,re,im"
        back = SpectrumGrid.from_csv(text)
        assert back.provenance == spec.provenance
        assert np.array_equal(back.omegas, spec.omegas)
        assert back.tau_pairs == spec.tau_pairs
        assert np.array_equal(back.values, spec.values)

    def test_classical_spectrum_omits_tau_columns(self, grid):
        fam = StationaryFamilyModel(u=0.25, a=0.6)
        spec = classical_tv_spectrum(fam, grid)
        text = spec.to_csv()
        assert text.splitlines()[0] == "provenance,u_or_t0,T,H,omega,re,im"
        back = SpectrumGrid.from_csv(text)
        assert back.tau_pairs is None
        assert np.array_equal(back.values, spec.values)
        assert back.provenance == spec.provenance
