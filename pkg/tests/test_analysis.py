import math

import numpy as np
import pytest

from purcellsim import analysis as an
from purcellsim.analysis import (
    HomCorrectionParams,
    HomPeakAreas,
    SampledCurve,
    corrected_visibility_santori,
    corrected_visibility_somaschi,
    convolve_irf,
    decompose_fp_spectrum,
    fit_exponential_recovery,
    fit_hom_peaks,
    fit_rrs_curve,
    hom_peak_areas_model,
    mollow_calibration,
    naive_decay_fit,
    raw_visibility,
)

TABLE_PARAMS = HomCorrectionParams(g2=0.134, epsilon=0.032, r=0.544, t=0.456)


class TestSampledCurve:
    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            SampledCurve(np.array([0.0, 2.0, 1.0]), np.zeros(3))

    def test_rejects_mismatched(self):
        with pytest.raises(ValueError):
            SampledCurve(np.arange(3.0), np.zeros(4))


class TestConvolveIrf:
    def test_delta_becomes_gaussian(self):
        t = np.arange(-200.0, 200.0, 1.0)
        y = np.zeros_like(t)
        y[t.size // 2] = 1.0
        out = convolve_irf(SampledCurve(t, y), 40.0)
        half = out.y >= 0.5 * out.y.max()
        fwhm = t[half][-1] - t[half][0]
        assert fwhm == pytest.approx(40.0, abs=2.0)

    def test_area_preserved(self):
        t = np.arange(-300.0, 600.0, 1.0)
        y = np.where(t >= 0, np.exp(-t / 25.0), 0.0)
        out = convolve_irf(SampledCurve(t, y), 60.0)
        assert np.trapezoid(out.y, out.x) == pytest.approx(np.trapezoid(y, t), rel=1e-6)

    def test_double_convolution_composition(self):
        t = np.arange(-400.0, 400.0, 0.5)
        y = np.exp(-0.5 * (t / 30.0) ** 2)
        f = 40.0
        twice = convolve_irf(convolve_irf(SampledCurve(t, y), f), f)
        once = convolve_irf(SampledCurve(t, y), f * math.sqrt(2.0))
        assert np.max(np.abs(twice.y - once.y)) < 1e-6 * once.y.max()

    def test_commutes_with_addition(self):
        t = np.arange(-200.0, 200.0, 1.0)
        y1 = np.exp(-0.5 * (t / 20.0) ** 2)
        y2 = np.exp(-0.5 * ((t - 40) / 15.0) ** 2)
        summed = convolve_irf(SampledCurve(t, y1 + y2), 30.0)
        separate = convolve_irf(SampledCurve(t, y1), 30.0).y \
            + convolve_irf(SampledCurve(t, y2), 30.0).y
        assert np.max(np.abs(summed.y - separate)) < 1e-12

    def test_resolution_error(self):
        t = np.arange(0.0, 1000.0, 20.0)
        with pytest.raises(an.ResolutionError):
            convolve_irf(SampledCurve(t, np.exp(-t / 100.0)), 60.0)

    def test_nonuniform_grid_resampled(self):
        t = np.sort(np.concatenate([np.arange(-100, 100, 1.0),
                                    np.arange(100, 300, 2.0)]))
        y = np.where(t >= 0, np.exp(-t / 25.0), 0.0)
        out = convolve_irf(SampledCurve(t, y), 50.0)
        assert np.allclose(np.diff(out.x), np.diff(out.x)[0])


class TestExponentialRecovery:
    def test_noiseless_self_fit(self):
        t1 = 22.7
        x = np.linspace(2.0, 180.0, 25)
        y = 2.0 * (1.0 - np.exp(-x / t1))
        fit = fit_exponential_recovery(SampledCurve(x, y))
        assert fit["t1"] == pytest.approx(t1, rel=1e-6)
        assert fit["amplitude"] == pytest.approx(2.0, rel=1e-6)

    def test_offset_variant_self_fit(self):
        x = np.linspace(5.0, 200.0, 30)
        y = 1.8 * (1.0 - np.exp(-(x - 3.0) / 20.0))
        fit = fit_exponential_recovery(SampledCurve(x, y), fit_offset=True)
        assert fit["t1"] == pytest.approx(20.0, rel=1e-6)
        assert fit["t_offset"] == pytest.approx(3.0, abs=1e-4)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_exponential_recovery(SampledCurve(np.arange(4.0), np.ones(4)))

    def test_error_bars_scale_with_averaging(self, rng):
        # averaging N noisy realizations shrinks parameter errors as 1/sqrt(N)
        x = np.linspace(2.0, 180.0, 30)
        clean = 2.0 * (1.0 - np.exp(-x / 22.7))
        sigmas = {}
        for n_avg in (100, 400):
            reals = clean + 0.05 * rng.standard_normal((n_avg, x.size))
            avg = reals.mean(axis=0)
            fit = fit_exponential_recovery(SampledCurve(x, avg))
            sigmas[n_avg] = fit.errors["t1"]
        assert sigmas[400] / sigmas[100] == pytest.approx(0.5, abs=0.15)


class TestNaiveDecayFit:
    def test_pure_exponential_recovered(self):
        t = np.arange(0.0, 300.0, 1.0)
        fit = naive_decay_fit(SampledCurve(t, 3.0 * np.exp(-t / 40.0)))
        assert fit["tau"] == pytest.approx(40.0, rel=1e-6)

    def test_irf_limited_apparent_decay(self):
        # the headline reconstruction: 22.7 ps decay under a 60 ps response
        # looks like ~46 ps to a plain exponential fit
        t = np.arange(-300.0, 600.0, 1.0)
        y = np.where(t >= 0, np.exp(-t / 22.7), 0.0)
        conv = convolve_irf(SampledCurve(t, y), 60.0)
        fit = naive_decay_fit(conv)
        assert fit["tau"] == pytest.approx(46.2, rel=0.15)
        assert fit["tau"] > 1.7 * 22.7


class TestRrsCurveFit:
    def test_noiseless_self_fit(self):
        om = 2 * np.pi * np.logspace(np.log10(0.5), np.log10(30), 9) / 1000.0
        y = an.rrs_fraction_model(om, 24.6, 49.2)
        fit = fit_rrs_curve(SampledCurve(om, y))
        assert fit["t1"] == pytest.approx(24.6, rel=1e-6)
        assert fit["t2"] == pytest.approx(49.2, rel=1e-6)

    def test_calibrated_noise_reproduces_quoted_errors(self, rng):
        # 0.02 absolute noise on the fraction (it is measured in percent),
        # 5 log-spaced points across the knee: typical 1-sigma errors land
        # near the measured +-1.6 / +-5.4 ps
        om = 2 * np.pi * np.logspace(np.log10(3.0), np.log10(25), 5) / 1000.0
        clean = an.rrs_fraction_model(om, 24.6, 49.2)
        e1, e2 = [], []
        for _ in range(20):
            y = clean + 0.02 * rng.standard_normal(5)
            fit = fit_rrs_curve(SampledCurve(om, y, y_err=np.full(5, 0.02)))
            e1.append(fit.errors["t1"])
            e2.append(fit.errors["t2"])
        assert 0.8 <= np.median(e1) <= 3.2
        assert 2.7 <= np.median(e2) <= 10.8

    def test_flat_curve_ill_conditioned(self):
        om = np.linspace(0.001, 0.002, 6)
        with pytest.raises(an.IllConditionedFit):
            fit_rrs_curve(SampledCurve(om, np.full(6, 0.8)))

    def test_low_coherence_cannot_reach_high_fraction(self):
        # T2/T1 = 1.5 caps the fraction at 0.75 for any drive
        om = np.linspace(0.0, 0.3, 200)
        vals = an.rrs_fraction_model(om, 24.6, 1.5 * 24.6)
        assert vals.max() == pytest.approx(0.75, rel=1e-12)
        assert np.all(vals <= 0.75 + 1e-12)


class TestFpDecomposition:
    def _spectrum(self, frac, irf=0.5, se_fwhm=6.0, n=801, span=40.0):
        x = np.linspace(-span, span, n)
        y = an._gaussian_area(x, frac, 0.0, irf) + an._lorentzian_area(x, 1 - frac, 0.0, se_fwhm)
        return SampledCurve(x, y)

    def test_pure_gaussian(self):
        x = np.linspace(-20.0, 20.0, 801)
        y = an._gaussian_area(x, 1.0, 0.0, 0.5)
        res = decompose_fp_spectrum(SampledCurve(x, y), 0.5)
        assert res.rrs_fraction == pytest.approx(1.0, abs=1e-6)

    def test_mixture_recovered(self):
        res = decompose_fp_spectrum(self._spectrum(0.874), 0.5)
        assert res.rrs_fraction == pytest.approx(0.874, abs=0.01)

    def test_weak_se_flag_and_constraint(self):
        curve = self._spectrum(0.97)
        with pytest.warns(UserWarning):
            free = decompose_fp_spectrum(curve, 0.5)
        assert free.weak_se
        fixed = decompose_fp_spectrum(curve, 0.5, se_fwhm_constraint=6.0)
        assert fixed.constrained
        assert fixed.rrs_fraction == pytest.approx(0.97, abs=0.005)
        assert fixed.se_fwhm == 6.0


class TestHomPeakFit:
    SPACING = 2000.0
    IRF = 860.0

    def _histogram(self, areas, irf=None):
        irf = irf or self.IRF
        t = np.arange(-2.5 * self.SPACING, 2.5 * self.SPACING, self.SPACING / 100.0)
        y = np.zeros_like(t)
        for k, area in enumerate(areas):
            y += an._gaussian_area(t, area, (k - 2) * self.SPACING, irf)
        return SampledCurve(t, y)

    def test_known_pattern_recovered(self):
        areas = np.array([1.0, 4.0, 2.4, 4.0, 1.0])
        fit = fit_hom_peaks(self._histogram(areas), self.IRF, self.SPACING)
        assert np.allclose(fit.areas, areas, rtol=0.02)
        assert not fit.degenerate

    def test_zero_central_peak(self):
        fit = fit_hom_peaks(self._histogram([1.0, 4.0, 0.0, 4.0, 1.0]),
                            self.IRF, self.SPACING)
        assert fit.areas[2] == pytest.approx(0.0, abs=1e-5)

    def test_fixed_width_insensitive_to_fast_decay(self):
        # emitter decay (22.7 ps) is invisible under an 860 ps response:
        # smearing the peaks with it changes fitted areas by < 1%
        areas = np.array([1.0, 4.0, 2.4, 4.0, 1.0])
        t = np.arange(-2.5 * self.SPACING, 2.5 * self.SPACING, self.SPACING / 100.0)
        tau = 22.7
        y = np.zeros_like(t)
        width = math.sqrt(self.IRF**2)  # detector response dominates
        for k, area in enumerate(areas):
            y += an._gaussian_area(t, area, (k - 2) * self.SPACING, width)
        base = fit_hom_peaks(SampledCurve(t, y), self.IRF, self.SPACING)
        # two-sided exponential smear of the same histogram
        dt = t[1] - t[0]
        kt = np.arange(-8 * tau, 8 * tau + dt / 2, dt)
        kernel = np.exp(-np.abs(kt) / tau)
        kernel /= kernel.sum()
        smeared = fit_hom_peaks(SampledCurve(t, np.convolve(y, kernel, mode="same")),
                                self.IRF, self.SPACING)
        assert np.allclose(smeared.areas, base.areas, rtol=0.01)

    def test_unresolvable_spacing_rejected(self):
        with pytest.raises(ValueError):
            fit_hom_peaks(self._histogram([1, 4, 2, 4, 1]), self.IRF, 0.9 * self.IRF)

    def test_degeneracy_flagged(self):
        hist = self._histogram([1, 4, 2, 4, 1])
        fit = fit_hom_peaks(hist, self.SPACING / 1.4, self.SPACING)
        assert fit.degenerate


class TestRawVisibility:
    def test_arithmetic(self):
        v, _ = raw_visibility(100.0, 40.0)
        assert v == pytest.approx(0.60, rel=1e-12)

    def test_fully_distinguishable(self):
        v, _ = raw_visibility(100.0, 100.0)
        assert v == 0.0

    def test_error_propagation(self):
        v, err = raw_visibility(100.0, 40.0, err_cross=5.0, err_co=2.0)
        expected = 0.4 * math.hypot(2.0 / 40.0, 5.0 / 100.0)
        assert err == pytest.approx(expected, rel=1e-9)

    def test_rejects_nonpositive_denominator(self):
        with pytest.raises(ValueError):
            raw_visibility(0.0, 1.0)


class TestVisibilityCorrections:
    def test_ideal_apparatus_is_identity(self):
        params = HomCorrectionParams(g2=0.0, epsilon=0.0, r=0.5, t=0.5)
        res = corrected_visibility_santori(0.35, 1.0, params)
        assert res.value == pytest.approx(0.65, rel=1e-12)

    def test_unfiltered_13ps_correction(self):
        # raw 60.1% with the measured apparatus parameters -> 79.6%
        res = corrected_visibility_santori(1.0 - 0.601, 1.0, TABLE_PARAMS)
        assert res.value == pytest.approx(0.796, abs=0.005)
        assert not res.saturated

    def test_g2_only_correction_short_pulse(self):
        # 2.4 ps case: interferometer already corrected, only g2 remains
        params = HomCorrectionParams(g2=0.026, epsilon=0.0, r=0.5, t=0.5)
        res = corrected_visibility_santori(1.0 - 0.894, 1.0, params)
        assert res.value == pytest.approx(0.939, abs=0.01)

    def test_saturation_flagged_not_clipped(self):
        res = corrected_visibility_santori(0.01, 1.0, TABLE_PARAMS)
        assert res.value > 1.0
        assert res.saturated

    def test_unusable_configuration(self):
        params = HomCorrectionParams(g2=0.1, epsilon=0.0, r=1.0, t=0.0)
        with pytest.raises(an.ConfigurationError):
            corrected_visibility_santori(0.3, 1.0, params)

    def test_somaschi_paper_point(self):
        areas = hom_peak_areas_model(0.796, TABLE_PARAMS)
        res = corrected_visibility_somaschi(areas, TABLE_PARAMS)
        assert res.value == pytest.approx(0.798, abs=0.005)

    def test_somaschi_ideal_balanced(self):
        params = HomCorrectionParams(g2=0.0, epsilon=0.0, r=0.5, t=0.5)
        areas = HomPeakAreas(areas=np.array([1.0, 2.0, 0.0, 2.0, 1.0]))
        res = corrected_visibility_somaschi(areas, params)
        assert res.value == pytest.approx(1.0, rel=1e-12)

    def test_santori_exact_on_model_areas(self):
        for v_true in (0.2, 0.6, 0.9):
            areas = hom_peak_areas_model(v_true, TABLE_PARAMS)
            cross = hom_peak_areas_model(0.0, TABLE_PARAMS)
            res = corrected_visibility_santori(areas.a3, cross.a3, TABLE_PARAMS)
            assert res.value == pytest.approx(v_true, abs=1e-9)

    def test_formulas_agree_across_sweep(self):
        # both corrections applied to the same model histogram agree to 1 point
        v_true = 0.796
        for g2 in (0.0, 0.1, 0.2):
            for eps in (0.0, 0.05, 0.1):
                for r in (0.45, 0.5, 0.55):
                    params = HomCorrectionParams(g2=g2, epsilon=eps, r=r, t=1.0 - r)
                    areas = hom_peak_areas_model(v_true, params)
                    cross = hom_peak_areas_model(0.0, params)
                    sant = corrected_visibility_santori(areas.a3, cross.a3, params)
                    soma = corrected_visibility_somaschi(areas, params)
                    assert abs(sant.value - soma.value) <= 0.01


class TestMollowCalibration:
    G1, G2 = 1 / 24.6, 1 / 49.2

    def _splittings(self, slope, powers):
        out = []
        for p in powers:
            omega = math.sqrt(slope * p)
            d = omega**2 - 0.25 * (self.G1 - self.G2) ** 2
            out.append(math.sqrt(d) if d >= 0 else None)
        return out

    def test_slope_recovery(self):
        powers = np.linspace(0.5, 10.0, 12)
        cal = mollow_calibration(powers, self._splittings(2e-3, powers))
        assert cal.slope == pytest.approx(2e-3, rel=0.01)
        assert cal.damping_offset == pytest.approx(0.25 * (self.G1 - self.G2) ** 2, rel=0.05)

    def test_all_below_threshold(self):
        powers = np.array([1e-6, 2e-6, 3e-6])
        with pytest.raises(ValueError):
            mollow_calibration(powers, self._splittings(1e-9, powers))

    def test_prediction_linearity(self):
        powers = np.linspace(1.0, 8.0, 8)
        cal = mollow_calibration(powers, self._splittings(1e-3, powers))
        p = np.array([2.0, 4.0])
        assert cal.omega_of_power(2 * p[0]) ** 2 == pytest.approx(
            2 * cal.omega_of_power(p[0]) ** 2, rel=1e-12)
