import math

import numpy as np
import pytest

from purcellsim import cavityqed as cq


class TestIdealPurcell:
    def test_fabricated_cavity(self):
        assert cq.ideal_purcell(540, 0.63) == pytest.approx(65.1, rel=5e-3)

    def test_strong_coupling_onset_quality(self):
        assert cq.ideal_purcell(2500, 0.63) == pytest.approx(301.5, rel=1e-3)
        assert cq.ideal_purcell(2500, 0.63) * 0.81**2 == pytest.approx(198, rel=0.01)

    def test_formula_inversion(self):
        assert cq.ideal_purcell(4 * math.pi**2 / 3, 1.0) == pytest.approx(1.0, rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            cq.ideal_purcell(-1, 0.63)
        with pytest.raises(ValueError):
            cq.ideal_purcell(540, 0.0)


@pytest.fixture(scope="module")
def design():
    return cq.CavityDesign(q_factor=540, mode_volume=0.63, overlap_field=0.81,
                           photon_energy_ev=1.354, linewidth_2kappa_uev=2510)


@pytest.fixture(scope="module")
def emitter():
    return cq.EmitterConstants(t1_prime_ps=971)


class TestPurcellFactor:
    def test_resonant_lifetime(self, design, emitter):
        assert cq.purcell_factor(design) == pytest.approx(42.7, abs=0.1)
        assert cq.t1_of_detuning(design, emitter) == pytest.approx(22.7, abs=0.7)

    def test_lorentzian_half_width(self, design):
        half = design.linewidth_uev / 2.0
        assert cq.purcell_factor(design, half) == pytest.approx(
            cq.purcell_factor(design) / 2.0, rel=1e-12)
        assert cq.purcell_factor(design, -half) == pytest.approx(
            cq.purcell_factor(design) / 2.0, rel=1e-12)

    def test_tuning_window(self, design, emitter):
        # T1 stays below 30 ps across a 1.4 meV window
        dets = np.linspace(-700, 700, 141)
        t1 = np.array([cq.t1_of_detuning(design, emitter, d) for d in dets])
        assert t1.max() <= 30.0

    def test_consistency_chain(self, design, emitter):
        ideal_scaled = cq.ideal_purcell(design.q_factor, design.mode_volume) \
            * design.overlap_field**2
        assert cq.purcell_factor(design) == pytest.approx(ideal_scaled, rel=1e-12)
        assert emitter.t1_prime_ps / cq.t1_of_detuning(design, emitter) == pytest.approx(
            cq.purcell_factor(design), rel=1e-12)

    def test_linewidth_consistency_check(self):
        with pytest.raises(ValueError):
            cq.CavityDesign(q_factor=540, mode_volume=0.63,
                            photon_energy_ev=1.354, linewidth_2kappa_uev=3000)


class TestDipoleAndCoupling:
    def test_dipole_moment(self):
        assert cq.dipole_moment(1 / 971.0, 1.354, 3.4) == pytest.approx(27.2, rel=0.03)

    def test_dipole_scaling_laws(self):
        base = cq.dipole_moment(1 / 971.0, 1.354, 3.4)
        assert cq.dipole_moment(4 / 971.0, 1.354, 3.4) == pytest.approx(2 * base, rel=1e-12)
        assert cq.dipole_moment(1 / 971.0, 4 * 1.354, 3.4) == pytest.approx(base / 8, rel=1e-12)

    def test_coupling_strength(self):
        mu = cq.dipole_moment(1 / 971.0, 1.354, 3.4)
        g_max = cq.coupling_strength(1.354, mu, 1.0, 3.4, 0.63)
        g_measured = cq.coupling_strength(1.354, mu, 0.81, 3.4, 0.63)
        assert g_max == pytest.approx(166, rel=0.03)
        assert g_measured == pytest.approx(135, rel=0.03)
        assert cq.coupling_strength(1.354, mu, 0.0, 3.4, 0.63) == 0.0

    def test_cooperativity_closure(self):
        # 2 g^2 / (kappa gamma1') re-derives the ideal Purcell factor
        emitter = cq.EmitterConstants(t1_prime_ps=971)
        mu = cq.dipole_moment(1 / 971.0, 1.354, 3.4)
        hbar_g = cq.coupling_strength(1.354, mu, 1.0, 3.4, 0.63)
        coop_fp = 2 * hbar_g**2 / ((2510 / 2) * emitter.gamma1_prime_uev)
        assert coop_fp == pytest.approx(cq.ideal_purcell(540, 0.63), rel=0.02)


class TestStrongCoupling:
    def test_device_is_weak(self):
        res = cq.strong_coupling_check(135, 2510, 0.68)
        assert not res.strong
        assert res.threshold_q == pytest.approx(2500, rel=0.05)

    def test_strong_example(self):
        # g = kappa, negligible emitter decay: 16 g^2 > (2g)^2
        res = cq.strong_coupling_check(100, 200, 0.0)
        assert res.strong

    def test_boundary_counts_as_weak(self):
        res = cq.strong_coupling_check(100, 400, 0.0)
        assert not res.strong


class TestRrsFraction:
    def test_radiative_limit(self):
        assert cq.rrs_fraction(20.0, 40.0, 0.0) == pytest.approx(1.0, rel=1e-12)

    def test_measured_point(self):
        omega = 2 * math.pi * 2e-3  # 2 GHz in rad/ps
        assert cq.rrs_fraction(24.6, 49.2, omega) == pytest.approx(0.84, abs=0.005)

    def test_half_saturation(self):
        t1, t2 = 20.0, 40.0
        omega = 1.0 / math.sqrt(t1 * t2)
        assert cq.rrs_fraction(t1, t2, omega) == pytest.approx(0.5, rel=1e-12)

    def test_physicality(self):
        with pytest.raises(cq.PhysicalityError):
            cq.rrs_fraction(20.0, 41.0, 0.0)

    def test_monotone_and_bounded(self):
        omegas = np.linspace(0, 0.5, 50)
        vals = [cq.rrs_fraction(24.6, 40.0, w) for w in omegas]
        assert np.all(np.diff(vals) <= 0)
        assert max(vals) <= 40.0 / (2 * 24.6) + 1e-12


class TestDampedRabi:
    def test_equal_rates(self):
        assert cq.damped_rabi(0.3, 0.1, 0.1) == pytest.approx(0.3, rel=1e-12)

    def test_threshold(self):
        assert cq.damped_rabi(0.05, 0.2, 0.1) == pytest.approx(0.0, abs=1e-12)

    def test_sub_threshold(self):
        assert cq.damped_rabi(0.04, 0.2, 0.1) is None

    def test_real_iff_above_threshold(self):
        g1, g2 = 0.21, 0.03
        thr = abs(g1 - g2) / 2
        assert cq.damped_rabi(thr * 1.01, g1, g2) is not None
        assert cq.damped_rabi(thr * 0.99, g1, g2) is None

    def test_squared_splitting_line(self):
        # Omega^2 = Omega_d^2 + (g1-g2)^2/4 is linear through the origin in power
        g1, g2 = 1 / 24.6, 1 / 49.2
        slope = 0.002
        powers = np.linspace(1.0, 10.0, 10)
        od = np.array([cq.damped_rabi(math.sqrt(slope * p), g1, g2) for p in powers])
        fitted = np.polyfit(powers, od**2, 1)
        assert fitted[0] == pytest.approx(slope, rel=1e-9)
        assert -fitted[1] == pytest.approx((g1 - g2) ** 2 / 4, rel=1e-6)


class TestDprfClosedForms:
    def test_zero_separation(self):
        assert cq.dprf_intensity(0.0, 22.7) == 0.0

    def test_one_lifetime(self):
        assert cq.dprf_intensity(22.7, 22.7) == pytest.approx(2 * (1 - math.exp(-1)), rel=1e-12)
        assert cq.dprf_intensity(22.7, 22.7) == pytest.approx(1.264, abs=5e-4)

    def test_asymptotes(self):
        assert cq.dprf_intensity(0.0, 10.0) == 0.0
        assert cq.dprf_intensity(1e6, 10.0) == pytest.approx(2.0, rel=1e-12)

    def test_p2(self):
        assert cq.p2_probability(5 * 22.7, 22.7) == pytest.approx(0.9933, abs=5e-5)
        with pytest.raises(ValueError):
            cq.p2_probability(-1.0, 22.7)


class TestEfficienciesAndBudget:
    def test_device_chain(self):
        eff = cq.coupling_efficiencies(540, 1109, 4.0, 43.0)
        assert eff.eta_cavity_waveguides_total == pytest.approx(0.51, abs=0.01)
        assert eff.eta_per_waveguide[0] == pytest.approx(0.41, abs=0.01)
        assert eff.eta_per_waveguide[1] == pytest.approx(0.10, abs=0.01)
        assert eff.beta == pytest.approx(0.98, abs=0.01)
        assert eff.eta_qd_waveguide == pytest.approx(0.40, abs=0.01)

    def test_no_loading(self):
        eff = cq.coupling_efficiencies(800, 800, 4.0, 43.0)
        assert eff.eta_cavity_waveguides_total == 0.0

    def test_beta_limit(self):
        eff = cq.coupling_efficiencies(540, 1109, 4.0, 1e9)
        assert eff.beta == pytest.approx(1.0, abs=1e-8)

    def test_q_ordering(self):
        with pytest.raises(ValueError):
            cq.coupling_efficiencies(1200, 1109, 4.0, 43.0)

    def test_count_rates(self):
        budget = cq.BrightnessBudget(76.2e6, 0.40, 0.1, 17.0, 0.20)
        assert cq.count_rate_budget(budget) == pytest.approx(4.1e6, rel=0.05)
        fast = cq.BrightnessBudget(1e10, 0.40, 0.1, 17.0, 0.20)
        assert cq.count_rate_budget(fast) == pytest.approx(540e6, rel=0.05)

    def test_lossless_chain(self):
        budget = cq.BrightnessBudget(5e6, 1.0, 0.0, 17.0, 1.0)
        assert cq.count_rate_budget(budget) == pytest.approx(5e6, rel=1e-12)

    def test_linearity_and_commutativity(self, rng=np.random.default_rng(5)):
        for _ in range(20):
            rep = rng.uniform(1e6, 1e10)
            eta, det = rng.uniform(0.01, 1.0, 2)
            length, loss = rng.uniform(0, 1), rng.uniform(0, 20)
            a = cq.count_rate_budget(cq.BrightnessBudget(rep, eta, length, loss, det))
            b = cq.count_rate_budget(cq.BrightnessBudget(rep, det, length, loss, eta))
            assert a == pytest.approx(b, rel=1e-12)
            doubled = cq.count_rate_budget(cq.BrightnessBudget(2 * rep, eta, length, loss, det))
            assert doubled == pytest.approx(2 * a, rel=1e-12)
