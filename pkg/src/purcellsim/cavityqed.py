"""Closed-form cavity-QED relations for a Purcell-enhanced emitter.

Covers the Purcell factor and its detuning dependence, dipole moment and
emitter--cavity coupling strength, the strong-coupling threshold, the
resonant-Rayleigh-scattering fraction, damped Rabi splitting, the
double-pulse intensity recovery, and the coupling-efficiency / count-rate
budgets of the waveguide-coupled source.

Unit conventions follow the quantities as they are usually quoted:
energies and linewidths in ueV (photon energies in eV), lifetimes in ps,
Rabi and angular frequencies in rad/ps, mode volumes in cubic reduced
wavelengths (lambda/n)^3.
"""

import math
from dataclasses import dataclass

from .constants import (
    DEBYE,
    ELEMENTARY_CHARGE,
    EPSILON_0,
    HBAR_SI,
    HBAR_UEV_PS,
    SPEED_OF_LIGHT,
    ev_to_rad_per_s,
)

__all__ = [
    "CavityDesign",
    "EmitterConstants",
    "BrightnessBudget",
    "CouplingEfficiencies",
    "StrongCouplingResult",
    "ideal_purcell",
    "purcell_factor",
    "t1_of_detuning",
    "dipole_moment",
    "coupling_strength",
    "strong_coupling_check",
    "rrs_fraction",
    "rrs_max_fraction",
    "damped_rabi",
    "dprf_intensity",
    "p2_probability",
    "coupling_efficiencies",
    "count_rate_budget",
]

#: Default refractive index (GaAs near 915 nm).  Not pinned by measurement;
#: every operation that needs it takes it as a parameter.
DEFAULT_REFRACTIVE_INDEX = 3.4

RRS_PHYSICALITY_TOL = 1e-9


class PhysicalityError(ValueError):
    """Inputs violate a physical constraint (e.g. T2 > 2 T1)."""


@dataclass(frozen=True)
class CavityDesign:
    """Cavity mode parameters entering the Purcell formula.

    ``overlap_field`` is the field-projection factor |eps(r0).mu|/|mu|
    (unsquared); the Purcell formula squares it internally.
    ``linewidth_2kappa_uev`` may be omitted, in which case it is derived
    from Q and the photon energy.
    """

    q_factor: float
    mode_volume: float  # in (lambda/n)^3
    overlap_field: float = 1.0
    photon_energy_ev: float = 1.354
    linewidth_2kappa_uev: float | None = None
    refractive_index: float = DEFAULT_REFRACTIVE_INDEX

    def __post_init__(self):
        if self.q_factor <= 0 or self.mode_volume <= 0:
            raise ValueError("Q and mode volume must be positive")
        if not 0.0 <= self.overlap_field <= 1.0:
            raise ValueError(f"overlap_field must lie in [0, 1], got {self.overlap_field}")
        if self.photon_energy_ev <= 0:
            raise ValueError("photon energy must be positive")
        if self.linewidth_2kappa_uev is not None:
            derived = self.photon_energy_ev * 1e6 / self.q_factor
            if abs(self.linewidth_2kappa_uev - derived) > 0.05 * derived:
                raise ValueError(
                    f"linewidth {self.linewidth_2kappa_uev} ueV inconsistent with "
                    f"E/Q = {derived:.1f} ueV beyond 5%"
                )

    @property
    def linewidth_uev(self) -> float:
        """Cavity FWHM 2*hbar*kappa in ueV."""
        if self.linewidth_2kappa_uev is not None:
            return self.linewidth_2kappa_uev
        return self.photon_energy_ev * 1e6 / self.q_factor


@dataclass(frozen=True)
class EmitterConstants:
    """Bare (out-of-cavity) emitter constants."""

    t1_prime_ps: float
    dipole_moment_debye: float | None = None

    def __post_init__(self):
        if self.t1_prime_ps <= 0:
            raise ValueError("bare lifetime must be positive")

    @property
    def gamma1_prime_uev(self) -> float:
        """Natural linewidth hbar/T1' in ueV."""
        return HBAR_UEV_PS / self.t1_prime_ps


@dataclass(frozen=True)
class BrightnessBudget:
    """Loss chain from excitation repetition rate to detected count rate."""

    rep_rate_hz: float
    eta_qd_waveguide: float
    waveguide_length_mm: float
    propagation_loss_db_per_mm: float
    detector_efficiency: float

    def __post_init__(self):
        for name in ("rep_rate_hz", "eta_qd_waveguide", "waveguide_length_mm",
                     "propagation_loss_db_per_mm", "detector_efficiency"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.eta_qd_waveguide > 1 or self.detector_efficiency > 1:
            raise ValueError("efficiencies cannot exceed 1")


@dataclass(frozen=True)
class CouplingEfficiencies:
    eta_cavity_waveguides_total: float
    eta_per_waveguide: tuple[float, float]
    beta: float
    eta_qd_waveguide: float


@dataclass(frozen=True)
class StrongCouplingResult:
    strong: bool
    threshold_q: float


def ideal_purcell(q_factor: float, mode_volume: float) -> float:
    """Ideal Purcell factor 3 Q / (4 pi^2 V_m) at zero detuning and perfect overlap."""
    if q_factor <= 0 or mode_volume <= 0:
        raise ValueError("Q and mode volume must be positive")
    return 3.0 * q_factor / (4.0 * math.pi**2 * mode_volume)


def purcell_factor(design: CavityDesign, detuning_uev: float = 0.0) -> float:
    """Purcell factor vs emitter--cavity detuning.

    F_P(d) = [3Q/(4 pi^2 V_m)] * (2k)^2 / (4 d^2 + (2k)^2) * overlap^2,
    with 2k the cavity FWHM and d the detuning, both in ueV.
    """
    width = design.linewidth_uev
    if width <= 0:
        raise ValueError("cavity linewidth must be positive")
    lorentz = width**2 / (4.0 * detuning_uev**2 + width**2)
    return ideal_purcell(design.q_factor, design.mode_volume) * lorentz * design.overlap_field**2


def t1_of_detuning(design: CavityDesign, emitter: EmitterConstants,
                   detuning_uev: float = 0.0) -> float:
    """Purcell-shortened lifetime T1 = T1' / F_P(detuning), in ps."""
    return emitter.t1_prime_ps / purcell_factor(design, detuning_uev)


def dipole_moment(gamma1_prime_per_ps: float, photon_energy_ev: float,
                  refractive_index: float = DEFAULT_REFRACTIVE_INDEX) -> float:
    """Transition dipole moment in Debye from the radiative rate.

    |mu| = sqrt(3 pi hbar eps0 gamma1' c^3 / (n omega^3)); gamma1' in 1/ps.
    """
    if gamma1_prime_per_ps <= 0 or photon_energy_ev <= 0 or refractive_index <= 0:
        raise ValueError("inputs must be positive")
    gamma_si = gamma1_prime_per_ps * 1e12
    omega = ev_to_rad_per_s(photon_energy_ev)
    mu_sq = (3.0 * math.pi * HBAR_SI * EPSILON_0 * gamma_si * SPEED_OF_LIGHT**3
             / (refractive_index * omega**3))
    return math.sqrt(mu_sq) / DEBYE


def coupling_strength(photon_energy_ev: float, dipole_debye: float,
                      overlap_field: float = 1.0,
                      refractive_index: float = DEFAULT_REFRACTIVE_INDEX,
                      mode_volume: float = 1.0) -> float:
    """Emitter--cavity coupling hbar*g in ueV.

    g = sqrt(omega |eps.mu|^2 / (2 hbar eps0 n^2 V)), with the physical mode
    volume V = mode_volume * (lambda/n)^3 and eps.mu = overlap_field * mu.
    """
    if photon_energy_ev <= 0 or dipole_debye <= 0 or mode_volume <= 0:
        raise ValueError("inputs must be positive")
    omega = ev_to_rad_per_s(photon_energy_ev)
    wavelength = 2.0 * math.pi * SPEED_OF_LIGHT / omega
    volume = mode_volume * (wavelength / refractive_index) ** 3
    mu = overlap_field * dipole_debye * DEBYE
    g_sq = omega * mu**2 / (2.0 * HBAR_SI * EPSILON_0 * refractive_index**2 * volume)
    return math.sqrt(g_sq) * HBAR_SI / ELEMENTARY_CHARGE * 1e6


def strong_coupling_check(hbar_g_uev: float, hbar_2kappa_uev: float,
                          hbar_gamma1_prime_uev: float,
                          photon_energy_ev: float = 1.354) -> StrongCouplingResult:
    """Vacuum-Rabi-splitting condition 16 g^2 > (2k - g1')^2.

    The boundary (equality) counts as weak.  ``threshold_q`` is the quality
    factor at which equality would hold with g, g1' and the photon energy
    fixed (2k scales as E/Q).
    """
    if min(hbar_g_uev, hbar_2kappa_uev, hbar_gamma1_prime_uev) < 0:
        raise ValueError("rates must be nonnegative")
    strong = 16.0 * hbar_g_uev**2 > (hbar_2kappa_uev - hbar_gamma1_prime_uev) ** 2
    width_at_threshold = 4.0 * hbar_g_uev + hbar_gamma1_prime_uev
    threshold_q = photon_energy_ev * 1e6 / width_at_threshold
    return StrongCouplingResult(strong=strong, threshold_q=threshold_q)


def rrs_fraction(t1_ps: float, t2_ps: float, omega_r: float) -> float:
    """Coherently scattered fraction I_RRS / I_total under CW driving.

    (T2 / 2 T1) / (1 + Omega^2 / (gamma1 gamma2)) with gamma_i = 1/T_i and
    Omega the Rabi frequency in rad/ps.
    """
    if t1_ps <= 0 or t2_ps <= 0:
        raise ValueError("lifetimes must be positive")
    if omega_r < 0:
        raise ValueError("Rabi frequency must be nonnegative")
    if t2_ps > 2.0 * t1_ps * (1.0 + RRS_PHYSICALITY_TOL):
        raise PhysicalityError(f"T2 = {t2_ps} ps exceeds 2 T1 = {2 * t1_ps} ps")
    return (t2_ps / (2.0 * t1_ps)) / (1.0 + omega_r**2 * t1_ps * t2_ps)


def rrs_max_fraction(t1_ps: float, t2_ps: float) -> float:
    """Weak-driving limit of the RRS fraction, T2 / (2 T1)."""
    return rrs_fraction(t1_ps, t2_ps, 0.0)


def damped_rabi(omega_r: float, gamma1: float, gamma2: float) -> float | None:
    """Damped Rabi frequency sqrt(Omega^2 - (gamma1 - gamma2)^2 / 4).

    Returns None below threshold, where the splitting is fully damped and
    no triplet forms.
    """
    if gamma1 < 0 or gamma2 < 0:
        raise ValueError("rates must be nonnegative")
    disc = omega_r**2 - 0.25 * (gamma1 - gamma2) ** 2
    if disc < 0:
        return None
    return math.sqrt(disc)


def dprf_intensity(delta_t_ps: float, t1_ps: float) -> float:
    """Double-pulse intensity recovery 2 (1 - exp(-dt/T1)), normalized to
    one single-pulse emission."""
    if delta_t_ps < 0:
        raise ValueError("pulse separation must be nonnegative")
    return 2.0 * (1.0 - math.exp(-delta_t_ps / t1_ps))


def p2_probability(delta_tau_ps: float, t1_ps: float) -> float:
    """Two-emission probability 1 - exp(-dt/T1) for negligibly short pulses."""
    if delta_tau_ps < 0:
        raise ValueError("pulse separation must be nonnegative")
    return 1.0 - math.exp(-delta_tau_ps / t1_ps)


def coupling_efficiencies(q_coupled: float, q_uncoupled: float,
                          branch_ratio: float, purcell: float) -> CouplingEfficiencies:
    """Efficiency chain from emitter to waveguide.

    eta_c-u = 1 - Q_coupled/Q_uncoupled split between the two waveguides by
    ``branch_ratio`` (main:other), beta = F_P/(1+F_P), and
    eta_q-u = beta * eta_c-u(main arm).
    """
    if not 0 < q_coupled <= q_uncoupled:
        raise ValueError("need 0 < Q_coupled <= Q_uncoupled")
    if branch_ratio <= 0:
        raise ValueError("branch ratio must be positive")
    total = 1.0 - q_coupled / q_uncoupled
    main = total * branch_ratio / (1.0 + branch_ratio)
    other = total / (1.0 + branch_ratio)
    beta = purcell / (1.0 + purcell)
    return CouplingEfficiencies(
        eta_cavity_waveguides_total=total,
        eta_per_waveguide=(main, other),
        beta=beta,
        eta_qd_waveguide=beta * main,
    )


def count_rate_budget(budget: BrightnessBudget) -> float:
    """Detected count rate in Hz for the given loss chain."""
    loss_db = budget.propagation_loss_db_per_mm * budget.waveguide_length_mm
    return (budget.rep_rate_hz * budget.eta_qd_waveguide
            * 10.0 ** (-loss_db / 10.0) * budget.detector_efficiency)
