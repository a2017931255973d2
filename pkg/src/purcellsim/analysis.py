"""Data-analysis procedures: detector-response convolution, lifetime and
coherent-fraction fits, interferometer spectrum decomposition, two-photon
interference peak fitting and visibility corrections.

All fits are nonlinear least squares (scipy) with 1-sigma parameter errors
taken from the covariance at the optimum scaled by the reduced chi-square.
Background subtraction (e.g. laser leakage) is the caller's responsibility
throughout.

Visibility corrections: the central coincidence peak of the five-peak
two-photon interference histogram follows

    A3 ~ (R^3 T + R T^3)(1 + 2 g2) - 2 c R^2 T^2 V,

with R, T the splitter coefficients, g2 the multiphoton correlation of the
source, and c the fringe contrast of the interferometer as measured with a
classical reference (the ``1 - epsilon`` of :class:`HomCorrectionParams`);
the measured contrast enters the interference term directly.  The
normalization-based correction divides the measured raw visibility by the
raw visibility an ideal (V = 1) source would give under the same apparatus;
the single-formula correction inverts the co-polarized peak-area ratio
A3 / (A2 + A4) instead.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

__all__ = [
    "SampledCurve",
    "FitResult",
    "FitFailure",
    "ResolutionError",
    "IllConditionedFit",
    "HomCorrectionParams",
    "HomPeakAreas",
    "VisibilityResult",
    "convolve_irf",
    "fit_exponential_recovery",
    "naive_decay_fit",
    "fit_rrs_curve",
    "decompose_fp_spectrum",
    "fit_hom_peaks",
    "raw_visibility",
    "hom_peak_areas_model",
    "ideal_raw_visibility",
    "corrected_visibility_santori",
    "corrected_visibility_somaschi",
    "mollow_calibration",
]


class FitFailure(RuntimeError):
    """Nonlinear fit did not converge; carries the last residual norm."""

    def __init__(self, message: str, residual_norm: float = math.nan):
        super().__init__(message)
        self.residual_norm = residual_norm


class ResolutionError(ValueError):
    """Sampling grid too coarse for the requested kernel."""


class IllConditionedFit(RuntimeError):
    """Data do not constrain the model parameters."""


class ConfigurationError(ValueError):
    """Correction parameters give no usable ideal reference."""


@dataclass
class SampledCurve:
    """A sampled 1-d dataset with optional per-point errors."""

    x: np.ndarray
    y: np.ndarray
    y_err: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.ndim != 1 or self.x.shape != self.y.shape:
            raise ValueError("x and y must be 1-d arrays of equal length")
        if np.any(np.diff(self.x) <= 0):
            raise ValueError("x grid must be strictly increasing")
        if self.y_err is not None:
            self.y_err = np.asarray(self.y_err, dtype=float)
            if self.y_err.shape != self.y.shape:
                raise ValueError("y_err length must match y")

    def __len__(self) -> int:
        return self.x.size


@dataclass
class FitResult:
    values: dict[str, float]
    errors: dict[str, float]
    reduced_chi2: float
    residual_norm: float

    def __getitem__(self, key: str) -> float:
        return self.values[key]


def _curve_fit(model, x, y, p0, sigma=None, bounds=(-np.inf, np.inf), starts=None):
    """curve_fit wrapper: chi2-scaled errors, multi-start on failure."""
    attempts = [p0] + list(starts or [])
    last_err = None
    for start in attempts:
        try:
            popt, pcov = curve_fit(model, x, y, p0=start, sigma=sigma,
                                   absolute_sigma=False, bounds=bounds, maxfev=20000,
                                   ftol=1e-12, xtol=1e-12, gtol=1e-12)
        except (RuntimeError, ValueError) as exc:
            last_err = exc
            continue
        if np.all(np.isfinite(popt)) and np.all(np.isfinite(np.diag(pcov))):
            return popt, pcov
        last_err = IllConditionedFit("covariance is singular")
    resid = math.nan
    try:
        resid = float(np.linalg.norm(y - model(x, *p0)))
    except Exception:
        pass
    if isinstance(last_err, IllConditionedFit):
        raise last_err
    raise FitFailure(f"fit did not converge: {last_err}", residual_norm=resid)


def _reduced_chi2(model, popt, x, y, sigma):
    dof = max(x.size - popt.size, 1)
    if sigma is None:
        sigma = np.ones_like(y)
    return float(np.sum(((y - model(x, *popt)) / sigma) ** 2) / dof)


def convolve_irf(curve: SampledCurve, irf_fwhm: float) -> SampledCurve:
    """Convolve a sampled curve with a unit-area Gaussian detector response.

    Requires at least 8 samples per FWHM; non-uniform grids are resampled
    internally.  The signal is treated as zero outside its grid, so curves
    should decay to ~0 near the edges for the total area to be preserved.
    """
    if irf_fwhm <= 0:
        raise ValueError("IRF FWHM must be positive")
    x, y = curve.x, curve.y
    dxs = np.diff(x)
    if not np.allclose(dxs, dxs[0], rtol=1e-6, atol=0.0):
        x = np.linspace(x[0], x[-1], x.size)
        y = np.interp(x, curve.x, curve.y)
    dx = x[1] - x[0]
    if irf_fwhm / dx < 8.0:
        raise ResolutionError(
            f"only {irf_fwhm / dx:.1f} points per FWHM; need at least 8"
        )
    sigma = irf_fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    half = int(math.ceil(5.0 * sigma / dx))
    kt = np.arange(-half, half + 1) * dx
    kernel = np.exp(-0.5 * (kt / sigma) ** 2)
    kernel /= kernel.sum()
    return SampledCurve(x=x, y=np.convolve(y, kernel, mode="same"))


def fit_exponential_recovery(curve: SampledCurve, fit_offset: bool = False) -> FitResult:
    """Fit the saturation recovery A (1 - exp(-x/T1)).

    With ``fit_offset`` the model gains a time offset,
    A (1 - exp(-(x - t0)/T1)); use it when the x = 0 point is not a sharp
    reset (finite pulse duration shifts the effective origin and otherwise
    biases T1 upward).
    """
    if len(curve) < 5:
        raise ValueError("need at least 5 points")
    if np.any(curve.y < 0):
        raise ValueError("recovery data must be nonnegative")
    amp0 = float(curve.y.max())
    half = amp0 * 0.63
    above = curve.x[curve.y >= half]
    t10 = float(above[0]) if above.size else float(np.median(curve.x))
    t10 = max(t10, 1e-6)

    if fit_offset:
        model = lambda x, a, t1, t0: a * (1.0 - np.exp(-(x - t0) / t1))
        p0 = (amp0, t10, 0.0)
        names = ("amplitude", "t1", "t_offset")
    else:
        model = lambda x, a, t1: a * (1.0 - np.exp(-x / t1))
        p0 = (amp0, t10)
        names = ("amplitude", "t1")
    starts = [(amp0, f * t10) + ((0.0,) if fit_offset else ()) for f in (0.2, 0.5, 2.0, 5.0)]
    popt, pcov = _curve_fit(model, curve.x, curve.y, p0, sigma=curve.y_err, starts=starts)
    errs = np.sqrt(np.diag(pcov))
    return FitResult(values=dict(zip(names, popt)), errors=dict(zip(names, errs)),
                     reduced_chi2=_reduced_chi2(model, popt, curve.x, curve.y, curve.y_err),
                     residual_norm=float(np.linalg.norm(curve.y - model(curve.x, *popt))))


def naive_decay_fit(curve: SampledCurve) -> FitResult:
    """Apparent lifetime from a plain single-exponential fit, no deconvolution.

    Fits A exp(-t/tau) from the curve maximum down to 20% of the maximum,
    the range a by-eye lifetime fit targets.  When the detector response is
    comparable to the true decay this overestimates the lifetime.
    """
    ipk = int(np.argmax(curve.y))
    peak = curve.y[ipk]
    sel = np.zeros(len(curve), dtype=bool)
    sel[ipk:] = curve.y[ipk:] >= 0.2 * peak
    x, y = curve.x[sel], curve.y[sel]
    if x.size < 5:
        raise ValueError("fewer than 5 points between the maximum and 20% of it")
    model = lambda t, a, tau: a * np.exp(-(t - x[0]) / tau)
    tau0 = max((x[-1] - x[0]) / 1.6, 1e-6)
    popt, pcov = _curve_fit(model, x, y, (peak, tau0))
    errs = np.sqrt(np.diag(pcov))
    return FitResult(values={"amplitude": popt[0], "tau": popt[1]},
                     errors={"amplitude": errs[0], "tau": errs[1]},
                     reduced_chi2=_reduced_chi2(model, popt, x, y, None),
                     residual_norm=float(np.linalg.norm(y - model(x, *popt))))


def rrs_fraction_model(omega, t1, t2):
    """Coherent-scatter fraction versus Rabi frequency (rad/ps)."""
    return (t2 / (2.0 * t1)) / (1.0 + omega**2 * t1 * t2)


def fit_rrs_curve(curve: SampledCurve) -> FitResult:
    """Two-parameter fit {T1, T2} of the coherent-fraction saturation curve.

    The weak-driving plateau pins T2/(2 T1) and the knee position pins
    1/(T1 T2), so data must span the knee.
    """
    if len(curve) < 4:
        raise ValueError("need at least 4 points spanning the knee")
    spread = curve.y.max() - curve.y.min()
    if spread < 0.02 * curve.y.max():
        raise IllConditionedFit("curve is flat; T1 and T2 are degenerate")
    plateau = float(np.clip(curve.y.max(), 1e-6, 1.0))
    # knee: point closest to half the plateau
    knee = float(curve.x[int(np.argmin(np.abs(curve.y - 0.5 * plateau)))])
    knee = max(knee, 1e-9)
    t2_0 = math.sqrt(2.0 * plateau) / knee
    t1_0 = t2_0 / (2.0 * plateau)
    starts = [(t1_0 * f, t2_0 * f) for f in (0.3, 3.0)]
    popt, pcov = _curve_fit(rrs_fraction_model, curve.x, curve.y, (t1_0, t2_0),
                            sigma=curve.y_err, bounds=(0.0, np.inf), starts=starts)
    errs = np.sqrt(np.diag(pcov))
    if not np.all(np.isfinite(errs)) or np.any(errs > 100 * np.abs(popt)):
        raise IllConditionedFit("fit parameters unconstrained by the data")
    return FitResult(values={"t1": popt[0], "t2": popt[1]},
                     errors={"t1": errs[0], "t2": errs[1]},
                     reduced_chi2=_reduced_chi2(rrs_fraction_model, popt, curve.x,
                                                curve.y, curve.y_err),
                     residual_norm=float(np.linalg.norm(curve.y - rrs_fraction_model(curve.x, *popt))))


@dataclass
class FpDecomposition:
    rrs_area: float
    se_area: float
    se_fwhm: float
    rrs_fraction: float
    errors: dict[str, float]
    constrained: bool
    weak_se: bool


def _gaussian_area(x, area, center, fwhm):
    sigma = fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    return area * np.exp(-0.5 * ((x - center) / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))


def _lorentzian_area(x, area, center, fwhm):
    return (2.0 * area / (math.pi * fwhm)) / (1.0 + 4.0 * ((x - center) / fwhm) ** 2)


def decompose_fp_spectrum(spectrum: SampledCurve, irf_width: float,
                          se_fwhm_constraint: float | None = None) -> FpDecomposition:
    """Split a high-resolution spectrum into coherent and incoherent parts.

    The sub-resolution coherent component is a Gaussian at the instrument
    width ``irf_width``; the spontaneous-emission pedestal is a Lorentzian
    with free width unless ``se_fwhm_constraint`` fixes it (advisable when
    the pedestal is weak, e.g. taken from a higher-power spectrum).
    Returned areas are nonnegative by construction.
    """
    x, y = spectrum.x, spectrum.y
    span = x[-1] - x[0]
    amp0 = float(np.trapezoid(y, x))
    c0 = float(x[int(np.argmax(y))])

    if se_fwhm_constraint is not None:
        def model(xx, a_g, a_l, center):
            return (_gaussian_area(xx, a_g, center, irf_width)
                    + _lorentzian_area(xx, a_l, center, se_fwhm_constraint))
        p0 = (0.8 * amp0, 0.2 * amp0, c0)
        lo, hi = (0.0, 0.0, x[0]), (np.inf, np.inf, x[-1])
    else:
        def model(xx, a_g, a_l, center, w_l):
            return (_gaussian_area(xx, a_g, center, irf_width)
                    + _lorentzian_area(xx, a_l, center, w_l))
        p0 = (0.8 * amp0, 0.2 * amp0, c0, max(5.0 * irf_width, 0.1 * span))
        lo, hi = (0.0, 0.0, x[0], irf_width), (np.inf, np.inf, x[-1], np.inf)

    popt, pcov = _curve_fit(model, x, y, p0, sigma=spectrum.y_err, bounds=(lo, hi))
    errs = np.sqrt(np.diag(pcov))
    a_g, a_l = float(popt[0]), float(popt[1])
    total = a_g + a_l
    if total <= 0:
        raise FitFailure("decomposition found no spectral weight")
    fwhm = float(se_fwhm_constraint if se_fwhm_constraint is not None else popt[3])
    weak = a_l < 0.05 * total and se_fwhm_constraint is None
    if weak:
        warnings.warn("SE pedestal below 5% of total; constrain its linewidth "
                      "with a higher-power measurement", stacklevel=2)
    names = ["rrs_area", "se_area", "center"] + ([] if se_fwhm_constraint else ["se_fwhm"])
    return FpDecomposition(rrs_area=a_g, se_area=a_l, se_fwhm=fwhm,
                           rrs_fraction=a_g / total,
                           errors=dict(zip(names, errs)),
                           constrained=se_fwhm_constraint is not None,
                           weak_se=weak)


@dataclass
class HomPeakAreas:
    """Areas A1..A5 of the five coincidence peaks around zero delay."""

    areas: np.ndarray
    errors: np.ndarray | None = None
    center_offset: float = 0.0
    degenerate: bool = False

    def __post_init__(self):
        self.areas = np.asarray(self.areas, dtype=float)
        if self.areas.shape != (5,):
            raise ValueError("expected exactly five peak areas")
        if np.any(self.areas < 0):
            raise ValueError("peak areas must be nonnegative")
        if self.errors is not None:
            self.errors = np.asarray(self.errors, dtype=float)

    @property
    def a3(self) -> float:
        return float(self.areas[2])

    @property
    def side_sum(self) -> float:
        """A2 + A4."""
        return float(self.areas[1] + self.areas[3])


def fit_hom_peaks(histogram: SampledCurve, irf_fwhm: float,
                  peak_spacing: float) -> HomPeakAreas:
    """Simultaneous five-Gaussian fit of a coincidence histogram.

    Peak widths are fixed to the detector response ``irf_fwhm`` (valid when
    the response dominates the emitter decay); free parameters are the five
    areas and a common center offset.  Peaks separated by less than 1.5
    response widths are flagged as degenerate.
    """
    if peak_spacing <= irf_fwhm:
        raise ValueError("peaks are unresolvable: spacing must exceed the IRF FWHM")
    degenerate = peak_spacing < 1.5 * irf_fwhm

    def model(t, a1, a2, a3, a4, a5, t0):
        out = np.zeros_like(t)
        for k, area in enumerate((a1, a2, a3, a4, a5)):
            out += _gaussian_area(t, area, t0 + (k - 2) * peak_spacing, irf_fwhm)
        return out

    dx = np.median(np.diff(histogram.x))
    # per-window integrals make good area starting points
    p0_areas = []
    for k in range(5):
        center = (k - 2) * peak_spacing
        win = np.abs(histogram.x - center) <= peak_spacing / 2.0
        p0_areas.append(max(float(np.sum(histogram.y[win]) * dx), 0.0))
    p0 = (*p0_areas, 0.0)
    lo = (0.0,) * 5 + (-peak_spacing / 2.0,)
    hi = (np.inf,) * 5 + (peak_spacing / 2.0,)
    popt, pcov = _curve_fit(model, histogram.x, histogram.y, p0,
                            sigma=histogram.y_err, bounds=(lo, hi))
    errs = np.sqrt(np.diag(pcov))
    return HomPeakAreas(areas=popt[:5], errors=errs[:5],
                        center_offset=float(popt[5]), degenerate=degenerate)


def raw_visibility(a3_cross: float, a3_co: float,
                   err_cross: float = 0.0, err_co: float = 0.0) -> tuple[float, float]:
    """Raw interference visibility (A3_cross - A3_co) / A3_cross."""
    if a3_cross <= 0:
        raise ValueError("cross-polarized area must be positive")
    v = (a3_cross - a3_co) / a3_cross
    ratio = a3_co / a3_cross
    rel = 0.0
    if a3_co > 0:
        rel = math.hypot(err_co / a3_co, err_cross / a3_cross)
    return v, abs(ratio) * rel


@dataclass(frozen=True)
class HomCorrectionParams:
    """Apparatus imperfections entering the visibility correction:
    source multiphoton g2(0), fringe-contrast deficit epsilon = 1 - contrast
    and the splitter reflectance/transmittance."""

    g2: float
    epsilon: float
    r: float
    t: float

    def __post_init__(self):
        if self.g2 < 0:
            raise ValueError("g2 must be nonnegative")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        if abs(self.r + self.t - 1.0) > 1e-3:
            raise ValueError(f"R + T = {self.r + self.t} deviates from 1 beyond 1e-3")

    @property
    def contrast(self) -> float:
        return 1.0 - self.epsilon


@dataclass(frozen=True)
class VisibilityResult:
    value: float
    error: float
    saturated: bool  # True when noise pushed the corrected value past 1


VISIBILITY_SATURATION_TOL = 1e-9


def hom_peak_areas_model(v: float, params: HomCorrectionParams,
                         scale: float = 1.0) -> HomPeakAreas:
    """Co-polarized five-peak areas for true two-photon visibility ``v``.

    Peak pattern for a pulse pair separated by the interferometer delay:
    [R^3 T, RT(R^2+T^2)(1+g2), central, RT(R^2+T^2)(1+g2), R T^3], with the
    central peak RT(R^2+T^2)(1+2 g2) - 2 R^2 T^2 c V; same-pulse multiphoton
    coincidences feed the side peaks at half the weight of the central one.
    """
    r, t, g2 = params.r, params.t, params.g2
    u = r * t * (r**2 + t**2)
    a3 = u * (1.0 + 2.0 * g2) - 2.0 * r**2 * t**2 * params.contrast * v
    side = u * (1.0 + g2)
    areas = scale * np.array([r**3 * t, side, a3, side, r * t**3])
    return HomPeakAreas(areas=areas)


def ideal_raw_visibility(params: HomCorrectionParams) -> float:
    """Raw visibility an ideal (V = 1) source would show on this apparatus."""
    denom = (params.r**2 + params.t**2) * (1.0 + 2.0 * params.g2)
    v_ideal = 2.0 * params.contrast * params.r * params.t / denom
    if v_ideal <= 0:
        raise ConfigurationError("apparatus parameters give no interference contrast")
    return v_ideal


def corrected_visibility_santori(a3_co: float, a3_cross: float,
                                 params: HomCorrectionParams,
                                 err_co: float = 0.0,
                                 err_cross: float = 0.0) -> VisibilityResult:
    """Normalization correction of the measured raw visibility.

    Divides the measured raw visibility by the raw visibility of a
    perfectly indistinguishable source under the same g2, fringe contrast
    and splitter asymmetry.  Values beyond 1 are flagged, never clipped.
    """
    raw, raw_err = raw_visibility(a3_cross, a3_co, err_cross, err_co)
    v_ideal = ideal_raw_visibility(params)
    value = raw / v_ideal
    return VisibilityResult(value=value, error=raw_err / v_ideal,
                            saturated=value > 1.0 + VISIBILITY_SATURATION_TOL)


def corrected_visibility_somaschi(areas: HomPeakAreas,
                                  params: HomCorrectionParams) -> VisibilityResult:
    """Single-formula correction from the co-polarized peak areas.

    V = 1/c * [2 g2 + (R^2+T^2)/(2RT)
               - A3/(A2+A4) * (2 + g2 (R^2+T^2)/(RT))].
    """
    if areas.side_sum <= 0:
        raise ValueError("side peaks A2 + A4 must be positive")
    r, t, g2 = params.r, params.t, params.g2
    sym = (r**2 + t**2) / (2.0 * r * t)
    ratio = areas.a3 / areas.side_sum
    value = (2.0 * g2 + sym - ratio * (2.0 + 2.0 * g2 * sym)) / params.contrast
    err = 0.0
    if areas.errors is not None:
        d_ratio = ratio * math.hypot(
            areas.errors[2] / areas.a3 if areas.a3 > 0 else 0.0,
            math.hypot(areas.errors[1], areas.errors[3]) / areas.side_sum,
        )
        err = d_ratio * (2.0 + 2.0 * g2 * sym) / params.contrast
    return VisibilityResult(value=value, error=err,
                            saturated=value > 1.0 + VISIBILITY_SATURATION_TOL)


@dataclass
class MollowCalibration:
    """Power-to-Rabi-frequency conversion from Mollow splittings.

    ``slope`` converts power to Omega^2 (rad/ps)^2 per power unit;
    ``damping_offset`` estimates (gamma1 - gamma2)^2 / 4.
    """

    slope: float
    damping_offset: float
    n_points: int

    def omega_of_power(self, power) -> np.ndarray:
        return np.sqrt(self.slope * np.asarray(power, dtype=float))


def mollow_calibration(powers, splittings) -> MollowCalibration:
    """Linear fit of squared splitting versus power.

    The splitting is the damped Rabi frequency, so Omega_d^2 = s P - d with
    d the damping offset; the undamped Omega^2 = s P passes through the
    origin.  Sub-threshold points (None or NaN splitting) are dropped.
    """
    powers = np.asarray(powers, dtype=float)
    spl = np.array([math.nan if s is None else float(s) for s in splittings])
    if powers.shape != spl.shape:
        raise ValueError("powers and splittings must have equal length")
    ok = np.isfinite(spl) & np.isfinite(powers)
    if ok.sum() < 3:
        raise ValueError("need at least 3 points above the damping threshold")
    slope, intercept = np.polyfit(powers[ok], spl[ok] ** 2, 1)
    if slope <= 0:
        raise ValueError(f"fitted slope {slope:.3e} is not positive")
    return MollowCalibration(slope=float(slope), damping_offset=float(-intercept),
                             n_points=int(ok.sum()))
