"""Named end-to-end runs that tie simulation and analysis together.

Each scenario consumes a :class:`ScenarioConfig`, writes machine-readable
curve files (CSV by default) plus a JSON report, and returns a
:class:`ScenarioReport` whose headline numbers carry their targets and a
pass/fail verdict where a quantitative expectation exists.  Outputs are
deterministic for a fixed seed: data files are byte-identical between runs.
"""

import json
import math
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis, cavityqed, dynamics, trajectories
from .analysis import HomCorrectionParams, SampledCurve
from .dynamics import DriveField, GaussianPulse, SystemParams, SystemSpace

__all__ = ["ScenarioConfig", "ScenarioReport", "Headline", "SCENARIOS",
           "run_scenario", "scenario_names"]


@dataclass
class ScenarioConfig:
    """Validated inputs of one scenario run."""

    scenario: str
    seed: int = 0
    output_dir: Path = Path("purcellsim-out")
    file_format: str = "csv"
    jobs: int = 1
    system: dict = field(default_factory=dict)
    drive: dict = field(default_factory=dict)
    trajectories: dict = field(default_factory=dict)
    cavity: dict = field(default_factory=dict)
    visibility: dict = field(default_factory=dict)
    budget: dict = field(default_factory=dict)

    def __post_init__(self):
        self.output_dir = Path(self.output_dir)
        if self.file_format not in ("csv", "json"):
            raise ValueError(f"unknown output format {self.file_format!r}")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")


@dataclass
class Headline:
    """One reported number, optionally checked against a target."""

    name: str
    value: float
    error: float | None = None
    unit: str = ""
    target: float | None = None
    tolerance: float | None = None
    passed: bool | None = None

    def __post_init__(self):
        self.value = float(self.value)
        if self.error is not None:
            self.error = float(self.error)

    def check(self) -> "Headline":
        if self.target is not None and self.tolerance is not None:
            self.passed = bool(abs(self.value - self.target) <= self.tolerance)
        return self


@dataclass
class ScenarioReport:
    scenario: str
    seed: int
    version: str
    inputs: dict
    headlines: list[Headline]
    files: list[str]
    duration_s: float

    @property
    def all_passed(self) -> bool:
        return all(h.passed is not False for h in self.headlines)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "version": self.version,
            "inputs": self.inputs,
            "headlines": [asdict(h) for h in self.headlines],
            "files": self.files,
            "duration_s": self.duration_s,
            "all_passed": self.all_passed,
        }


def _write_table(cfg: ScenarioConfig, name: str, columns: dict[str, np.ndarray]) -> str:
    """Write a data table deterministically; returns the file path."""
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    arrays = {k: np.asarray(v) for k, v in columns.items()}
    n = len(next(iter(arrays.values())))
    if cfg.file_format == "json":
        path = cfg.output_dir / f"{name}.json"
        payload = {
            "version": __version__, "scenario": cfg.scenario, "seed": cfg.seed,
            "columns": {k: [float(x) for x in v] for k, v in arrays.items()},
        }
        path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
        return str(path)
    path = cfg.output_dir / f"{name}.csv"
    lines = [f"# purcellsim {__version__}",
             f"# scenario = {cfg.scenario}",
             f"# seed = {cfg.seed}",
             ",".join(arrays)]
    for i in range(n):
        lines.append(",".join(f"{arrays[k][i]:.10g}" for k in arrays))
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def _build_params(cfg: ScenarioConfig) -> SystemParams:
    s = cfg.system
    t1f = s.get("t1f_ps")
    levels = 3 if t1f else 2
    space = SystemSpace(emitter_levels=levels, fock_cutoff=int(s.get("fock_cutoff", 2)))
    return SystemParams.from_linewidths(
        hbar_g_uev=s.get("hbar_g_uev", 135.0),
        hbar_2kappa_uev=s.get("hbar_2kappa_uev", 2510.0),
        t1_prime_ps=s.get("t1_prime_ps", 971.0),
        delta_al=dynamics.uev_to_rad_per_ps(s.get("delta_al_uev", 0.0)),
        delta_cl=dynamics.uev_to_rad_per_ps(s.get("delta_cl_uev", 0.0)),
        relax_t1f_ps=t1f,
        t2_star_ps=s.get("t2_star_ps"),
        space=space,
    )


def _build_design(cfg: ScenarioConfig) -> cavityqed.CavityDesign:
    c = cfg.cavity
    return cavityqed.CavityDesign(
        q_factor=c.get("q_factor", 540.0),
        mode_volume=c.get("mode_volume", 0.63),
        overlap_field=c.get("overlap_field", 0.81),
        photon_energy_ev=c.get("photon_energy_ev", 1.354),
        linewidth_2kappa_uev=c.get("hbar_2kappa_uev", 2510.0),
        refractive_index=c.get("refractive_index", cavityqed.DEFAULT_REFRACTIVE_INDEX),
    )


def _traj_config(cfg: ScenarioConfig, **overrides) -> trajectories.TrajectoryConfig:
    t = dict(cfg.trajectories)
    t.setdefault("master_seed", cfg.seed)
    t.setdefault("n_jobs", cfg.jobs)
    t.update(overrides)
    return trajectories.TrajectoryConfig(**t)


# --------------------------------------------------------------------------
# scenario implementations


def _scenario_purcell_detuning(cfg: ScenarioConfig):
    design = _build_design(cfg)
    emitter = cavityqed.EmitterConstants(t1_prime_ps=cfg.system.get("t1_prime_ps", 971.0))
    detuning = np.linspace(-1500.0, 1500.0, 301)
    f_p = np.array([cavityqed.purcell_factor(design, d) for d in detuning])
    t1 = emitter.t1_prime_ps / f_p
    files = [_write_table(cfg, "purcell_vs_detuning",
                          {"detuning_uev": detuning, "purcell_factor": f_p, "t1_ps": t1})]
    window = detuning[t1 <= 30.0]
    headlines = [
        Headline("t1_at_zero_detuning", float(emitter.t1_prime_ps / cavityqed.purcell_factor(design)),
                 unit="ps", target=22.7, tolerance=0.7).check(),
        Headline("purcell_at_zero_detuning", float(cavityqed.purcell_factor(design)),
                 target=43.0, tolerance=2.0).check(),
        Headline("tuning_window_below_30ps", float(window[-1] - window[0]) if window.size else 0.0,
                 unit="ueV", target=1400.0, tolerance=200.0).check(),
    ]
    inputs = {"design": asdict(design), "t1_prime_ps": emitter.t1_prime_ps}
    return headlines, files, inputs


def _scenario_pl_decay_irf(cfg: ScenarioConfig):
    irf_fwhm = cfg.drive.get("irf_fwhm_ps", 60.0)
    t1 = cfg.system.get("t1_ps", 22.7)
    t = np.arange(-300.0, 600.0, 1.0)
    decay = np.where(t >= 0.0, np.exp(-t / t1), 0.0)
    convolved = analysis.convolve_irf(SampledCurve(t, decay), irf_fwhm)
    fit = analysis.naive_decay_fit(convolved)
    files = [_write_table(cfg, "pl_decay_irf",
                          {"time_ps": convolved.x, "signal": convolved.y})]
    headlines = [
        Headline("apparent_decay_no_deconvolution", fit["tau"], fit.errors["tau"],
                 unit="ps", target=46.2, tolerance=0.15 * 46.2).check(),
        Headline("true_decay_input", t1, unit="ps"),
    ]
    return headlines, files, {"t1_ps": t1, "irf_fwhm_ps": irf_fwhm}


def _scenario_rabi(cfg: ScenarioConfig):
    params = _build_params(cfg)
    t_p = cfg.drive.get("t_p_ps", 13.0)
    areas = np.linspace(0.0, 3.0, 31) * math.pi
    scan = dynamics.rabi_scan(params, t_p, areas[1:])
    cal = dynamics.calibrate_pi_pulse(params, t_p)
    files = [_write_table(cfg, "rabi",
                          {"area_rad": np.concatenate([[0.0], scan.areas]),
                           "emitted_photons": np.concatenate([[0.0], scan.emitted])})]
    headlines = [
        Headline("calibrated_pi_area", cal.area, unit="rad"),
        Headline("calibrated_pi_area_over_pi", cal.area / math.pi),
        Headline("emission_at_pi_area", cal.emitted_per_pulse, unit="photons"),
    ]
    return headlines, files, {"t_p_ps": t_p}


def _scenario_dprf(cfg: ScenarioConfig):
    params = _build_params(cfg)
    t_p = cfg.drive.get("t_p_ps", 13.0)
    t1_eff = dynamics.effective_t1(params)
    grid = np.unique(np.concatenate([
        np.linspace(3.0 * t_p + 1.0, 8.0 * t1_eff, 14),
        [5.0 * t1_eff],
    ]))
    scan = dynamics.dprf_scan(params, t_p, grid)
    fit = analysis.fit_exponential_recovery(
        SampledCurve(scan.delta_t, scan.intensity), fit_offset=True)
    files = [_write_table(cfg, "dprf",
                          {"delta_t_ps": scan.delta_t, "intensity": scan.intensity})]
    rel = abs(fit["t1"] - t1_eff) / t1_eff
    headlines = [
        Headline("t1_fitted", fit["t1"], fit.errors["t1"], unit="ps",
                 target=t1_eff, tolerance=0.03 * t1_eff).check(),
        Headline("t1_effective_input", t1_eff, unit="ps"),
        Headline("t1_relative_recovery_error", rel, target=0.0, tolerance=0.03).check(),
        Headline("calibrated_area_over_pi", scan.area / math.pi),
    ]
    return headlines, files, {"t_p_ps": t_p}


def _scenario_rrs(cfg: ScenarioConfig):
    t1 = cfg.system.get("t1_ps", 24.6)
    t2 = cfg.system.get("t2_ps", 49.2)
    noise = cfg.system.get("rrs_noise", 0.02)
    omega = 2.0 * math.pi * np.logspace(math.log10(3.0), math.log10(25.0), 5) / 1000.0
    clean = analysis.rrs_fraction_model(omega, t1, t2)
    rng = np.random.default_rng(cfg.seed)
    y = clean + noise * rng.standard_normal(clean.size)
    curve = SampledCurve(omega, y, y_err=np.full(clean.size, noise))
    fit = analysis.fit_rrs_curve(curve)
    files = [_write_table(cfg, "rrs",
                          {"omega_rad_per_ps": omega, "fraction": y,
                           "fraction_err": curve.y_err})]
    headlines = [
        Headline("t1_fitted", fit["t1"], fit.errors["t1"], unit="ps",
                 target=t1, tolerance=3.0 * max(fit.errors["t1"], 1e-9)).check(),
        Headline("t2_fitted", fit["t2"], fit.errors["t2"], unit="ps",
                 target=t2, tolerance=3.0 * max(fit.errors["t2"], 1e-9)).check(),
        Headline("max_fraction", cavityqed.rrs_max_fraction(t1, t2),
                 target=t2 / (2.0 * t1), tolerance=0.0).check(),
    ]
    return headlines, files, {"t1_ps": t1, "t2_ps": t2, "noise": noise}


def _scenario_g2_pulse_duration(cfg: ScenarioConfig):
    params = _build_params(cfg)
    ratios = cfg.drive.get("tp_over_t1", [0.106, 0.573])
    config = _traj_config(cfg)
    points = trajectories.g2_vs_pulse_duration(params, ratios, config)
    files = [_write_table(cfg, "g2_vs_pulse_duration", {
        "tp_over_t1": np.array([p.tp_over_t1 for p in points]),
        "g2": np.array([p.g2 for p in points]),
        "g2_err": np.array([p.g2_err for p in points]),
    })]
    anchors = {0.573: (0.134, 0.03), 0.106: (0.026, 0.015)}
    headlines = []
    for p in points:
        target = anchors.get(round(p.tp_over_t1, 3))
        h = Headline(f"g2_at_ratio_{p.tp_over_t1:g}", p.g2, p.g2_err,
                     target=target[0] if target else None,
                     tolerance=target[1] if target else None)
        headlines.append(h.check())
    return headlines, files, {"tp_over_t1": list(map(float, ratios)),
                              "n_trajectories": config.n_trajectories}


def _scenario_relaxation(cfg: ScenarioConfig):
    files, headlines = [], []
    # slow filling masks the fast Purcell-enhanced decay
    slow_fill = _build_params(ScenarioConfig(scenario=cfg.scenario, system={
        **cfg.system, "t1f_ps": cfg.system.get("t1f_ps", 100.0)}))
    res_a = dynamics.relaxation_decay(slow_fill)
    files.append(_write_table(cfg, "relaxation_slow_filling", {
        "time_ps": res_a.times, "exciton": res_a.populations["exciton"],
        "filling": res_a.populations["filling"]}))
    headlines.append(Headline("decay_slow_filling", res_a.decay_time_ps, unit="ps",
                              target=slow_fill.relax_t1f_ps,
                              tolerance=0.02 * slow_fill.relax_t1f_ps).check())
    # no cavity enhancement, fast filling: observed decay is the true T1
    bare = SystemParams(g=0.0, kappa=dynamics.uev_to_rad_per_ps(2510.0) / 2.0,
                        gamma1_prime=1.0 / 945.0, relax_t1f_ps=10.0,
                        space=SystemSpace(emitter_levels=3, fock_cutoff=1))
    res_b = dynamics.relaxation_decay(bare)
    files.append(_write_table(cfg, "relaxation_fast_filling", {
        "time_ps": res_b.times, "exciton": res_b.populations["exciton"],
        "filling": res_b.populations["filling"]}))
    headlines.append(Headline("decay_fast_filling", res_b.decay_time_ps, unit="ps",
                              target=945.0, tolerance=0.02 * 945.0).check())
    # resonant reference: filling channel unused
    resonant = _build_params(cfg)
    pulse = GaussianPulse(math.pi, 2.0, 0.0)
    res_c = dynamics.evolve(None, resonant, DriveField(pulses=(pulse,)),
                            (pulse.window()[0], 8.0 * dynamics.effective_t1(resonant)),
                            t_eval=np.linspace(pulse.window()[0],
                                               8.0 * dynamics.effective_t1(resonant), 400))
    files.append(_write_table(cfg, "relaxation_resonant", {
        "time_ps": res_c.times, "exciton": res_c.populations["exciton"]}))
    t1_eff = dynamics.effective_t1(resonant)
    headlines.append(Headline("decay_resonant",
                              dynamics._late_decay_time(res_c.times, res_c.populations["exciton"]),
                              unit="ps", target=t1_eff, tolerance=0.02 * t1_eff).check())
    return headlines, files, {"t1f_ps": slow_fill.relax_t1f_ps}


def _scenario_double_pulse(cfg: ScenarioConfig):
    params = _build_params(cfg)
    t1_eff = dynamics.effective_t1(params)
    t_p = cfg.drive.get("t_p_ps", 0.01 * t1_eff)
    grid = np.unique(np.concatenate([
        np.linspace(0.25 * t1_eff, 4.0 * t1_eff, 6), [1.0 * t1_eff, 5.0 * t1_eff]]))
    config = _traj_config(cfg, jump_channels=cfg.trajectories.get("jump_channels", "all"))
    stats = trajectories.double_pulse_statistics(params, t_p, grid, config)
    files = [_write_table(cfg, "double_pulse_statistics", {
        "delta_tau_ps": np.array([s.delta_tau for s in stats]),
        "p0": np.array([s.p0 for s in stats]),
        "p1": np.array([s.p1 for s in stats]),
        "p2_plus": np.array([s.p2_plus for s in stats]),
        "expected_counts": np.array([s.expected for s in stats]),
    })]
    at5 = min(stats, key=lambda s: abs(s.delta_tau - 5.0 * t1_eff))
    headlines = [
        Headline("p2_at_5t1", at5.p2_plus,
                 error=float(np.sqrt(at5.p2_plus * (1 - at5.p2_plus)
                                     / at5.statistics.n_trajectories)),
                 target=0.993, tolerance=0.005).check(),
        Headline("expected_counts_at_5t1", at5.expected, at5.statistics.std_err,
                 unit="photons"),
    ]
    return headlines, files, {"t_p_ps": t_p,
                              "n_trajectories": config.n_trajectories,
                              "jump_channels": config.jump_channels}


def _scenario_visibility(cfg: ScenarioConfig):
    v = cfg.visibility
    params = HomCorrectionParams(g2=v.get("g2", 0.134), epsilon=v.get("epsilon", 0.032),
                                 r=v.get("r", 0.544), t=v.get("t", 1.0 - v.get("r", 0.544)))
    raw = v.get("raw_visibility", 0.601)
    v_true = v.get("true_visibility", 0.796)
    peak_spacing = v.get("peak_spacing_ps", 2000.0)
    irf = v.get("irf_fwhm_ps", 860.0)

    santori = analysis.corrected_visibility_santori(1.0 - raw, 1.0, params)

    # full pipeline: model areas -> synthetic histogram -> peak fit -> correction
    areas_co = analysis.hom_peak_areas_model(v_true, params, scale=1e4)
    t = np.arange(-2.5 * peak_spacing, 2.5 * peak_spacing + 1.0, peak_spacing / 80.0)
    hist = np.zeros_like(t)
    for k, area in enumerate(areas_co.areas):
        hist += analysis._gaussian_area(t, area, (k - 2) * peak_spacing, irf)
    fitted = analysis.fit_hom_peaks(SampledCurve(t, hist), irf, peak_spacing)
    somaschi = analysis.corrected_visibility_somaschi(fitted, params)
    files = [_write_table(cfg, "hom_histogram_co", {"delay_ps": t, "coincidences": hist})]
    headlines = [
        Headline("corrected_visibility_santori", santori.value, santori.error,
                 target=0.796, tolerance=0.005).check(),
        Headline("corrected_visibility_somaschi", somaschi.value, somaschi.error,
                 target=0.798, tolerance=0.005).check(),
        Headline("raw_visibility_input", raw),
    ]
    inputs = {"params": asdict(params), "raw_visibility": raw, "true_visibility": v_true}
    return headlines, files, inputs


def _scenario_budget(cfg: ScenarioConfig):
    b = cfg.budget
    f_p = b.get("purcell_factor", 43.0)
    eff = cavityqed.coupling_efficiencies(
        q_coupled=b.get("q_coupled", 540.0), q_uncoupled=b.get("q_uncoupled", 1109.0),
        branch_ratio=b.get("branch_ratio", 4.0), purcell=f_p)
    budget = cavityqed.BrightnessBudget(
        rep_rate_hz=b.get("rep_rate_hz", 76.2e6),
        eta_qd_waveguide=b.get("eta_qd_waveguide", round(eff.eta_qd_waveguide, 2)),
        waveguide_length_mm=b.get("waveguide_length_mm", 0.1),
        propagation_loss_db_per_mm=b.get("propagation_loss_db_per_mm", 17.0),
        detector_efficiency=b.get("detector_efficiency", 0.20))
    rate = cavityqed.count_rate_budget(budget)
    fast = cavityqed.count_rate_budget(
        cavityqed.BrightnessBudget(1e10, budget.eta_qd_waveguide,
                                   budget.waveguide_length_mm,
                                   budget.propagation_loss_db_per_mm,
                                   budget.detector_efficiency))
    files = [_write_table(cfg, "budget", {
        "rep_rate_hz": np.array([budget.rep_rate_hz, 1e10]),
        "detected_rate_hz": np.array([rate, fast])})]
    headlines = [
        Headline("eta_cavity_waveguides_total", eff.eta_cavity_waveguides_total,
                 target=0.51, tolerance=0.01).check(),
        Headline("eta_main_waveguide", eff.eta_per_waveguide[0],
                 target=0.41, tolerance=0.01).check(),
        Headline("eta_other_waveguide", eff.eta_per_waveguide[1],
                 target=0.10, tolerance=0.01).check(),
        Headline("beta", eff.beta, target=0.98, tolerance=0.01).check(),
        Headline("eta_qd_waveguide", eff.eta_qd_waveguide,
                 target=0.40, tolerance=0.01).check(),
        Headline("detected_rate", rate, unit="Hz",
                 target=4.1e6, tolerance=0.05 * 4.1e6).check(),
        Headline("detected_rate_10ghz", fast, unit="Hz",
                 target=540e6, tolerance=0.05 * 540e6).check(),
    ]
    return headlines, files, {"budget": asdict(budget), "purcell_factor": f_p}


SCENARIOS = {
    "purcell-detuning": _scenario_purcell_detuning,
    "pl-decay-irf": _scenario_pl_decay_irf,
    "rabi": _scenario_rabi,
    "dprf": _scenario_dprf,
    "rrs": _scenario_rrs,
    "g2-pulse-duration": _scenario_g2_pulse_duration,
    "relaxation": _scenario_relaxation,
    "double-pulse": _scenario_double_pulse,
    "visibility": _scenario_visibility,
    "budget": _scenario_budget,
}


def scenario_names() -> list[str]:
    return sorted(SCENARIOS)


def run_scenario(cfg: ScenarioConfig) -> ScenarioReport:
    """Execute a registered scenario and write its report next to the data."""
    start = time.perf_counter()
    headlines, files, inputs = SCENARIOS[cfg.scenario](cfg)
    report = ScenarioReport(
        scenario=cfg.scenario, seed=cfg.seed, version=__version__,
        inputs=inputs, headlines=headlines, files=files,
        duration_s=time.perf_counter() - start,
    )
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    report_path = cfg.output_dir / f"{cfg.scenario.replace('-', '_')}_report.json"
    report_path.write_text(json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n")
    report.files.append(str(report_path))
    return report
