"""Monte Carlo wavefunction (quantum-jump) unraveling of the master equation.

Each trajectory evolves a pure state under the non-Hermitian effective
Hamiltonian; a jump fires when the squared norm crosses a pre-drawn uniform
threshold, the channel is chosen proportionally to the instantaneous jump
rates, and the state is renormalized.  Counting jumps over many
trajectories yields the per-cycle photon-number distribution P[n], from
which the zero-delay intensity correlation follows as

    g2(0) = sum n (n-1) P[n] / (sum n P[n])^2.

Determinism: trajectory i uses the stream seeded by (master_seed, i), so an
ensemble is bit-identical for any worker count or execution order.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import (
    DriveField,
    GaussianPulse,
    IntegrationError,
    SystemParams,
    calibrate_pi_pulse,
    effective_t1,
    lindblad_generator,
)
__all__ = [
    "TrajectoryConfig",
    "TrajectoryRecord",
    "EnsembleResult",
    "EmissionStatistics",
    "G2Estimate",
    "run_trajectory",
    "simulate_ensemble",
    "emission_statistics",
    "g2_from_distribution",
    "double_pulse_statistics",
    "g2_vs_pulse_duration",
]

#: Decay channels whose jumps correspond to emitted photons.  Jumps of the
#: relaxation and dephasing channels are recorded but are never photons.
PHOTON_CHANNELS = ("emitter", "cavity")


class ZeroMeanError(ValueError):
    """g2 is undefined for a distribution with zero mean."""


@dataclass(frozen=True)
class TrajectoryConfig:
    """Ensemble settings.

    ``jump_channels`` selects which decay channels count as detected
    emission: "cavity" (default; what the waveguide collects), "emitter"
    (nonguided modes) or "all" (every photon channel).  ``n_jobs`` workers
    produce identical output to a serial run.
    """

    n_trajectories: int = 10_000
    master_seed: int = 0
    jump_channels: str = "cavity"
    t_span: tuple[float, float] = (0.0, 300.0)
    rtol: float = 1e-6
    n_jobs: int = 1
    sample_times: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ValueError("need at least one trajectory")
        if self.jump_channels not in ("cavity", "emitter", "all"):
            raise ValueError(f"unknown jump_channels {self.jump_channels!r}")

    def counted_channels(self) -> tuple[str, ...]:
        if self.jump_channels == "all":
            return PHOTON_CHANNELS
        return (self.jump_channels,)


@dataclass
class TrajectoryRecord:
    """Jump times per channel for one trajectory, plus optional sampled
    excited-state populations."""

    index: int
    jumps: tuple[tuple[float, str], ...]
    populations: np.ndarray | None = None

    def count(self, channels=PHOTON_CHANNELS) -> int:
        return sum(1 for _, ch in self.jumps if ch in channels)


def _trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    # splittable counter-based derivation: stream i = SeedSequence((seed, i))
    return np.random.default_rng(np.random.SeedSequence((master_seed, index)))


def run_trajectory(params: SystemParams, drive: DriveField, seed,
                   t_span: tuple[float, float], rtol: float = 1e-6,
                   sample_times: np.ndarray | None = None,
                   index: int = 0) -> TrajectoryRecord:
    """Propagate one quantum trajectory; deterministic for a given seed.

    ``seed`` may be an integer, a ``SeedSequence`` or a ``Generator``.
    """
    if isinstance(seed, np.random.Generator):
        rng = seed
    else:
        rng = np.random.default_rng(seed)
    gen = lindblad_generator(params, drive)
    channels = [ch for ch, _ in gen.collapse]
    l_ops = [l for _, l in gen.collapse]
    ldl = [l.conj().T @ l for l in l_ops]
    h_static_nh = gen.h_static - 0.5j * gen.anticomm
    raise_op, lower_op = gen.raise_op, gen.lower_op
    envelope = drive.envelope
    exc = gen.ops.excited_projector

    def rhs(t, y):
        e = envelope(t)
        h = h_static_nh
        if e != 0.0:
            h = h + e * raise_op + np.conj(e) * lower_op
        return -1j * (h @ y)

    t0, t1 = map(float, t_span)
    psi = np.zeros(params.space.total_dim, dtype=complex)
    psi[0] = 1.0
    threshold = rng.random()

    sample = None
    if sample_times is not None:
        sample_times = np.asarray(sample_times, dtype=float)
        sample = np.full(sample_times.shape, np.nan)

    jumps: list[tuple[float, str]] = []
    segments = drive.breakpoints((t0, t1))
    seg_idx = 0
    t = t0
    while seg_idx < len(segments) - 1:
        seg_end = segments[seg_idx + 1]
        if t >= seg_end:
            seg_idx += 1
            continue

        def norm_event(tt, y, thr=threshold):
            return (y.conj() @ y).real - thr

        norm_event.terminal = True
        norm_event.direction = -1
        sol = solve_ivp(rhs, (t, seg_end), psi, method="DOP853",
                        rtol=rtol, atol=rtol * 1e-4,
                        dense_output=sample_times is not None,
                        events=norm_event, max_step=drive.max_step_in(t, seg_end))
        if not sol.success:
            raise IntegrationError(f"trajectory integration failed: {sol.message}",
                                   time=float(sol.t[-1]))
        if sample is not None:
            t_stop = sol.t_events[0][0] if sol.t_events[0].size else seg_end
            idx = np.nonzero((sample_times >= t) & (sample_times <= t_stop))[0]
            for k in idx:
                y = sol.sol(sample_times[k])
                nrm = (y.conj() @ y).real
                sample[k] = (y.conj() @ (exc @ y)).real / nrm
        if sol.t_events[0].size:
            tj = float(sol.t_events[0][0])
            psi = sol.y_events[0][0]
            rates = np.array([(psi.conj() @ (m @ psi)).real for m in ldl])
            total = rates.sum()
            pick = rng.random() * total
            ch = int(np.searchsorted(np.cumsum(rates), pick))
            ch = min(ch, len(channels) - 1)
            psi = l_ops[ch] @ psi
            psi = psi / np.linalg.norm(psi)
            jumps.append((tj, channels[ch]))
            t = tj
            threshold = rng.random()
        else:
            psi = sol.y[:, -1]
            t = seg_end
            seg_idx += 1
    return TrajectoryRecord(index=index, jumps=tuple(jumps), populations=sample)


def _run_chunk(args):
    params, drive, t_span, rtol, master_seed, indices, sample_times = args
    out = []
    for i in indices:
        rec = run_trajectory(params, drive, _trajectory_rng(master_seed, i),
                             t_span, rtol=rtol, sample_times=sample_times, index=i)
        out.append(rec)
    return out


@dataclass
class EnsembleResult:
    records: list[TrajectoryRecord]
    config: TrajectoryConfig

    def counts(self, channels=None) -> np.ndarray:
        channels = channels or self.config.counted_channels()
        return np.array([r.count(channels) for r in self.records], dtype=int)

    def statistics(self, channels=None) -> "EmissionStatistics":
        return emission_statistics(self.counts(channels))

    def mean_population(self) -> tuple[np.ndarray, np.ndarray]:
        """Ensemble mean excited-state population and its standard error on
        the configured sample grid."""
        pops = np.array([r.populations for r in self.records])
        mean = pops.mean(axis=0)
        se = pops.std(axis=0, ddof=1) / math.sqrt(len(self.records))
        return mean, se


def simulate_ensemble(params: SystemParams, drive: DriveField,
                      config: TrajectoryConfig) -> EnsembleResult:
    """Run the configured trajectory ensemble.

    The per-index seed derivation makes the result independent of the
    execution schedule: chunked parallel runs merge back in index order.
    """
    sample_times = None
    if config.sample_times is not None:
        sample_times = np.asarray(config.sample_times, dtype=float)
    indices = np.arange(config.n_trajectories)
    if config.n_jobs <= 1:
        records = _run_chunk((params, drive, config.t_span, config.rtol,
                              config.master_seed, indices, sample_times))
    else:
        chunks = np.array_split(indices, config.n_jobs * 4)
        args = [(params, drive, config.t_span, config.rtol,
                 config.master_seed, chunk, sample_times)
                for chunk in chunks if chunk.size]
        records = []
        with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
            for part in pool.map(_run_chunk, args):
                records.extend(part)
        records.sort(key=lambda r: r.index)
    return EnsembleResult(records=records, config=config)


@dataclass
class EmissionStatistics:
    """Empirical photon-number distribution of an ensemble."""

    counts_histogram: dict[int, int]
    p_of_n: np.ndarray
    p_err: np.ndarray
    mean: float
    std_err: float
    n_trajectories: int

    def probability(self, n: int) -> float:
        return float(self.p_of_n[n]) if n < self.p_of_n.size else 0.0


def emission_statistics(counts) -> EmissionStatistics:
    """Histogram per-trajectory emission counts into P[n] with binomial errors."""
    counts = np.asarray(counts, dtype=int)
    if counts.size == 0:
        raise ValueError("no trajectory records given")
    n_traj = counts.size
    hist = np.bincount(counts)
    p = hist / n_traj
    p_err = np.sqrt(p * (1.0 - p) / n_traj)
    ns = np.arange(p.size)
    mean = float((ns * p).sum())
    std_err = float(counts.std(ddof=1) / math.sqrt(n_traj)) if n_traj > 1 else 0.0
    histogram = {int(n): int(c) for n, c in enumerate(hist) if c > 0}
    return EmissionStatistics(counts_histogram=histogram, p_of_n=p, p_err=p_err,
                              mean=mean, std_err=std_err, n_trajectories=n_traj)


@dataclass(frozen=True)
class G2Estimate:
    value: float
    error: float


def g2_from_distribution(p_of_n, p_err=None) -> G2Estimate:
    """Zero-delay correlation from a photon-number distribution.

    Error bars propagate per-bin uncertainties to first order, treating the
    bins as independent.
    """
    p = np.asarray(p_of_n, dtype=float)
    ns = np.arange(p.size)
    mean = float((ns * p).sum())
    if mean <= 0:
        raise ZeroMeanError("zero-mean distribution has no defined g2")
    fac2 = float((ns * (ns - 1) * p).sum())
    g2 = fac2 / mean**2
    err = 0.0
    if p_err is not None:
        p_err = np.asarray(p_err, dtype=float)
        dg = (ns * (ns - 1) - 2.0 * g2 * mean * ns) / mean**2
        err = float(np.sqrt(((dg * p_err) ** 2).sum()))
    return G2Estimate(value=g2, error=err)


@dataclass
class DoublePulseStats:
    delta_tau: float
    statistics: EmissionStatistics

    @property
    def p0(self) -> float:
        return self.statistics.probability(0)

    @property
    def p1(self) -> float:
        return self.statistics.probability(1)

    @property
    def p2_plus(self) -> float:
        return float(self.statistics.p_of_n[2:].sum())

    @property
    def expected(self) -> float:
        return self.statistics.mean


def double_pulse_statistics(params: SystemParams, t_p: float, delta_tau_grid,
                            config: TrajectoryConfig,
                            area: float | None = None) -> list[DoublePulseStats]:
    """Emission-number statistics for two pi pulses versus their separation.

    The pulse area defaults to the calibrated first-emission-maximum area
    for this duration.  Away from the overlap region, P[2] climbs as
    1 - exp(-dt/T1) while P[1] stays tiny: the pulses either both produce a
    photon or cancel each other.
    """
    delta_tau_grid = np.atleast_1d(np.asarray(delta_tau_grid, dtype=float))
    if delta_tau_grid.size == 0:
        raise ValueError("empty separation grid")
    if area is None:
        area = calibrate_pi_pulse(params, t_p).area
    t1 = effective_t1(params)
    out = []
    for dt in delta_tau_grid:
        pulses = (GaussianPulse(area, t_p, 0.0), GaussianPulse(area, t_p, dt))
        drive = DriveField(pulses=pulses, target="emitter")
        span = (pulses[0].window()[0], pulses[1].window()[1] + 10.0 * t1)
        run_cfg = replace(config, t_span=span)
        ens = simulate_ensemble(params, drive, run_cfg)
        out.append(DoublePulseStats(delta_tau=float(dt), statistics=ens.statistics()))
    return out


@dataclass
class G2Point:
    tp_over_t1: float
    t_p: float
    area: float
    g2: float
    g2_err: float
    mean: float


def g2_vs_pulse_duration(params: SystemParams, tp_over_t1_grid,
                         config: TrajectoryConfig,
                         area_mode: str = "exact_pi") -> list[G2Point]:
    """g2(0) of single-pulse emission versus pulse duration over lifetime.

    ``area_mode`` selects the pulse-area convention: "exact_pi" uses area
    exactly pi; "calibrated" uses the first-emission-maximum area, which
    exceeds pi for long pulses and raises g2 further.  Multiple excitation
    during the pulse makes the curve increase with T_P/T1.
    """
    grid = np.atleast_1d(np.asarray(tp_over_t1_grid, dtype=float))
    if np.any(grid <= 0):
        raise ValueError("pulse-duration ratios must be positive")
    if area_mode not in ("exact_pi", "calibrated"):
        raise ValueError(f"unknown area_mode {area_mode!r}")
    t1 = effective_t1(params)
    points = []
    for ratio in grid:
        t_p = float(ratio * t1)
        if area_mode == "exact_pi":
            area = math.pi
        else:
            area = calibrate_pi_pulse(params, t_p).area
        pulse = GaussianPulse(area, t_p, 0.0)
        drive = DriveField(pulses=(pulse,), target="emitter")
        span = (pulse.window()[0], pulse.window()[1] + 10.0 * t1)
        ens = simulate_ensemble(params, drive, replace(config, t_span=span))
        stats = ens.statistics()
        est = g2_from_distribution(stats.p_of_n, stats.p_err)
        points.append(G2Point(tp_over_t1=float(ratio), t_p=t_p, area=area,
                              g2=est.value, g2_err=est.error, mean=stats.mean))
    return points
