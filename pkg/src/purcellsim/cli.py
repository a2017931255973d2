"""Command-line interface: run named scenarios, list them, validate configs.

Config files are sectioned ``key = value`` text (INI syntax) with explicit
unit suffixes on dimensioned quantities, e.g.::

    [scenario]
    name = dprf

    [system]
    hbar_g = 135 ueV
    hbar_2kappa = 2510 ueV
    t1_prime = 971 ps

    [run]
    seed = 7
    format = csv

Validation collects every problem before reporting.  Exit codes: 0 success,
2 config validation failure, 3 numerical failure, 4 a scenario headline
missed its registered target.
"""

import argparse
import configparser
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .analysis import FitFailure, IllConditionedFit
from .dynamics import CalibrationError, IntegrationError
from .scenarios import SCENARIOS, ScenarioConfig, run_scenario, scenario_names

__all__ = ["main", "validate_config", "ConfigError"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_TARGET_MISS = 4


@dataclass(frozen=True)
class FieldSpec:
    """One recognized config key: destination, unit and constraint."""

    section: str
    key: str
    dest: str            # "<config attr>.<key>" or plain attr
    kind: type = float
    unit: str | None = None          # required unit suffix, None = unitless
    minimum: float | None = None
    exclusive_min: bool = False
    choices: tuple[str, ...] | None = None


_UNIT_SCALE = {
    "ps": ("ps", 1.0),
    "ueV": ("ueV", 1.0),
    "rad": ("rad", 1.0),
    "eV": ("eV", 1.0),
    "Hz": ("Hz", 1.0),
    "kHz": ("Hz", 1e3),
    "MHz": ("Hz", 1e6),
    "GHz": ("Hz", 1e9),
    "mm": ("mm", 1.0),
    "dB/mm": ("dB/mm", 1.0),
}

FIELDS = [
    FieldSpec("scenario", "name", "scenario", kind=str),
    FieldSpec("system", "hbar_g", "system.hbar_g_uev", unit="ueV", minimum=0),
    FieldSpec("system", "hbar_2kappa", "system.hbar_2kappa_uev", unit="ueV",
              minimum=0, exclusive_min=True),
    FieldSpec("system", "t1_prime", "system.t1_prime_ps", unit="ps",
              minimum=0, exclusive_min=True),
    FieldSpec("system", "delta_al", "system.delta_al_uev", unit="ueV"),
    FieldSpec("system", "delta_cl", "system.delta_cl_uev", unit="ueV"),
    FieldSpec("system", "fock_cutoff", "system.fock_cutoff", kind=int, minimum=1),
    FieldSpec("system", "t1f", "system.t1f_ps", unit="ps", minimum=0, exclusive_min=True),
    FieldSpec("system", "t2_star", "system.t2_star_ps", unit="ps",
              minimum=0, exclusive_min=True),
    FieldSpec("system", "t1", "system.t1_ps", unit="ps", minimum=0, exclusive_min=True),
    FieldSpec("system", "t2", "system.t2_ps", unit="ps", minimum=0, exclusive_min=True),
    FieldSpec("system", "rrs_noise", "system.rrs_noise", minimum=0),
    FieldSpec("drive", "t_p", "drive.t_p_ps", unit="ps", minimum=0, exclusive_min=True),
    FieldSpec("drive", "area", "drive.area_rad", unit="rad", minimum=0),
    FieldSpec("drive", "target", "drive.target", kind=str, choices=("emitter", "cavity")),
    FieldSpec("drive", "irf_fwhm", "drive.irf_fwhm_ps", unit="ps",
              minimum=0, exclusive_min=True),
    FieldSpec("trajectories", "n_trajectories", "trajectories.n_trajectories",
              kind=int, minimum=1),
    FieldSpec("trajectories", "master_seed", "trajectories.master_seed", kind=int),
    FieldSpec("trajectories", "jump_channels", "trajectories.jump_channels", kind=str,
              choices=("cavity", "emitter", "all")),
    FieldSpec("cavity", "q_factor", "cavity.q_factor", minimum=0, exclusive_min=True),
    FieldSpec("cavity", "mode_volume", "cavity.mode_volume", minimum=0, exclusive_min=True),
    FieldSpec("cavity", "overlap_field", "cavity.overlap_field", minimum=0),
    FieldSpec("cavity", "photon_energy", "cavity.photon_energy_ev", unit="eV",
              minimum=0, exclusive_min=True),
    FieldSpec("visibility", "g2", "visibility.g2", minimum=0),
    FieldSpec("visibility", "epsilon", "visibility.epsilon", minimum=0),
    FieldSpec("visibility", "r", "visibility.r", minimum=0),
    FieldSpec("visibility", "raw_visibility", "visibility.raw_visibility"),
    FieldSpec("visibility", "true_visibility", "visibility.true_visibility"),
    FieldSpec("budget", "rep_rate", "budget.rep_rate_hz", unit="Hz", minimum=0),
    FieldSpec("budget", "eta_qd_waveguide", "budget.eta_qd_waveguide", minimum=0),
    FieldSpec("budget", "waveguide_length", "budget.waveguide_length_mm",
              unit="mm", minimum=0),
    FieldSpec("budget", "propagation_loss", "budget.propagation_loss_db_per_mm",
              unit="dB/mm", minimum=0),
    FieldSpec("budget", "detector_efficiency", "budget.detector_efficiency", minimum=0),
    FieldSpec("run", "seed", "seed", kind=int),
    FieldSpec("run", "out", "output_dir", kind=str),
    FieldSpec("run", "format", "file_format", kind=str, choices=("csv", "json")),
    FieldSpec("run", "jobs", "jobs", kind=int, minimum=1),
]

_FIELD_MAP = {(f.section, f.key): f for f in FIELDS}


class ConfigError(ValueError):
    """Raised when a config file fails validation; carries all errors."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


def _parse_value(spec: FieldSpec, raw: str, errors: list[str]):
    where = f"[{spec.section}] {spec.key}"
    raw = raw.strip()
    if spec.kind is str:
        if spec.choices and raw not in spec.choices:
            errors.append(f"{where}: must be one of {', '.join(spec.choices)}, got {raw!r}")
            return None
        return raw
    parts = raw.split()
    if spec.unit is not None:
        if len(parts) != 2:
            errors.append(f"{where}: expected '<number> {spec.unit}', got {raw!r}")
            return None
        number, unit = parts
        canonical = _UNIT_SCALE.get(unit)
        if canonical is None or canonical[0] != _UNIT_SCALE[spec.unit][0]:
            errors.append(f"{where}: unit must be {spec.unit}-compatible, got {unit!r}")
            return None
        scale = canonical[1]
    else:
        if len(parts) != 1:
            errors.append(f"{where}: expected a bare number, got {raw!r}")
            return None
        number, scale = parts[0], 1.0
    try:
        value = spec.kind(float(number)) if spec.kind is int else float(number)
    except ValueError:
        errors.append(f"{where}: cannot parse number from {raw!r}")
        return None
    value = value * scale if spec.kind is float else value
    if spec.minimum is not None:
        bad = value <= spec.minimum if spec.exclusive_min else value < spec.minimum
        if bad:
            op = ">" if spec.exclusive_min else ">="
            errors.append(f"{where}: must be {op} {spec.minimum}, got {value}")
            return None
    return value


def validate_config(path, overrides: dict | None = None) -> ScenarioConfig:
    """Parse and validate a config file; collects all errors before raising.

    ``overrides`` (from command-line flags) take precedence over [run] keys.
    """
    errors: list[str] = []
    parser = configparser.ConfigParser(interpolation=None)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read config: {exc}"])
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"parse error: {exc}"])

    values: dict[str, dict] = {}
    plain: dict[str, object] = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            spec = _FIELD_MAP.get((section, key))
            if spec is None:
                errors.append(f"[{section}] {key}: unknown field")
                continue
            value = _parse_value(spec, raw, errors)
            if value is None:
                continue
            if "." in spec.dest:
                group, name = spec.dest.split(".")
                values.setdefault(group, {})[name] = value
            else:
                plain[spec.dest] = value

    scenario = plain.pop("scenario", None)
    if scenario is None:
        errors.append("[scenario] name: required field is missing")
    elif scenario not in SCENARIOS:
        errors.append(f"[scenario] name: unknown scenario {scenario!r}; "
                      f"choose from {', '.join(scenario_names())}")
    if errors:
        raise ConfigError(errors)
    for key, val in (overrides or {}).items():
        if val is not None:
            plain[key] = val
    return ScenarioConfig(scenario=scenario, **plain, **{
        k: v for k, v in values.items()})


def _cmd_list(_args) -> int:
    for name in scenario_names():
        print(name)
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        cfg = validate_config(args.config)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"ok: scenario {cfg.scenario!r}")
    return EXIT_OK


def _cmd_run(args) -> int:
    overrides = {"seed": args.seed, "output_dir": args.out,
                 "file_format": args.format, "jobs": args.jobs}
    try:
        if args.config:
            cfg = validate_config(args.config, overrides)
        elif args.scenario:
            cfg = ScenarioConfig(scenario=args.scenario,
                                 **{k: v for k, v in overrides.items() if v is not None})
        else:
            print("error: provide --config or --scenario", file=sys.stderr)
            return EXIT_CONFIG
    except (ConfigError, ValueError) as exc:
        errors = getattr(exc, "errors", [str(exc)])
        for err in errors:
            print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        report = run_scenario(cfg)
    except (IntegrationError, CalibrationError, FitFailure, IllConditionedFit) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    print(json.dumps(report.to_dict(), indent=1, sort_keys=True))
    for h in report.headlines:
        status = {True: "pass", False: "FAIL", None: "info"}[h.passed]
        err = f" +- {h.error:.3g}" if h.error else ""
        print(f"[{status}] {h.name} = {h.value:.6g}{err} {h.unit}".rstrip(),
              file=sys.stderr)
    return EXIT_OK if report.all_passed else EXIT_TARGET_MISS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="purcellsim",
        description="Purcell-enhanced single-photon source simulations")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario")
    run.add_argument("--config", type=Path, help="config file path")
    run.add_argument("--scenario", choices=scenario_names(),
                     help="scenario name (defaults for everything else)")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", type=Path, default=None, help="output directory")
    run.add_argument("--format", choices=("csv", "json"), default=None)
    run.add_argument("--jobs", type=int, default=None,
                     help="parallel trajectory workers (output-invariant)")
    run.set_defaults(func=_cmd_run)

    lst = sub.add_parser("list", help="list registered scenarios")
    lst.set_defaults(func=_cmd_list)

    val = sub.add_parser("validate", help="validate a config file")
    val.add_argument("--config", type=Path, required=True)
    val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
