"""Experiment configuration: strict JSON parsing, defaults, and overrides.

Precedence, highest first: command-line flags, then the LIOUVLAB_* environment
variables, then the config file, then per-experiment defaults. Unknown keys at
any level are rejected so a typo in a rate name cannot silently fall back to a
default. All quantities are in 1/us and rad/us; under `units = "mhz"` the
angular inputs (couplings and detunings, not decay rates) are multiplied by
2 pi on load.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .dynamics import IntegratorConfig
from .errors import ConfigError, LiouvlabError
from .model import DriveParams, ParameterSchedule, QuantumSystem, Rates, make_system

TOP_LEVEL_KEYS = {
    "experiment", "system", "schedule", "integrator", "ensemble", "scan",
    "output_dir", "formats", "threads", "units",
}
SYSTEM_KEYS = {"dim", "gamma_e", "gamma_phi", "gamma_f", "gamma_f_extra", "J", "Delta", "f_decay_to"}
SCHEDULE_KEYS = {"T", "direction", "J_max", "Delta_max", "gamma_e_schedule"}
INTEGRATOR_KEYS = {"dt", "method", "store_every"}
ENSEMBLE_KEYS = {"n", "master_seed", "dt", "store_every", "t_final"}
SCAN_KEYS = {
    "J_values", "J_start", "J_stop", "J_step", "Delta", "window", "n_samples",
    "J_range", "Delta_range", "resolution", "T_values", "Delta_max_values",
    "heatmap_t_max", "heatmap_samples",
}

# keys holding angular quantities (rad/us), scaled by 2 pi under units="mhz"
ANGULAR_KEYS = {
    "system": {"J", "Delta"},
    "schedule": {"J_max", "Delta_max"},
    "scan": {"J_values", "J_start", "J_stop", "J_step", "Delta", "J_range",
             "Delta_range", "Delta_max_values"},
}

SECTION_KEYS = {
    "system": SYSTEM_KEYS,
    "schedule": SCHEDULE_KEYS,
    "integrator": INTEGRATOR_KEYS,
    "ensemble": ENSEMBLE_KEYS,
    "scan": SCAN_KEYS,
}


@dataclass
class ExperimentConfig:
    """Fully resolved run configuration."""

    experiment: str
    system: QuantumSystem
    schedule: Optional[ParameterSchedule]
    integrator: IntegratorConfig
    ensemble_n: int
    master_seed: int
    ensemble_dt: float
    ensemble_store_every: int
    t_final: Optional[float]
    scan: dict
    output_dir: Path
    formats: tuple
    threads: int
    echo: dict = field(default_factory=dict)

    def wants(self, fmt: str) -> bool:
        return fmt in self.formats


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object at top level")
    return doc


def deep_merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; override wins, nested dicts merge key-wise."""
    out = dict(base)
    for key, value in override.items():
        if key in out and isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def validate_keys(raw: dict) -> None:
    unknown = set(raw) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    for section, allowed in SECTION_KEYS.items():
        body = raw.get(section)
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        bad = set(body) - allowed
        if bad:
            raise ConfigError(f"unknown keys in config section {section!r}: {sorted(bad)}")


def _scale_angular(value, factor: float):
    if isinstance(value, bool):
        raise ConfigError("angular config values must be numbers")
    if isinstance(value, (int, float)):
        return value * factor
    if isinstance(value, list):
        return [_scale_angular(v, factor) for v in value]
    raise ConfigError(f"angular config values must be numbers, got {value!r}")


def apply_units(raw: dict, units: str) -> dict:
    """Scale angular inputs into rad/us when they were given in MHz."""
    if units == "rad":
        return raw
    if units != "mhz":
        raise ConfigError(f"units must be 'rad' or 'mhz', got {units!r}")
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in raw.items()}
    for section, keys in ANGULAR_KEYS.items():
        body = out.get(section)
        if not isinstance(body, dict):
            continue
        for key in keys & set(body):
            body[key] = _scale_angular(body[key], 2.0 * math.pi)
    return out


def _number(section: str, key: str, value, default=None) -> Optional[float]:
    if value is None:
        return default
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    return float(value)


def _integer(section: str, key: str, value, default=None) -> Optional[int]:
    if value is None:
        return default
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
    return int(value)


def resolve(raw: dict, experiment: str) -> ExperimentConfig:
    """Build the typed configuration from a merged, unit-normalized dict."""
    validate_keys(raw)

    sys_raw = raw.get("system", {})
    dim = _integer("system", "dim", sys_raw.get("dim"), 2)
    try:
        rates = Rates(
            gamma_e=_number("system", "gamma_e", sys_raw.get("gamma_e"), 0.0),
            gamma_phi=_number("system", "gamma_phi", sys_raw.get("gamma_phi"), 0.0),
            gamma_f=_number("system", "gamma_f", sys_raw.get("gamma_f"), 0.0),
            gamma_f_extra=_number("system", "gamma_f_extra", sys_raw.get("gamma_f_extra"), 0.0),
        )
        drive = DriveParams(
            J=_number("system", "J", sys_raw.get("J"), 0.0),
            Delta=_number("system", "Delta", sys_raw.get("Delta"), 0.0),
        )
        f_decay_to = sys_raw.get("f_decay_to", "e")
        system = make_system(drive, rates, dim=dim, f_decay_to=f_decay_to)
    except LiouvlabError as exc:
        raise ConfigError(f"invalid system section: {exc}") from exc

    sched_raw = raw.get("schedule")
    schedule = None
    if sched_raw is not None:
        try:
            schedule = ParameterSchedule(
                T=_number("schedule", "T", sched_raw.get("T"), 2.0),
                direction=sched_raw.get("direction", "ccw"),
                J_max=_number("schedule", "J_max", sched_raw.get("J_max"), 16.0),
                Delta_max=_number("schedule", "Delta_max", sched_raw.get("Delta_max"), 10.0 * math.pi),
                gamma_e_schedule=sched_raw.get("gamma_e_schedule", "constant"),
            )
        except LiouvlabError as exc:
            raise ConfigError(f"invalid schedule section: {exc}") from exc

    integ_raw = raw.get("integrator", {})
    try:
        integrator = IntegratorConfig(
            dt=_number("integrator", "dt", integ_raw.get("dt"), 1e-3),
            method=integ_raw.get("method", "propagator_expm"),
            store_every=_integer("integrator", "store_every", integ_raw.get("store_every"), 1),
        )
    except LiouvlabError as exc:
        raise ConfigError(f"invalid integrator section: {exc}") from exc

    ens_raw = raw.get("ensemble", {})
    ensemble_n = _integer("ensemble", "n", ens_raw.get("n"), 1000)
    master_seed = _integer("ensemble", "master_seed", ens_raw.get("master_seed"), 12345)
    ensemble_dt = _number("ensemble", "dt", ens_raw.get("dt"), 5e-4)
    ensemble_store_every = _integer("ensemble", "store_every", ens_raw.get("store_every"), 20)
    t_final = _number("ensemble", "t_final", ens_raw.get("t_final"), None)
    if ensemble_n < 1:
        raise ConfigError(f"ensemble.n must be >= 1, got {ensemble_n}")
    if ensemble_dt <= 0:
        raise ConfigError(f"ensemble.dt must be positive, got {ensemble_dt}")
    if ensemble_store_every < 1:
        raise ConfigError(f"ensemble.store_every must be >= 1, got {ensemble_store_every}")

    scan = dict(raw.get("scan", {}))

    output_dir = Path(raw.get("output_dir", "out"))
    formats_raw = raw.get("formats", ["csv", "json"])
    if not isinstance(formats_raw, (list, tuple)) or not formats_raw:
        raise ConfigError("formats must be a non-empty list drawn from ['csv', 'json']")
    bad = set(formats_raw) - {"csv", "json"}
    if bad:
        raise ConfigError(f"unsupported formats: {sorted(bad)}")
    formats = tuple(dict.fromkeys(formats_raw))

    threads = _integer(None, "threads", raw.get("threads"), 1)
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")

    echo = _echo_dict(raw)
    return ExperimentConfig(
        experiment=experiment,
        system=system,
        schedule=schedule,
        integrator=integrator,
        ensemble_n=ensemble_n,
        master_seed=master_seed,
        ensemble_dt=ensemble_dt,
        ensemble_store_every=ensemble_store_every,
        t_final=t_final,
        scan=scan,
        output_dir=output_dir,
        formats=formats,
        threads=threads,
        echo=echo,
    )


def _echo_dict(raw: dict) -> dict:
    """JSON-safe copy of the merged config for the run manifest."""
    return json.loads(json.dumps(raw, default=str))


def parse_set_override(spec: str) -> tuple[list[str], object]:
    """Parse one --set section.key=value override.

    The value is JSON when it parses as JSON (numbers, lists, booleans),
    otherwise a bare string.
    """
    if "=" not in spec:
        raise ConfigError(f"--set expects section.key=value, got {spec!r}")
    dotted, text = spec.split("=", 1)
    path = [p for p in dotted.strip().split(".") if p]
    if not path:
        raise ConfigError(f"--set expects section.key=value, got {spec!r}")
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    return path, value


def nest_override(path: list[str], value) -> dict:
    out: dict = {}
    cursor = out
    for key in path[:-1]:
        cursor[key] = {}
        cursor = cursor[key]
    cursor[path[-1]] = value
    return out
