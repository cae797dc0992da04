from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import jsonschema  # type: ignore[import]
import numpy as np
import toml  # type: ignore[import]

from .dynamics import DEFAULT_ATOL, DEFAULT_MAX_STEPS, DEFAULT_RTOL, MAGNUS, OPEN_METHODS, SweepSpec
from .errors import ConfigError
from .model import DrivePulse, ModelParams
from .spectra import DEFAULT_BRACKET, AblationVariant
from .utils import config_digest, uniform_grid

logger = logging.getLogger("cqed_pairsim.config")

PACKAGE_DIR = Path(__file__).resolve().parent
SCHEMA_PATH = PACKAGE_DIR / "json_schemas" / "experiment_config.schema.json"
PRESET_DIR = PACKAGE_DIR / "presets"

COMMANDS = ("spectrum-scan", "lz", "rabi", "interference", "derived")

# config key -> ModelParams field
MODEL_FIELDS: Dict[str, str] = {
    "model.omega_ghz": "omega",
    "model.delta1_ghz": "delta1",
    "model.delta2_ghz": "delta2",
    "model.g1_ghz": "g1",
    "model.g2_ghz": "g2",
    "model.j_ghz": "J",
    "model.chi3_ghz": "chi3",
    "model.kappa_ghz": "kappa",
    "model.gamma1_ghz": "gamma1",
    "model.gamma2_ghz": "gamma2",
    "model.n_max": "n_max",
}
OUTPUT_KEY = "output.path"

_INTEGRATOR = ("integrator.rtol", "integrator.atol", "integrator.method", "integrator.max_steps")
_SWEEP = ("sweep.delta1_0_ghz", "sweep.v_ghz2", "sweep.t_end_ns")
_PULSE = ("pulse.peak_ghz", "pulse.area", "pulse.t0_ns", "pulse.tau_ns", "pulse.omega_d_ghz")


@dataclass(frozen=True)
class CommandKeys:
    required: Tuple[str, ...] = ()
    optional: Tuple[str, ...] = ()

    @property
    def allowed(self) -> frozenset:
        return frozenset(self.required + self.optional + tuple(MODEL_FIELDS) + (OUTPUT_KEY,))


COMMAND_KEYS: Dict[str, CommandKeys] = {
    "spectrum-scan": CommandKeys(
        required=("scan.delta1_start_ghz", "scan.delta1_stop_ghz", "scan.delta1_step_ghz"),
        optional=("scan.variants", "scan.levels"),
    ),
    "lz": CommandKeys(
        required=_SWEEP,
        optional=("time.step_ns", "initial.state") + _INTEGRATOR,
    ),
    "rabi": CommandKeys(
        required=("time.stop_ns",),
        optional=("time.start_ns", "time.step_ns", "initial.state", "integrator.truncation_check")
        + _PULSE
        + _INTEGRATOR,
    ),
    "interference": CommandKeys(
        required=("scan.ratio_start", "scan.ratio_stop", "scan.ratio_step"),
        optional=("scan.bracket_lo_ghz", "scan.bracket_hi_ghz"),
    ),
    "derived": CommandKeys(optional=_SWEEP),
}

# preset -> the subcommand it was written for; every preset also feeds `derived`
PRESETS: Dict[str, str] = {
    "fig2": "spectrum-scan",
    "fig4": "lz",
    "fig5": "rabi",
    "fig6a": "interference",
    "fig6b": "rabi",
}

DEFAULT_LEVELS = 6
DEFAULT_STEP_NS = 1.0


@dataclass(frozen=True)
class GridSpec:
    start: float
    stop: float
    step: float

    def values(self) -> np.ndarray:
        return uniform_grid(self.start, self.stop, self.step)


@dataclass(frozen=True)
class IntegratorSettings:
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    method: str = "RK45"
    max_steps: int = DEFAULT_MAX_STEPS
    truncation_check: bool = False


@dataclass
class ExperimentConfig:
    """Typed view of one validated run; `values` is the effective flat mapping it was built from."""

    command: str
    model: ModelParams
    values: Dict[str, Any]
    pulse: Optional[DrivePulse] = None
    sweep: Optional[SweepSpec] = None
    sweep_rate: Optional[float] = None
    delta1_grid: Optional[GridSpec] = None
    ratio_grid: Optional[GridSpec] = None
    time_grid: Optional[GridSpec] = None
    variants: List[AblationVariant] = field(default_factory=lambda: [AblationVariant.FULL])
    levels: int = DEFAULT_LEVELS
    bracket: Tuple[float, float] = DEFAULT_BRACKET
    initial_state: str = "ground"
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    output_path: Optional[str] = None

    @property
    def digest(self) -> str:
        return config_digest(self.values)

    def to_toml(self) -> str:
        header = f"# cqed-pairsim {self.command}: effective configuration\n"
        return header + toml.dumps(unflatten(self.values))


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------


def _resolve_config_path(path: str | Path) -> Path:
    """
    Resolve a user-supplied config path:
    - a directory means config.toml inside it
    - a bare filename falls back to the repo-level config/ directory
    """
    supplied = Path(path).expanduser()
    cfg_path = supplied / "config.toml" if supplied.is_dir() else supplied

    if cfg_path.exists():
        return cfg_path.resolve()

    repo_config = PACKAGE_DIR.parent / "config" / cfg_path.name
    if repo_config.exists():
        return repo_config.resolve()

    raise FileNotFoundError(f"Config file not found: {cfg_path}")


def flatten(raw: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for key, value in raw.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, Mapping):
            out.update(flatten(value, prefix=f"{dotted}."))
        else:
            out[dotted] = value
    return out


def unflatten(flat: Mapping[str, Any]) -> Dict[str, Any]:
    nested: Dict[str, Any] = {}
    for dotted in sorted(flat):
        *sections, leaf = dotted.split(".")
        node = nested
        for section in sections:
            node = node.setdefault(section, {})
        node[leaf] = flat[dotted]
    return nested


def _read_toml(path: Path, what: str) -> Dict[str, Any]:
    try:
        raw = toml.load(str(path))
    except toml.TomlDecodeError as exc:
        logger.error("Could not parse %s %s: %s", what, path, exc)
        raise ConfigError(f"{what} {path} is not valid TOML: {exc}", key=what) from exc
    return flatten(raw)


def load_config_file(path: str | Path) -> Dict[str, Any]:
    try:
        cfg_path = _resolve_config_path(path)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc), key="config") from exc
    logger.debug("Loading config from %s", cfg_path)
    return _read_toml(cfg_path, "config")


def available_presets() -> List[str]:
    return sorted(PRESETS)


def load_preset(name: str) -> Dict[str, Any]:
    if name not in PRESETS:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(available_presets())}", key="preset"
        )
    return _read_toml(PRESET_DIR / f"{name}.toml", "preset")


def parse_override(text: str) -> Tuple[str, Any]:
    """'key=value' with value read as a TOML literal, else kept as a bare string."""
    key, sep, raw = text.partition("=")
    key, raw = key.strip(), raw.strip()
    if not sep or not key:
        raise ConfigError(f"override {text!r} must look like key=value", key=key or None)
    try:
        value = toml.loads(f"v = {raw}")["v"]
    except (toml.TomlDecodeError, IndexError, KeyError):
        value = raw
    return key, value


@lru_cache(maxsize=1)
def _key_properties() -> Dict[str, Any]:
    schema = json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))
    return schema["properties"]


def command_schema(command: str) -> Dict[str, Any]:
    keys = COMMAND_KEYS[command]
    props = _key_properties()
    return {
        "type": "object",
        "properties": {k: props[k] for k in sorted(keys.allowed)},
        "required": list(keys.required),
        "additionalProperties": False,
    }


def validate_mapping(command: str, mapping: Mapping[str, Any]) -> None:
    keys = COMMAND_KEYS[command]
    unknown = sorted(set(mapping) - keys.allowed)
    if unknown:
        logger.error("Unknown config key(s) for %s: %s", command, ", ".join(unknown))
        raise ConfigError(f"unknown key(s) for {command}: {', '.join(unknown)}", key=unknown[0])
    missing = [k for k in keys.required if k not in mapping]
    if missing:
        logger.error("Missing config key(s) for %s: %s", command, ", ".join(missing))
        raise ConfigError(f"missing required key(s) for {command}: {', '.join(missing)}", key=missing[0])

    validator = jsonschema.Draft7Validator(command_schema(command))
    errors = sorted(validator.iter_errors(dict(mapping)), key=lambda e: [str(p) for p in e.path])
    if errors:
        err = errors[0]
        key = str(err.path[0]) if err.path else None
        logger.error("Config failed schema validation at %s: %s", key, err.message)
        raise ConfigError(f"{key}: {err.message}", key=key)


# ---------------------------------------------------------------------------
# typed assembly
# ---------------------------------------------------------------------------


def _grid(values: Mapping[str, Any], start: str, stop: str, step: str, default_start: float = 0.0) -> GridSpec:
    spec = GridSpec(
        start=float(values.get(start, default_start)),
        stop=float(values[stop]),
        step=float(values[step]) if step in values else DEFAULT_STEP_NS,
    )
    try:
        spec.values()
    except ValueError as exc:
        raise ConfigError(f"{stop}: {exc}", key=stop) from exc
    return spec


def _model(values: Mapping[str, Any]) -> ModelParams:
    kwargs = {name: values[key] for key, name in MODEL_FIELDS.items() if key in values}
    if "n_max" in kwargs:
        kwargs["n_max"] = int(kwargs["n_max"])
    try:
        return ModelParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"model: {exc}", key="model") from exc


def _integrator(values: Mapping[str, Any], default_method: str) -> IntegratorSettings:
    return IntegratorSettings(
        rtol=float(values.get("integrator.rtol", DEFAULT_RTOL)),
        atol=float(values.get("integrator.atol", DEFAULT_ATOL)),
        method=str(values.get("integrator.method", default_method)),
        max_steps=int(values.get("integrator.max_steps", DEFAULT_MAX_STEPS)),
        truncation_check=bool(values.get("integrator.truncation_check", False)),
    )


def _pulse(values: Mapping[str, Any], model: ModelParams) -> Optional[DrivePulse]:
    if "pulse.peak_ghz" in values and "pulse.area" in values:
        raise ConfigError("give either pulse.peak_ghz or pulse.area, not both", key="pulse.area")
    if "pulse.peak_ghz" not in values and "pulse.area" not in values:
        return None
    shape = dict(
        t0=float(values.get("pulse.t0_ns", 0.0)),
        tau=float(values.get("pulse.tau_ns", 20.0)),
        omega_d=float(values.get("pulse.omega_d_ghz", model.omega)),
    )
    if "pulse.peak_ghz" in values:
        return DrivePulse.from_peak(float(values["pulse.peak_ghz"]), **shape)
    return DrivePulse(float(values["pulse.area"]), **shape)


def _sweep(values: Mapping[str, Any]) -> SweepSpec:
    try:
        return SweepSpec(
            delta1_0=float(values["sweep.delta1_0_ghz"]),
            v=float(values["sweep.v_ghz2"]),
            t_end=float(values["sweep.t_end_ns"]),
        )
    except ValueError as exc:
        raise ConfigError(f"sweep: {exc}", key="sweep.v_ghz2") from exc


def assemble(command: str, values: Mapping[str, Any], output_path: Optional[str] = None) -> ExperimentConfig:
    """Validate a flat mapping for `command` and turn it into an ExperimentConfig."""
    if command not in COMMAND_KEYS:
        raise ConfigError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}", key="command")
    values = dict(values)
    output_path = values.pop(OUTPUT_KEY, output_path)
    validate_mapping(command, values)

    model = _model(values)
    cfg = ExperimentConfig(command=command, model=model, values=values, output_path=output_path)

    if command == "spectrum-scan":
        cfg.delta1_grid = _grid(values, "scan.delta1_start_ghz", "scan.delta1_stop_ghz", "scan.delta1_step_ghz")
        cfg.variants = [AblationVariant(v) for v in values.get("scan.variants", ["full"])]
        cfg.levels = int(values.get("scan.levels", DEFAULT_LEVELS))
        if cfg.levels > model.space.dim:
            raise ConfigError(
                f"scan.levels={cfg.levels} exceeds the Hilbert-space dimension {model.space.dim}",
                key="scan.levels",
            )

    elif command == "lz":
        cfg.sweep = _sweep(values)
        cfg.sweep_rate = cfg.sweep.v
        cfg.time_grid = GridSpec(0.0, cfg.sweep.t_end, float(values.get("time.step_ns", DEFAULT_STEP_NS)))
        cfg.initial_state = str(values.get("initial.state", "1gg"))
        cfg.integrator = _integrator(values, MAGNUS)

    elif command == "rabi":
        cfg.time_grid = _grid(values, "time.start_ns", "time.stop_ns", "time.step_ns")
        cfg.pulse = _pulse(values, model)
        cfg.initial_state = str(values.get("initial.state", "ground"))
        cfg.integrator = _integrator(values, "RK45")
        if cfg.integrator.method not in OPEN_METHODS:
            raise ConfigError(
                f"integrator.method={cfg.integrator.method!r} cannot propagate a density matrix; "
                f"use one of {', '.join(OPEN_METHODS)}",
                key="integrator.method",
            )

    elif command == "interference":
        if model.g1 == 0:
            raise ConfigError("interference needs model.g1_ghz != 0 (g2 = ratio * g1)", key="model.g1_ghz")
        cfg.ratio_grid = _grid(values, "scan.ratio_start", "scan.ratio_stop", "scan.ratio_step")
        cfg.bracket = (
            float(values.get("scan.bracket_lo_ghz", DEFAULT_BRACKET[0])),
            float(values.get("scan.bracket_hi_ghz", DEFAULT_BRACKET[1])),
        )
        if not cfg.bracket[0] < cfg.bracket[1]:
            raise ConfigError(f"bracket must satisfy lo < hi, got {cfg.bracket}", key="scan.bracket_lo_ghz")

    elif command == "derived":
        if "sweep.v_ghz2" in values:
            cfg.sweep_rate = float(values["sweep.v_ghz2"])

    return cfg


def build_config(
    command: str,
    *,
    preset: Optional[str] = None,
    config_path: Optional[str | Path] = None,
    overrides: Sequence[str] = (),
    output_path: Optional[str] = None,
) -> ExperimentConfig:
    """Merge preset < config file < --set overrides, then validate for `command`."""
    if command not in COMMAND_KEYS:
        raise ConfigError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}", key="command")
    merged: Dict[str, Any] = {}

    if preset is not None:
        values = load_preset(preset)
        if command not in (PRESETS[preset], "derived"):
            raise ConfigError(
                f"preset {preset!r} belongs to {PRESETS[preset]!r}, not {command!r}", key="preset"
            )
        allowed = COMMAND_KEYS[command].allowed
        dropped = sorted(k for k in values if k not in allowed)
        if dropped:
            logger.debug("Preset %s: ignoring keys not used by %s: %s", preset, command, ", ".join(dropped))
        merged.update({k: v for k, v in values.items() if k in allowed})

    if config_path is not None:
        merged.update(load_config_file(config_path))

    for text in overrides:
        key, value = parse_override(text)
        merged[key] = value

    if output_path is not None:
        merged[OUTPUT_KEY] = output_path
    cfg = assemble(command, merged)
    logger.info("Config for %s ready (sha256 %s)", command, cfg.digest[:12])
    return cfg
