"""Experiment configuration: YAML loading, defaults, validation, overrides.

The defaults reproduce the reference operating point: a 16-antenna BS, an
8x8 surface with 4 active sensors and 4-bit converters, 4 users at 23 dBm,
80 MHz bandwidth at NF 7 dB over -174 dBm/Hz, T = 400 training slots inside
an 1800-slot coherence block with a 50-slot reflector-off warmup, critical
dictionaries, uninformative hyperpriors and an 8-way split of the g block.
Unknown keys are rejected with their full key path.
"""

import dataclasses
from dataclasses import dataclass, field, fields

import numpy as np
import yaml

from .channel import LinkSpec, ScenarioConfig
from .estimator import HyperParams, PartitionSpec, StopRule

_ALLOWED_SWEEPS = ("tx_power_dbm", "T", "N_a", "B")
_ALLOWED_ESTIMATORS = ("visbl", "omp", "ls")


@dataclass(frozen=True)
class GeometrySection:
    bs_antennas: int = 16
    irs_h: int = 8
    irs_v: int = 8
    m_g: int = 16
    n_g: int = 64


@dataclass(frozen=True)
class TrainingSection:
    t: int = 400
    t_c: int = 1800
    warmup_off: int = 50
    f_sn: float = 1.0
    n_active: int = 4
    bits: int = 4
    v_redraw: str = "per_slot"


@dataclass(frozen=True)
class SweepSection:
    axis: str = "tx_power_dbm"
    values: tuple = (23.0,)


@dataclass(frozen=True)
class BaselineSection:
    omp_sparsity: int = 120
    ridge: float = 1e-6


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    trials: int = 1
    workers: int = 1
    estimators: tuple = ("visbl",)
    output_dir: str = "results"
    on_grid: bool = True
    init_iters: int = 20
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    geometry: GeometrySection = field(default_factory=GeometrySection)
    training: TrainingSection = field(default_factory=TrainingSection)
    hyper: HyperParams = field(default_factory=HyperParams)
    partition: PartitionSpec = field(default_factory=lambda: PartitionSpec(s_f=1, s_g=8, s_h=1))
    stop: StopRule = field(default_factory=StopRule)
    sweep: SweepSection = field(default_factory=SweepSection)
    baseline: BaselineSection = field(default_factory=BaselineSection)


class ConfigError(ValueError):
    """Raised for unparsable files, unknown keys or constraint violations."""


_SECTION_TYPES = {
    "scenario": ScenarioConfig,
    "geometry": GeometrySection,
    "training": TrainingSection,
    "hyper": HyperParams,
    "partition": PartitionSpec,
    "stop": StopRule,
    "sweep": SweepSection,
    "baseline": BaselineSection,
}

_LINK_KEYS = ("ue_irs", "irs_bs", "ue_bs")


def _coerce(value, target_type, path):
    if target_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    return value


def _merge_section(cls, data, path):
    """Build a section dataclass from a dict, recursing into nested dataclasses."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping")
    defaults = cls()
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, val in data.items():
        if key not in known:
            raise ConfigError(f"unknown key '{path}.{key}'")
        sub_path = f"{path}.{key}"
        current = getattr(defaults, key)
        if dataclasses.is_dataclass(current) and isinstance(val, dict):
            kwargs[key] = _merge_section(type(current), val, sub_path)
        elif isinstance(current, tuple) and isinstance(val, (list, tuple)):
            kwargs[key] = tuple(val)
        elif isinstance(current, bool):
            if not isinstance(val, bool):
                raise ConfigError(f"{sub_path}: expected a boolean, got {val!r}")
            kwargs[key] = val
        elif isinstance(current, int) and not isinstance(current, bool):
            kwargs[key] = _coerce(val, int, sub_path)
        elif isinstance(current, float):
            if not isinstance(val, (int, float)):
                raise ConfigError(f"{sub_path}: expected a number, got {val!r}")
            kwargs[key] = float(val)
        else:
            kwargs[key] = val
    try:
        return dataclasses.replace(defaults, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _config_from_dict(data: dict) -> ExperimentConfig:
    defaults = ExperimentConfig()
    known = {f.name for f in fields(ExperimentConfig)}
    kwargs = {}
    for key, val in (data or {}).items():
        if key not in known:
            raise ConfigError(f"unknown key '{key}'")
        if key in _SECTION_TYPES:
            kwargs[key] = _merge_section(_SECTION_TYPES[key], val, key)
        else:
            current = getattr(defaults, key)
            if isinstance(current, tuple) and isinstance(val, (list, tuple)):
                kwargs[key] = tuple(val)
            elif isinstance(current, bool):
                if not isinstance(val, bool):
                    raise ConfigError(f"{key}: expected a boolean, got {val!r}")
                kwargs[key] = val
            elif isinstance(current, int):
                kwargs[key] = _coerce(val, int, key)
            else:
                kwargs[key] = val
    try:
        cfg = dataclasses.replace(defaults, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    tr, geo = cfg.training, cfg.geometry
    if tr.t > tr.t_c:
        raise ConfigError(f"training.t ({tr.t}) must not exceed training.t_c ({tr.t_c})")
    if tr.warmup_off > tr.t:
        raise ConfigError(f"training.warmup_off ({tr.warmup_off}) exceeds training.t ({tr.t})")
    if tr.n_active > geo.irs_h * geo.irs_v:
        raise ConfigError(f"training.n_active ({tr.n_active}) exceeds the element count")
    if not (0 < tr.f_sn <= 1):
        raise ConfigError("training.f_sn must lie in (0, 1]")
    if tr.bits < 1 or tr.bits > 16:
        raise ConfigError("training.bits must lie in [1, 16]")
    if cfg.sweep.axis not in _ALLOWED_SWEEPS:
        raise ConfigError(f"sweep.axis must be one of {_ALLOWED_SWEEPS}")
    if len(cfg.sweep.values) < 1:
        raise ConfigError("sweep.values must be non-empty")
    if cfg.trials < 1:
        raise ConfigError("trials must be >= 1")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    for name in cfg.estimators:
        if name not in _ALLOWED_ESTIMATORS:
            raise ConfigError(f"estimators: unknown estimator '{name}'")
    if geo.m_g < geo.bs_antennas:
        raise ConfigError("geometry.m_g must be >= geometry.bs_antennas")
    if geo.n_g < geo.irs_h * geo.irs_v:
        raise ConfigError("geometry.n_g must be >= the element count")
    # sweep values that land on structural knobs must stay consistent
    if cfg.sweep.axis == "N_a":
        for v in cfg.sweep.values:
            if int(v) > geo.irs_h * geo.irs_v:
                raise ConfigError(f"sweep over N_a: value {v} exceeds the element count")
    if cfg.sweep.axis == "T":
        for v in cfg.sweep.values:
            if int(v) > tr.t_c:
                raise ConfigError(f"sweep over T: value {v} exceeds training.t_c")
            if int(v) < tr.warmup_off:
                raise ConfigError(f"sweep over T: value {v} is below training.warmup_off")


def load_config(path: str) -> ExperimentConfig:
    """Parse a YAML config file; an empty file yields the full defaults."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return _config_from_dict(data)


def _parse_scalar(text: str):
    lowered = text.strip().lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if "," in text or text.strip().startswith("["):
        return yaml.safe_load(text)
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    """Apply 'dotted.key=value' overrides on top of an existing config."""
    data = {}
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        key, _, raw = item.partition("=")
        node = data
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = _parse_scalar(raw)
    merged = _as_plain_dict(cfg)
    _deep_update(merged, data)
    return _config_from_dict(merged)


def _as_plain_dict(cfg) -> dict:
    def convert(obj):
        if dataclasses.is_dataclass(obj):
            return {f.name: convert(getattr(obj, f.name)) for f in fields(obj)}
        if isinstance(obj, tuple):
            return [convert(x) for x in obj]
        if isinstance(obj, np.floating):
            return float(obj)
        return obj
    return convert(cfg)


def _deep_update(base: dict, extra: dict) -> None:
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], val)
        else:
            base[key] = val


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Plain-dict form used for hashing and the run manifest."""
    return _as_plain_dict(cfg)
