"""Run configuration: nested dataclasses loaded from YAML.

Precedence when the CLI builds a config is flag > environment > file > default.
"""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from importlib import resources
from pathlib import Path

import yaml

from .data_model import NormalizationScale, SetpointBand
from .rnn.model import TABLE1_RANGES, NetworkConfig
from .thermal_oracle import RoomPhysics

SCHEMA_VERSION = 1
BUNDLED = ("demo", "full")
ENV_OUT_DIR = "HVACOPT_OUT_DIR"
ENV_JOBS = "HVACOPT_JOBS"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Seeds:
    data: int = 0
    split: int = 0
    train: int = 0
    tune: int = 0
    schedule: int = 0


@dataclass(frozen=True)
class GenerateConfig:
    telemetry_days: int = 14
    n_cooling: int = 68
    n_heating: int = 112
    cooling_len: tuple[int, int] = (21, 51)
    heating_len: tuple[int, int] = (6, 6)


@dataclass(frozen=True)
class EvalConfig:
    source: str = "corpus"  # corpus | telemetry
    split_ratio: float = 0.8
    horizon: int = 24


@dataclass(frozen=True)
class TuningConfig:
    enabled: bool = False
    budget: int = 20
    ranges: dict = field(default_factory=lambda: {k: tuple(v) for k, v in TABLE1_RANGES.items()})


@dataclass(frozen=True)
class BaselineConfig:
    ffnn_structures: tuple = ((), (2,), (2, 3))
    activations: tuple = ("tanh", "sigmoid")
    cv_folds: int = 10
    ffnn_max_steps: int = 20_000


@dataclass(frozen=True)
class SimulationConfig:
    initial_inside: float = 19.5
    outside_mean: float = 10.0
    outside_amplitude: float = 4.0
    schedule_path: str | None = None


@dataclass(frozen=True)
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    out_dir: str = "runs/default"
    jobs: int = 1
    seeds: Seeds = Seeds()
    band: SetpointBand = SetpointBand()
    normalization: NormalizationScale = NormalizationScale()
    physics: RoomPhysics = RoomPhysics()
    generate: GenerateConfig = GenerateConfig()
    evaluation: EvalConfig = EvalConfig()
    network: NetworkConfig = NetworkConfig()
    tuning: TuningConfig = TuningConfig()
    baselines: BaselineConfig = BaselineConfig()
    simulation: SimulationConfig = SimulationConfig()

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}; expected {SCHEMA_VERSION}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.evaluation.source not in ("corpus", "telemetry"):
            raise ConfigError(f"evaluation.source must be 'corpus' or 'telemetry', got {self.evaluation.source!r}")

    def to_dict(self) -> dict:
        return _plain(asdict(self))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "value"):  # enums
        return obj.value
    return obj


def _tuplify(v):
    return tuple(_tuplify(x) for x in v) if isinstance(v, list) else v


def _build(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(unknown)}")
    defaults = cls()
    kwargs = {}
    for name, value in data.items():
        current = getattr(defaults, name)
        if is_dataclass(current):
            kwargs[name] = _build(type(current), value, f"{where}.{name}".lstrip("."))
        elif name == "ranges":
            kwargs[name] = {k: tuple(v) for k, v in value.items()}
        else:
            kwargs[name] = _tuplify(value)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from exc


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    if "schema_version" not in data:
        raise ConfigError("config is missing schema_version")
    return _build(RunConfig, data, "")


def load(source: str | None) -> RunConfig:
    """Load a YAML file, a bundled config by name, or defaults when ``source`` is None."""
    if source is None:
        return RunConfig()
    if source in BUNDLED and not Path(source).exists():
        text = resources.files("hvacopt.configs").joinpath(f"{source}.yaml").read_text()
    else:
        path = Path(source)
        if not path.is_file():
            raise FileNotFoundError(str(path))
        text = path.read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    return from_dict(data or {})


def apply_overrides(cfg: RunConfig, out_dir=None, jobs=None, seed=None, env=None) -> RunConfig:
    env = os.environ if env is None else env
    changes = {}
    if env.get(ENV_OUT_DIR):
        changes["out_dir"] = env[ENV_OUT_DIR]
    if env.get(ENV_JOBS):
        try:
            changes["jobs"] = int(env[ENV_JOBS])
        except ValueError as exc:
            raise ConfigError(f"{ENV_JOBS} must be an integer") from exc
    if out_dir is not None:
        changes["out_dir"] = out_dir
    if jobs is not None:
        changes["jobs"] = jobs
    if seed is not None:
        changes["seeds"] = Seeds(seed, seed, seed, seed, seed)
    return replace(cfg, **changes) if changes else cfg
