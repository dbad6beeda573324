"""Run configuration: dataclass defaults, dataset profiles and INI files.

Values resolve in this order: dataclass defaults, then ``--profile``, then the
config file, then CLI overrides. ``dump_config`` writes every resolved value,
so the snapshot alone reproduces a run.

Example file:
    [run]
    profile = pm25
    seed = 3

    [data]
    path = PRSA_data.csv

    [forecast]
    n_sims = 1000
    levels = 0.05, 0.5, 0.95
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from .baselines import BaselineConfig
from .data import SplitPlan
from .exceptions import ConfigError
from .forecast import CONDITION_LATENTS, DEFAULT_LEVELS, DEFAULT_N_SIMS
from .trainer import TrainConfig

DATA_SOURCES = ("csv", "synthetic")

_LIST_FIELDS = {"covariates", "prior_mlp", "emission_mlp", "posterior_mlp", "levels"}
_TEXT_FIELDS = {
    "profile", "output_dir", "source", "path", "target", "covariates", "timestamp",
    "activation", "mlp_activation", "cond_latent",
}
_MODEL_FIELDS = ("latent_dim", "hidden_dim", "g_dim", "prior_mlp", "emission_mlp", "posterior_mlp", "activation")
_TRAINING_FIELDS = ("epochs", "learning_rate", "beta1", "beta2", "adam_eps", "patience", "clip_norm")


@dataclass
class DataConfig:
    """Where the series comes from and which columns play which role."""
    source: str = "csv"
    path: Optional[str] = None
    target: str = "y"
    covariates: List[str] = field(default_factory=list)
    timestamp: Optional[str] = None
    synthetic_rows: int = 1250
    synthetic_seed: int = 0

    def __post_init__(self) -> None:
        self.covariates = [str(c) for c in self.covariates]
        if self.source not in DATA_SOURCES:
            raise ConfigError(f"must be one of {DATA_SOURCES}, got {self.source!r}", field="data.source")
        if not self.target:
            raise ConfigError("target column is required", field="data.target")
        if self.synthetic_rows < 1:
            raise ConfigError(f"must be positive, got {self.synthetic_rows}", field="data.synthetic_rows")


@dataclass
class ForecastConfig:
    n_sims: int = DEFAULT_N_SIMS
    levels: Tuple[float, ...] = DEFAULT_LEVELS
    cond_latent: str = "posterior"
    write_paths: bool = False

    def __post_init__(self) -> None:
        self.levels = tuple(float(v) for v in self.levels)
        if int(self.n_sims) < 1:
            raise ConfigError(f"must be positive, got {self.n_sims}", field="forecast.n_sims")
        if not self.levels or any(not 0.0 < q < 1.0 for q in self.levels):
            raise ConfigError(f"levels must lie in (0, 1), got {list(self.levels)}", field="forecast.levels")
        if self.cond_latent not in CONDITION_LATENTS:
            raise ConfigError(
                f"must be one of {CONDITION_LATENTS}, got {self.cond_latent!r}",
                field="forecast.cond_latent",
            )


@dataclass
class RunConfig:
    """Everything one command needs."""
    data: DataConfig = field(default_factory=DataConfig)
    split: SplitPlan = field(default_factory=lambda: SplitPlan(n_train=1200, n_val=200, n_cond=10, seq_len=10))
    model: TrainConfig = field(default_factory=TrainConfig)
    forecast: ForecastConfig = field(default_factory=ForecastConfig)
    baselines: BaselineConfig = field(default_factory=BaselineConfig)
    seed: int = 0
    output_dir: str = "runs"
    profile: Optional[str] = None

    def to_sections(self) -> Dict[str, Dict[str, Any]]:
        """Nested ``{section: {key: value}}`` view matching the INI layout."""
        return {
            "run": {"profile": self.profile, "seed": self.seed, "output_dir": self.output_dir},
            "data": {f.name: getattr(self.data, f.name) for f in fields(DataConfig)},
            "split": {f.name: getattr(self.split, f.name) for f in fields(SplitPlan)},
            "model": {name: getattr(self.model, name) for name in _MODEL_FIELDS},
            "training": {name: getattr(self.model, name) for name in _TRAINING_FIELDS},
            "forecast": {f.name: getattr(self.forecast, f.name) for f in fields(ForecastConfig)},
            "baselines": {f.name: getattr(self.baselines, f.name) for f in fields(BaselineConfig) if f.name != "seed"},
        }


def _split_values(n_train, n_val, n_cond, seq_len, n_pred=30) -> Dict[str, int]:
    return {"n_train": n_train, "n_val": n_val, "n_cond": n_cond, "seq_len": seq_len, "n_pred": n_pred}


def _model_values(z, h, g, prior, emission) -> Dict[str, Any]:
    return {"latent_dim": z, "hidden_dim": h, "g_dim": g, "prior_mlp": prior, "emission_mlp": emission}


PROFILES: Dict[str, Dict[str, Dict[str, Any]]] = {
    "options": {
        "data": {"target": "option_price", "covariates": ["underlying_price"]},
        "split": _split_values(300, 30, 10, 10),
        "model": _model_values(50, 64, 64, (4, 64), (4, 64)),
        "baselines": {"lstm_hidden": 64},
    },
    "pm25": {
        "data": {"target": "pm2.5", "covariates": ["TEMP", "PRES", "Iws", "DEWP", "Ir", "Is"]},
        "split": _split_values(1200, 200, 10, 10),
        "model": _model_values(50, 64, 64, (4, 64), (4, 64)),
        "baselines": {"lstm_hidden": 64},
    },
    "traffic": {
        "data": {"target": "traffic_volume", "covariates": ["temp", "rain_1h", "snow_1h", "clouds_all"]},
        "split": _split_values(1000, 200, 20, 20),
        "model": _model_values(30, 128, 128, (4, 128), (4, 128)),
        "baselines": {"lstm_hidden": 128},
    },
    "chickenpox": {
        "data": {"target": "BUDAPEST", "covariates": ["PEST", "BACS", "KOMAROM", "HEVES"]},
        "split": _split_values(300, 150, 10, 10),
        "model": _model_values(50, 128, 128, (4, 128), (4, 128)),
        "baselines": {"lstm_hidden": 128},
    },
    "synthetic": {
        "data": {"source": "synthetic", "target": "y", "covariates": ["phase_sin", "phase_cos"]},
        "split": _split_values(1000, 200, 20, 20),
        "model": _model_values(4, 16, 16, (1, 16), (1, 16)),
        "training": {"epochs": 60, "patience": 15},
        "baselines": {"lstm_hidden": 16, "epochs": 60, "patience": 15},
    },
}


_NULL_WORDS = ("", "none", "null")


def _unquote(value: str) -> Optional[str]:
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "'\"":
        return value[1:-1]
    return None


def convert_value(value: str) -> Any:
    """Type one raw INI value.

    An empty value, ``none`` and ``null`` read as None. The boolean words
    configparser accepts (true/false, yes/no, on/off) read as bool, while
    ``1`` and ``0`` stay integers. Numbers become int when they can and float
    otherwise. A value with commas becomes a list of typed items, so
    ``levels = 0.05, 0.5, 0.95`` gives three floats and a trailing comma is
    ignored. Matching outer quotes keep a value as text, commas included.
    """
    value = value.strip()
    quoted = _unquote(value)
    if quoted is not None:
        return quoted
    if "," in value:
        return [convert_value(item) for item in value.split(",") if item.strip()]

    lowered = value.lower()
    if lowered in _NULL_WORDS:
        return None
    if lowered in configparser.ConfigParser.BOOLEAN_STATES and lowered not in ("1", "0"):
        return configparser.ConfigParser.BOOLEAN_STATES[lowered]
    for number in (int, float):
        try:
            return number(value)
        except ValueError:
            pass
    return value


def parse_field(key: str, raw: str) -> Any:
    """Type one INI value: list fields always give lists, name fields keep their text."""
    raw = raw.strip()
    if raw.lower() in _NULL_WORDS:
        return None
    if key in _TEXT_FIELDS:
        items = [item.strip() for item in raw.split(",")] if key in _LIST_FIELDS else [raw]
        texts = [item if _unquote(item) is None else _unquote(item) for item in items if item]
        return texts if key in _LIST_FIELDS else texts[0]
    value = convert_value(raw)
    if key in _LIST_FIELDS and not isinstance(value, list):
        return [value]
    return value


def format_field(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ", ".join(format_field(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def default_sections() -> Dict[str, Dict[str, Any]]:
    sections = RunConfig().to_sections()
    # None means "follow prior_mlp" until a profile or file says otherwise.
    sections["model"]["posterior_mlp"] = None
    return sections


def _check_type(section: str, key: str, current: Any, value: Any) -> Any:
    where = f"{section}.{key}"
    if value is None or current is None:
        return value
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", field=where)
    elif isinstance(current, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", field=where)
    elif isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", field=where)
        return float(value)
    elif isinstance(current, (list, tuple)) and not isinstance(value, (list, tuple)):
        return [value]
    return value


def apply_values(sections: Dict[str, Dict[str, Any]], updates: Dict[str, Dict[str, Any]]) -> None:
    """Merge ``updates`` into ``sections`` in place, rejecting unknown keys."""
    for section, values in updates.items():
        if section not in sections:
            raise ConfigError(f"unknown section [{section}]", field=section)
        for key, value in values.items():
            if key not in sections[section]:
                raise ConfigError("unknown option", field=f"{section}.{key}")
            sections[section][key] = _check_type(section, key, sections[section][key], value)


def nest_overrides(overrides: Optional[Dict[str, Any]]) -> Dict[str, Dict[str, Any]]:
    """Turn dotted ``{"section.key": value}`` pairs into ``{section: {key: value}}``."""
    nested: Dict[str, Dict[str, Any]] = {}
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        nested.setdefault(section, {})[key] = value
    return nested


def read_ini(path: Union[str, Path]) -> Dict[str, Dict[str, Any]]:
    """Parse an INI file into typed ``{section: {key: value}}``.

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigError: If the file is not valid INI
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}", field="file") from exc
    return {s: {k: parse_field(k, v) for k, v in parser.items(s)} for s in parser.sections()}


def build_config(sections: Dict[str, Dict[str, Any]]) -> RunConfig:
    """Construct a validated RunConfig from resolved sections."""
    run = sections["run"]
    seed = run["seed"]
    return RunConfig(
        data=DataConfig(**sections["data"]),
        split=SplitPlan(**sections["split"]),
        model=TrainConfig(**sections["model"], **sections["training"], seed=seed),
        forecast=ForecastConfig(**sections["forecast"]),
        baselines=BaselineConfig(**sections["baselines"], seed=seed),
        seed=seed,
        output_dir=run["output_dir"],
        profile=run["profile"],
    )


def load_config(
    path: Optional[Union[str, Path]] = None,
    profile: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """Resolve defaults, profile, file and overrides into a RunConfig.

    Args:
        path: Optional INI file
        profile: Profile name; when None the file's ``run.profile`` is used
        overrides: Dotted ``{"section.key": value}`` overrides, applied last

    Raises:
        ConfigError: Unknown profile, section or key, wrongly typed or invalid value
        FileNotFoundError: If ``path`` does not exist
    """
    sections = default_sections()
    file_values = read_ini(path) if path is not None else {}
    profile = profile or file_values.get("run", {}).get("profile")
    if profile is not None:
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r} (choose from {', '.join(PROFILES)})", field="run.profile")
        apply_values(sections, PROFILES[profile])
    apply_values(sections, file_values)
    sections["run"]["profile"] = profile

    apply_values(sections, nest_overrides(overrides))
    return build_config(sections)


def dump_config(cfg: RunConfig, path: Union[str, Path]) -> Path:
    """Write the fully resolved configuration as INI."""
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section, values in cfg.to_sections().items():
        parser[section] = {key: format_field(value) for key, value in values.items()}
    with path.open("w", encoding="utf-8") as fh:
        parser.write(fh)
    return path
