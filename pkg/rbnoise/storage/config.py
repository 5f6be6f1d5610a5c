import tomllib
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from dataclasses_json import DataClassJsonMixin, Undefined, config
from dataclasses_json.undefined import UndefinedParameterError

from rbnoise.core.engine import ExperimentConfig
from rbnoise.logger import logger

PRESET_PACKAGE = "rbnoise.presets"
STRICT = config(undefined=Undefined.RAISE)["dataclasses_json"]


class ConfigError(ValueError):
    """Raised for unreadable, unknown-key or out-of-range configuration."""

    pass


class StudyKind(Enum):
    BENCHMARK = "benchmark"
    AUTOCORRELATION = "autocorrelation"


class CheckKind(Enum):
    SLOPE = "slope"
    MEANS_AGREE = "means_agree"
    SIGMA_C_RATIO = "sigma_c_ratio"
    SIGMA_U_RATIO = "sigma_u_ratio"
    RATIO_MONOTONE = "ratio_monotone"
    RATIO_SPREAD = "ratio_spread"
    EPG_INCREASING = "epg_increasing"
    CORRELATION_RATIO = "correlation_ratio"
    ABOVE_QPN_FLOOR = "above_qpn_floor"


@dataclass
class CheckSpec(DataClassJsonMixin):
    dataclass_json_config = STRICT

    kind: CheckKind
    run: str = ""
    reference: str = ""
    runs: list[str] = field(default_factory=list)
    n_min: int = 1
    n_max: int = 0
    low: float = float("-inf")
    high: float = float("inf")


@dataclass
class AnalysisSpec(DataClassJsonMixin):
    dataclass_json_config = STRICT

    reorderings: int = 1000
    fit: bool = True
    qpn_reorderings: int = 100
    checks: list[CheckSpec] = field(default_factory=list)

    def __post_init__(self):
        if self.reorderings < 1 or self.qpn_reorderings < 1:
            raise ValueError("Invalid reordering count")


@dataclass
class AutocorrelationSpec(DataClassJsonMixin):
    dataclass_json_config = STRICT

    gates: int = 1000
    realizations: int = 200
    max_lag: int = 100
    rms2: float = 2e-3
    block_gates: list[int] = field(default_factory=lambda: [1, 50, 100])


@dataclass
class StudyConfig(DataClassJsonMixin):
    dataclass_json_config = STRICT

    name: str
    description: str = ""
    kind: StudyKind = StudyKind.BENCHMARK
    seed: int = 0
    defaults: dict[str, Any] = field(default_factory=dict)
    runs: list[dict[str, Any]] = field(default_factory=list)
    analysis: AnalysisSpec = field(default_factory=AnalysisSpec)
    autocorrelation: Optional[AutocorrelationSpec] = None

    def experiments(self) -> list[ExperimentConfig]:
        """Each run table laid over the defaults, seeded with the study seed."""
        experiments = []
        for run in self.runs:
            merged = {"seed": self.seed, **self.defaults, **run}
            experiments.append(ExperimentConfig.from_dict(merged))
        labels = [e.label for e in experiments]
        if len(set(labels)) != len(labels):
            raise ValueError(f"Duplicate run labels in {labels}")
        return experiments

    def with_seed(self, seed: int) -> "StudyConfig":
        data = self.to_dict(encode_json=True)
        data["seed"] = seed
        return StudyConfig.from_dict(data)


def preset_names() -> list[str]:
    folder = resources.files(PRESET_PACKAGE)
    return sorted(p.name.removesuffix(".toml") for p in folder.iterdir() if p.name.endswith(".toml"))


def _read(source: str | Path) -> tuple[str, dict]:
    path = Path(source)
    if path.exists():
        return str(path), tomllib.loads(path.read_text(encoding="utf-8"))
    preset = resources.files(PRESET_PACKAGE) / f"{source}.toml"
    if preset.is_file():
        return f"preset:{source}", tomllib.loads(preset.read_text(encoding="utf-8"))
    raise ConfigError(f"No config file or preset named {source}")


def parse_config(data: dict, origin: str = "<dict>") -> StudyConfig:
    try:
        study = StudyConfig.from_dict(data)
        if study.kind == StudyKind.BENCHMARK:
            study.experiments()
            if not study.runs:
                raise ValueError("A benchmark study needs at least one run")
        elif study.autocorrelation is None:
            study.autocorrelation = AutocorrelationSpec()
    except (KeyError, TypeError, ValueError, UndefinedParameterError) as e:
        raise ConfigError(f"Invalid config {origin}: {e}") from e
    return study


def load_config(source: str | Path) -> StudyConfig:
    """Load a study from a TOML path or a preset name."""
    try:
        origin, data = _read(source)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Could not parse config {source}: {e}") from e
    logger.debug(f"Loaded config {origin}")
    return parse_config(data, origin)
