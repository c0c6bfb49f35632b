"""Run configuration: one YAML file, every tunable parameter under a named key."""
from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .errors import ConfigError, ValidationError
from .features import FeatureConfig
from .fusion import CHANNEL_MODES
from .postprocess import AggregationParams

DEFAULT_CONFIG_PATH = Path(__file__).with_name("default_config.yaml")


@dataclass(frozen=True)
class RunConfig:
    window_size_s: float = 0.2
    window_step_s: float = 0.05
    highpass: bool = True
    highpass_cutoff_hz: float = 20.0
    sample_rate_hz: int = 16000
    features: FeatureConfig = field(default_factory=FeatureConfig)
    channel_mode: str = "right"
    svm_tol: float = 1e-3
    n_per_class: int = 500
    meta_C: float = 1.0
    meta_gamma: float = 1.0
    tuning_strategy: str = "bayes"
    tuning_budget: int = 30
    tuning_folds: int = 5
    smoothing_windows: int = 5
    threshold: float = 0.0
    aggregation: AggregationParams = field(default_factory=AggregationParams)
    truth_min_overlap: float = 0.5
    pr_thresholds: int = 101
    pr_mode: str = "duration"
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.window_size_s <= 0 or self.window_step_s <= 0:
            raise ConfigError("window size and step must be positive")
        if self.highpass and not 0 < self.highpass_cutoff_hz < self.sample_rate_hz / 2:
            raise ConfigError("high-pass cutoff must lie between 0 and Nyquist")
        if self.channel_mode not in CHANNEL_MODES:
            raise ConfigError(f"channel_mode must be one of {CHANNEL_MODES}")
        if self.svm_tol <= 0 or self.meta_C <= 0 or self.meta_gamma <= 0:
            raise ConfigError("svm_tol, meta_C and meta_gamma must be positive")
        if self.n_per_class < 1:
            raise ConfigError("n_per_class must be >= 1")
        if self.tuning_strategy not in ("bayes", "grid"):
            raise ConfigError("tuning_strategy must be 'bayes' or 'grid'")
        if self.tuning_folds < 2:
            raise ConfigError("tuning_folds must be >= 2")
        if self.tuning_strategy == "bayes" and self.tuning_budget < 10:
            raise ConfigError("tuning_budget must be >= 10")
        if self.smoothing_windows < 1 or self.smoothing_windows % 2 == 0:
            raise ConfigError("smoothing_windows must be odd and >= 1")
        if not 0 < self.truth_min_overlap <= 1:
            raise ConfigError("truth_min_overlap must lie in (0, 1]")
        if self.pr_thresholds < 2:
            raise ConfigError("pr_thresholds must be >= 2")
        if self.pr_mode not in ("window", "duration"):
            raise ConfigError("pr_mode must be 'window' or 'duration'")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["features"]["enabled"] = list(self.features.enabled)
        d["features"]["bands"] = [list(b) for b in self.features.bands]
        return d

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def config_from_dict(data: dict | None) -> RunConfig:
    data = copy.deepcopy(data or {})
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        if "features" in data:
            feat = dict(data["features"] or {})
            if "bands" in feat:
                feat["bands"] = tuple(tuple(b) for b in feat["bands"])
            data["features"] = FeatureConfig(**feat)
        if "aggregation" in data:
            data["aggregation"] = AggregationParams(**(data["aggregation"] or {}))
        return RunConfig(**data)
    except ConfigError:
        raise
    except (TypeError, ValidationError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path=None) -> RunConfig:
    """Read a YAML config; keys not given fall back to the shipped defaults."""
    base = yaml.safe_load(DEFAULT_CONFIG_PATH.read_text()) or {}
    if path is not None:
        try:
            user = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: config must be a mapping")
        for key, val in user.items():
            if isinstance(val, dict) and isinstance(base.get(key), dict):
                base[key] = {**base[key], **val}
            else:
                base[key] = val
    return config_from_dict(base)
