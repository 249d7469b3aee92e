"""
Pipeline configuration

One frozen dataclass carries every tunable parameter of the pipeline, from
sampling rate to SVM regularisation and the synthetic cohort layout.

Resolution order (highest first):
    1. command-line flags
    2. key=value config file (--config)
    3. environment variables GAIT_<FIELD> (a .env file is loaded first)
    4. dataclass defaults
"""

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, fields
from typing import Any, Dict, Mapping, Optional

from dotenv import dotenv_values, load_dotenv

from gaitauth.errors import ConfigError

ENV_PREFIX = "GAIT_"

SCHEMES = ("knn", "svm")
ORIENTATION_MODES = ("fixed", "drifting", "per_session_random")


@dataclass(frozen=True)
class PipelineConfig:
    # Preprocessing
    rate_hz: float = 27.0
    wavelet_levels: int = 2
    wavelet: str = "db6"

    # Segmentation
    tau: float = 1.0
    epsilon_fraction: float = 0.3
    smooth_window: int = 5
    min_lag_s: float = 0.25
    min_prominence: float = 0.05

    # Features
    n_s: int = 4
    fft_offset: int = 0

    # Recognition
    pca_variance: float = 0.995
    svm_c: float = 1.0
    train_fraction: float = 0.5
    seed: int = 7
    scheme: str = "svm"

    # Synthetic cohort
    subjects: int = 10
    sessions: int = 4
    duration_s: float = 40.0
    noise_sigma: float = 0.1
    orientation_mode: str = "per_session_random"
    drift_rate: float = 2.0
    min_param_distance: float = 0.35

    # Execution
    jobs: int = 1

    def validate(self) -> "PipelineConfig":
        """Raise ConfigError on the first invalid field; return self otherwise."""
        if self.rate_hz <= 0:
            raise ConfigError(f"rate_hz must be positive, got {self.rate_hz}")
        if self.wavelet_levels < 1:
            raise ConfigError(f"wavelet_levels must be >= 1, got {self.wavelet_levels}")
        if self.wavelet != "db6":
            raise ConfigError(f"unsupported wavelet '{self.wavelet}' (only db6)")
        if self.tau < 0:
            raise ConfigError(f"tau must be >= 0, got {self.tau}")
        if not 0 < self.epsilon_fraction < 1:
            raise ConfigError(f"epsilon_fraction must be in (0,1), got {self.epsilon_fraction}")
        if self.smooth_window < 1:
            raise ConfigError(f"smooth_window must be >= 1, got {self.smooth_window}")
        if self.n_s < 2 or self.n_s % 2:
            raise ConfigError(f"n_s must be even and >= 2 (50% overlap), got {self.n_s}")
        if self.fft_offset not in (0, 1):
            raise ConfigError(f"fft_offset must be 0 or 1, got {self.fft_offset}")
        if not 0 < self.pca_variance <= 1:
            raise ConfigError(f"pca_variance must be in (0,1], got {self.pca_variance}")
        if self.svm_c <= 0:
            raise ConfigError(f"svm_c must be positive, got {self.svm_c}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"train_fraction must be in (0,1), got {self.train_fraction}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got '{self.scheme}'")
        if self.subjects < 2:
            raise ConfigError(f"subjects must be >= 2, got {self.subjects}")
        if self.sessions < 1:
            raise ConfigError(f"sessions must be >= 1, got {self.sessions}")
        if self.duration_s <= 0 or self.noise_sigma < 0:
            raise ConfigError("duration_s must be positive and noise_sigma non-negative")
        if self.orientation_mode not in ORIENTATION_MODES:
            raise ConfigError(
                f"orientation_mode must be one of {ORIENTATION_MODES}, got '{self.orientation_mode}'"
            )
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        return self

    def as_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form; changes iff any field changes."""
        canonical = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def replace(self, **changes: Any) -> "PipelineConfig":
        return dataclasses.replace(self, **changes).validate()


def _coerce(name: str, raw: Any, kind: type) -> Any:
    if isinstance(raw, kind) and not (kind is int and isinstance(raw, bool)):
        return raw
    text = str(raw).strip()
    try:
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"invalid value for {name}: '{text}'") from None
    return text


def _field_types() -> Dict[str, type]:
    defaults = PipelineConfig()
    return {f.name: type(getattr(defaults, f.name)) for f in fields(PipelineConfig)}


def load_config_file(path: str) -> Dict[str, str]:
    """Parse a key=value config file; unknown keys are rejected."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    values = {k.strip().lower(): v for k, v in dotenv_values(path).items() if v is not None}
    unknown = sorted(set(values) - set(_field_types()))
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {unknown}")
    return values


def resolve_config(
    overrides: Optional[Mapping[str, Any]] = None,
    config_path: Optional[str] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> PipelineConfig:
    """
    Build the effective configuration.

    Args:
        overrides: values from command-line flags (None entries are ignored)
        config_path: optional key=value config file
        environ: environment mapping; defaults to os.environ after load_dotenv()

    Returns:
        validated PipelineConfig
    """
    if environ is None:
        load_dotenv()
        environ = os.environ

    types = _field_types()
    resolved: Dict[str, Any] = {}

    for name in types:
        env_value = environ.get(ENV_PREFIX + name.upper())
        if env_value is not None:
            resolved[name] = env_value

    if config_path:
        resolved.update(load_config_file(config_path))

    for name, value in (overrides or {}).items():
        if value is not None:
            if name not in types:
                raise ConfigError(f"unknown config field '{name}'")
            resolved[name] = value

    typed = {name: _coerce(name, value, types[name]) for name, value in resolved.items()}
    return PipelineConfig(**typed).validate()
