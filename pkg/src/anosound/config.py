"""Run configuration: typed sections, presets, YAML round-trip, env overrides.

A run is fully described by one RunConfig. Every command writes the resolved
config next to its outputs so any run can be reproduced from that snapshot
alone. Environment variables of the form ``TLDG_<SECTION>_<KEY>`` (for example
``TLDG_LDGAN_EPOCHS=5``) override individual fields after file loading;
``TLDG_SEED`` and ``TLDG_OUT`` override the two top-level fields.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError

ENV_PREFIX = "TLDG"


@dataclass
class DataConfig:
    corpus_root: str | None = None  # DCASE-layout root; None means synthetic
    synth_machines: list[str] = field(
        default_factory=lambda: ["synthetic_a", "synthetic_b", "synthetic_c"]
    )
    normals_train: int = 64
    normals_test: int = 16
    anomalies_test: int = 16
    clip_seconds: float = 2.0
    validation_fraction: float = 0.5


@dataclass
class FeatureConfig:
    sample_rate: int = 16000
    n_fft: int = 1024
    hop: int = 512
    n_mels: int = 64
    fmin: float = 0.0
    fmax: float = 8000.0
    clip_seconds: float = 2.0
    window: str = "hann"  # "hann" or "rect"
    center: bool = True
    log_eps: float = 1e-10


@dataclass
class MixupConfig:
    enabled: bool = True
    tau_low: float = 0.2
    tau_high: float = 0.5
    beta_alpha: float = 0.5
    power_p: float = 3.0


@dataclass
class BackboneConfig:
    d_z: int = 64
    n_steps: int = 50
    beta_start: float = 1e-4
    beta_end: float = 0.02
    epochs: int = 20
    pretrain_epochs: int = 10
    batch_size: int = 16
    lr: float = 1e-3
    lambda_stat: float = 1.0
    lambda_gp: float = 10.0
    t0_fraction: float = 0.3
    base_channels: int = 16


@dataclass
class EncoderConfig:
    provider: str = "stub"  # "stub" or "cache:<dir>"
    d_e: int = 256
    stub_bands: int = 64
    stub_seed: int = 12345


@dataclass
class DetectConfig:
    knn_k: int = 5
    lof_k: int = 10
    gmm_components: int = 4
    sos_perplexity: float = 15.0
    score_latent_source: str = "reencoded"  # or "denoised"


@dataclass
class MetricsConfig:
    p: float = 0.1


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "runs/desk"
    preset: str = "desk"
    dataio: DataConfig = field(default_factory=DataConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    tmixup: MixupConfig = field(default_factory=MixupConfig)
    ldgan: BackboneConfig = field(default_factory=BackboneConfig)
    encoders: EncoderConfig = field(default_factory=EncoderConfig)
    detect: DetectConfig = field(default_factory=DetectConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> None:
        m = self.tmixup
        if not (0.0 <= m.tau_low < m.tau_high <= 1.0):
            raise ConfigError(f"tau range must satisfy 0 <= low < high <= 1, got ({m.tau_low}, {m.tau_high})")
        if m.beta_alpha <= 0:
            raise ConfigError("beta_alpha must be positive")
        if m.power_p <= 1:
            raise ConfigError("power_p must exceed 1")
        b = self.ldgan
        if b.n_steps < 1 or b.d_z < 1 or b.batch_size < 1:
            raise ConfigError("ldgan dims/steps/batch must be positive")
        if not (0.0 <= b.t0_fraction <= 1.0):
            raise ConfigError("t0_fraction must lie in [0, 1]")
        if not (0.0 < self.metrics.p <= 1.0):
            raise ConfigError("metrics.p must lie in (0, 1]")
        if not (0.0 <= self.dataio.validation_fraction < 1.0):
            raise ConfigError("validation_fraction must lie in [0, 1)")
        if self.features.hop <= 0 or self.features.n_fft <= 0:
            raise ConfigError("feature hop and n_fft must be positive")
        if self.features.window not in ("hann", "rect"):
            raise ConfigError(f"unknown window {self.features.window!r}")


def desk_preset() -> RunConfig:
    """Synthetic-corpus preset sized for a commodity CPU."""
    return RunConfig()


def paper_preset() -> RunConfig:
    """Full-scale preset: DCASE corpus, 128x313 features, long training."""
    cfg = RunConfig(
        preset="paper",
        out_dir="runs/paper",
        dataio=DataConfig(corpus_root="data/dcase2020_task2", clip_seconds=10.0),
        features=FeatureConfig(n_mels=128, clip_seconds=10.0),
        ldgan=BackboneConfig(
            d_z=128,
            n_steps=1000,
            epochs=150,
            pretrain_epochs=10,
            batch_size=512,
            lr=1e-4,
        ),
    )
    return cfg


PRESETS = {"desk": desk_preset, "paper": paper_preset}

_SECTIONS = ("dataio", "features", "tmixup", "ldgan", "encoders", "detect", "metrics")


def _coerce(raw: str, like) -> object:
    if isinstance(like, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean from {raw!r}")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    if isinstance(like, list):
        return [part.strip() for part in raw.split(",") if part.strip()]
    return raw


def _apply_env_overrides(cfg: RunConfig, env: dict[str, str]) -> RunConfig:
    if f"{ENV_PREFIX}_SEED" in env:
        cfg.seed = int(env[f"{ENV_PREFIX}_SEED"])
    if f"{ENV_PREFIX}_OUT" in env:
        cfg.out_dir = env[f"{ENV_PREFIX}_OUT"]
    for section in _SECTIONS:
        sub = getattr(cfg, section)
        for f in dataclasses.fields(sub):
            key = f"{ENV_PREFIX}_{section.upper()}_{f.name.upper()}"
            if key in env:
                current = getattr(sub, f.name)
                template = current if current is not None else ""
                setattr(sub, f.name, _coerce(env[key], template))
    return cfg


def _merge(cfg: RunConfig, data: dict) -> RunConfig:
    known = {f.name for f in dataclasses.fields(RunConfig)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if key in _SECTIONS:
            sub = getattr(cfg, key)
            sub_known = {f.name for f in dataclasses.fields(sub)}
            for sub_key, sub_value in (value or {}).items():
                if sub_key not in sub_known:
                    raise ConfigError(f"unknown config key {key}.{sub_key}")
                setattr(sub, sub_key, sub_value)
        else:
            setattr(cfg, key, value)
    return cfg


def load_config(
    path: str | Path | None = None,
    preset: str | None = None,
    seed: int | None = None,
    out_dir: str | Path | None = None,
    env: dict[str, str] | None = None,
) -> RunConfig:
    """Build a RunConfig from preset defaults, an optional YAML file, env vars,
    and explicit CLI overrides, in that precedence order (later wins)."""
    name = preset or "desk"
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    cfg = PRESETS[name]()
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        with open(p) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"config file {p} must contain a mapping")
        file_preset = data.pop("preset", None)
        if file_preset is not None and preset is None:
            if file_preset not in PRESETS:
                raise ConfigError(f"unknown preset {file_preset!r} in {p}")
            cfg = PRESETS[file_preset]()
            cfg.preset = file_preset
        cfg = _merge(cfg, data)
    cfg = _apply_env_overrides(cfg, dict(os.environ) if env is None else env)
    if seed is not None:
        cfg.seed = int(seed)
    if out_dir is not None:
        cfg.out_dir = str(out_dir)
    cfg.validate()
    return cfg


def save_config(cfg: RunConfig, path: str | Path) -> None:
    """Write the resolved config as YAML with stable key order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=True, default_flow_style=False)


def config_fingerprint(cfg) -> str:
    """Short stable hash of a config dataclass, for cache keying."""
    import hashlib

    blob = yaml.safe_dump(dataclasses.asdict(cfg), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
