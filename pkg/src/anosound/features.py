"""Log-mel spectrogram extraction and per-spectrogram normalization.

Geometry contract: with the full-scale configuration (16 kHz audio, n_fft 1024,
hop 512, 128 mel bands, centered frames) a 10 s clip maps to a 128x313 matrix;
the desk configuration (2 s clips, 64 bands) maps to 64x63. Frame count with
centered framing is ``1 + floor(n_samples / hop)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import FeatureConfig
from .errors import InvalidInputError
from .corpus import Waveform

NORMALIZATIONS = ("raw", "minmax01", "zscore")


@dataclass
class LogMelSpec:
    values: np.ndarray  # (n_mels, n_frames)
    frame_hop_s: float
    normalization: str = "raw"

    @property
    def n_mels(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: FeatureConfig) -> np.ndarray:
    """Triangular HTK-style filterbank, shape (n_mels, n_fft // 2 + 1)."""
    n_bins = cfg.n_fft // 2 + 1
    fft_freqs = np.linspace(0.0, cfg.sample_rate / 2.0, n_bins)
    mel_pts = np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    fb = np.zeros((cfg.n_mels, n_bins))
    for i in range(cfg.n_mels):
        lo, mid, hi = hz_pts[i], hz_pts[i + 1], hz_pts[i + 2]
        up = (fft_freqs - lo) / max(mid - lo, 1e-12)
        down = (hi - fft_freqs) / max(hi - mid, 1e-12)
        fb[i] = np.maximum(0.0, np.minimum(up, down))
    return fb


def _window(cfg: FeatureConfig) -> np.ndarray:
    if cfg.window == "hann":
        n = np.arange(cfg.n_fft)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / cfg.n_fft)  # periodic
    if cfg.window == "rect":
        return np.ones(cfg.n_fft)
    raise InvalidInputError(f"unknown window {cfg.window!r}")


def fix_length(wave: Waveform, target_seconds: float) -> Waveform:
    """Zero-pad at the end or truncate so the clip has the configured duration."""
    n_target = int(round(target_seconds * wave.sample_rate))
    s = wave.samples
    if len(s) >= n_target:
        s = s[:n_target]
    else:
        s = np.concatenate([s, np.zeros(n_target - len(s))])
    return Waveform(samples=s, sample_rate=wave.sample_rate)


def mel_power(wave: Waveform, cfg: FeatureConfig) -> np.ndarray:
    """Mel-filtered power per frame, shape (n_mels, n_frames). No log applied."""
    samples = np.asarray(wave.samples, dtype=np.float64)
    if samples.ndim != 1:
        raise InvalidInputError("expected a mono waveform")
    if len(samples) < cfg.n_fft:
        raise InvalidInputError(
            f"waveform of {len(samples)} samples is shorter than one FFT window ({cfg.n_fft})")
    if not np.all(np.isfinite(samples)):
        raise InvalidInputError("waveform contains non-finite samples")
    if wave.sample_rate != cfg.sample_rate:
        raise InvalidInputError(
            f"waveform at {wave.sample_rate} Hz, config expects {cfg.sample_rate} Hz")

    if cfg.center:
        pad = cfg.n_fft // 2
        samples = np.concatenate([np.zeros(pad), samples, np.zeros(pad)])
        n_frames = 1 + (len(samples) - cfg.n_fft) // cfg.hop
    else:
        n_frames = 1 + (len(samples) - cfg.n_fft) // cfg.hop
    frames = np.lib.stride_tricks.sliding_window_view(samples, cfg.n_fft)[::cfg.hop][:n_frames]
    spectrum = np.fft.rfft(frames * _window(cfg), axis=1)
    power = np.abs(spectrum) ** 2
    return mel_filterbank(cfg) @ power.T


def logmel(wave: Waveform, cfg: FeatureConfig) -> LogMelSpec:
    """Natural-log mel spectrogram, ``log(mel_power + eps)``."""
    values = np.log(mel_power(wave, cfg) + cfg.log_eps)
    return LogMelSpec(values=values, frame_hop_s=cfg.hop / cfg.sample_rate)


def normalize(spec: LogMelSpec, mode: str = "minmax01") -> LogMelSpec:
    """Per-spectrogram normalization. Constant input maps to all-0.5 (minmax01)
    or all-zeros (zscore). minmax01 is idempotent."""
    if mode not in ("minmax01", "zscore"):
        raise InvalidInputError(f"unknown normalization mode {mode!r}")
    v = spec.values
    if mode == "minmax01":
        lo, hi = v.min(), v.max()
        out = np.full_like(v, 0.5) if hi == lo else (v - lo) / (hi - lo)
    else:
        mu, sd = v.mean(), v.std()
        out = np.zeros_like(v) if sd == 0.0 else (v - mu) / sd
    return replace(spec, values=out, normalization=mode)


def cache_path(cache_dir: str | Path, clip_fp: str, cfg_fp: str) -> Path:
    return Path(cache_dir) / f"{clip_fp}__{cfg_fp}.npy"


def cache_store(spec: LogMelSpec, cache_dir: str | Path, clip_fp: str, cfg_fp: str) -> Path:
    path = cache_path(cache_dir, clip_fp, cfg_fp)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, spec.values)
    return path


def cache_load(cache_dir: str | Path, clip_fp: str, cfg_fp: str,
               frame_hop_s: float) -> LogMelSpec | None:
    path = cache_path(cache_dir, clip_fp, cfg_fp)
    if not path.exists():
        return None
    return LogMelSpec(values=np.load(path), frame_hop_s=frame_hop_s)
