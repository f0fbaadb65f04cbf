"""Corpus handling: DCASE-layout scanning, synthetic corpus generation, manifests.

Directory convention (shared by the scanner and the generator)::

    <root>/<machine_type>/train/normal_id_XX_########.wav
    <root>/<machine_type>/test/{normal,anomaly}_id_XX_########.wav

The synthetic generator additionally writes, at the corpus root:

* ``manifest.jsonl``   one JSON record per line, first line is corpus metadata
* ``anomalies.jsonl``  per-anomalous-clip injection metadata (family, times)
* ``_bases/``          the pre-injection base waveform of every anomalous clip

Synthetic machine types are named ``synthetic_*``; one of three anomaly
families (tonal_shift, impulse_train, noise_burst) is injected per anomalous
clip, round-robin, so every family is represented.
"""

from __future__ import annotations

import hashlib
import json
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import ConfigError, CorpusNotFoundError, InvalidCorpusError

LABELS = ("normal", "anomaly", "unknown")
SPLITS = ("train", "validation", "test")
ANOMALY_FAMILIES = ("tonal_shift", "impulse_train", "noise_burst")

MANIFEST_NAME = "manifest.jsonl"
ANOMALY_META_NAME = "anomalies.jsonl"
BASE_DIR_NAME = "_bases"


@dataclass
class ClipRecord:
    path: str  # absolute path in memory; relative to corpus root on disk
    machine_type: str
    machine_id: str
    label: str
    split: str
    sample_rate_hz: int
    duration_s: float


@dataclass
class Manifest:
    records: list[ClipRecord]
    corpus_fingerprint: str
    seed: int
    root: str

    def by(self, split: str | None = None, machine_type: str | None = None,
           label: str | None = None) -> list[ClipRecord]:
        out = []
        for r in self.records:
            if split is not None and r.split != split:
                continue
            if machine_type is not None and r.machine_type != machine_type:
                continue
            if label is not None and r.label != label:
                continue
            out.append(r)
        return out

    @property
    def machine_types(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.records:
            seen.setdefault(r.machine_type, None)
        return list(seen)


@dataclass
class Waveform:
    samples: np.ndarray  # mono float64 in [-1, 1]
    sample_rate: int

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class SynthSpec:
    """Parameters of the built-in synthetic machine-sound corpus."""

    machines: list[str] = field(
        default_factory=lambda: ["synthetic_a", "synthetic_b", "synthetic_c"])
    normals_train: int = 64
    normals_test: int = 16
    anomalies_test: int = 16
    clip_seconds: float = 2.0
    sample_rate: int = 16000
    seed: int = 0
    validation_fraction: float = 0.5
    # anomaly injection parameters
    tone_amp: float = 0.25
    impulse_period_s: float = 0.5
    impulse_amp: float = 0.6
    burst_amp: float = 0.15
    burst_seconds: float = 0.3

    def validate(self) -> None:
        if not self.machines:
            raise ConfigError("synthetic spec needs at least one machine type")
        for name, n in (("normals_train", self.normals_train),
                        ("normals_test", self.normals_test),
                        ("anomalies_test", self.anomalies_test)):
            if n < 2:
                raise ConfigError(f"synthetic spec requires {name} >= 2, got {n}")
        if not (1.0 <= self.clip_seconds <= 15.0):
            raise ConfigError(f"clip_seconds must lie in [1, 15], got {self.clip_seconds}")
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")
        if not (0.0 <= self.validation_fraction < 1.0):
            raise ConfigError("validation_fraction must lie in [0, 1)")


# per-machine hum parameters, cycled for custom machine lists
_HUM_TABLE = (
    {"f0": 55.0, "harmonics": 8, "am_hz": 3.0},
    {"f0": 140.0, "harmonics": 6, "am_hz": 5.0},
    {"f0": 330.0, "harmonics": 4, "am_hz": 7.0},
)


def _hum_params(machine_index: int) -> dict:
    base = dict(_HUM_TABLE[machine_index % len(_HUM_TABLE)])
    base["f0"] *= 1.0 + 0.35 * (machine_index // len(_HUM_TABLE))
    return base


def _normal_wave(n: int, sr: int, params: dict, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) / sr
    f0 = params["f0"] * (1.0 + 0.01 * rng.uniform(-1.0, 1.0))
    wave = np.zeros(n)
    for k in range(1, params["harmonics"] + 1):
        amp = 1.0 / k ** 1.2
        wave += amp * np.sin(2.0 * np.pi * k * f0 * t + rng.uniform(0.0, 2.0 * np.pi))
    am_hz = params["am_hz"] * (1.0 + 0.1 * rng.uniform(-1.0, 1.0))
    wave *= 1.0 + 0.12 * np.sin(2.0 * np.pi * am_hz * t + rng.uniform(0.0, 2.0 * np.pi))
    wave += 0.01 * rng.standard_normal(n)
    gain = 0.45 * (1.0 + 0.05 * rng.uniform(-1.0, 1.0))
    wave *= gain / np.max(np.abs(wave))
    return wave


def _inject_tonal(wave, sr, params, rng, spec: SynthSpec):
    n = len(wave)
    t = np.arange(n) / sr
    f_anom = params["f0"] * (2.5 + 0.4 * rng.uniform())
    inj = spec.tone_amp * 0.45 * np.sin(2.0 * np.pi * f_anom * t + rng.uniform(0.0, 2.0 * np.pi))
    return wave + inj, {"f_anom_hz": float(f_anom)}, []


def _inject_impulses(wave, sr, params, rng, spec: SynthSpec):
    n = len(wave)
    out = wave.copy()
    width = 64  # 4 ms at 16 kHz, well inside the +-10 ms locality contract
    click_env = np.hanning(width)
    offset = rng.uniform(0.05, spec.impulse_period_s)
    times = []
    t0 = offset
    while t0 * sr + width < n:
        start = int(round(t0 * sr))
        click = spec.impulse_amp * click_env * rng.standard_normal(width)
        out[start:start + width] += click
        times.append(float(t0))
        t0 += spec.impulse_period_s
    return out, {"period_s": spec.impulse_period_s}, times


def _inject_burst(wave, sr, params, rng, spec: SynthSpec):
    n = len(wave)
    out = wave.copy()
    m = int(round(spec.burst_seconds * sr))
    start_s = rng.uniform(0.1, len(wave) / sr - spec.burst_seconds - 0.1)
    start = int(round(start_s * sr))
    f_lo = rng.uniform(500.0, 3000.0)
    f_hi = 2.0 * f_lo
    noise = rng.standard_normal(m)
    spec_fft = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(m, 1.0 / sr)
    spec_fft[(freqs < f_lo) | (freqs > f_hi)] = 0.0
    band = np.fft.irfft(spec_fft, m)
    band *= spec.burst_amp / max(np.sqrt(np.mean(band ** 2)), 1e-12)
    fade = min(int(0.01 * sr), m // 4)
    env = np.ones(m)
    ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(fade) / fade))
    env[:fade] = ramp
    env[-fade:] = ramp[::-1]
    out[start:start + m] += band * env
    return out, {"band_hz": [float(f_lo), float(f_hi)], "start_s": float(start_s)}, [float(start_s)]


_INJECTORS = {
    "tonal_shift": _inject_tonal,
    "impulse_train": _inject_impulses,
    "noise_burst": _inject_burst,
}


def _quantize(wave: np.ndarray) -> np.ndarray:
    clipped = np.clip(wave, -0.999, 0.999)
    return np.round(clipped * 32767.0).astype(np.int16)


def _write_wav(path: Path, wave: np.ndarray, sr: int) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(path, sr, _quantize(wave))


def _clip_rng(seed: int, machine_index: int, role: int, idx: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, machine_index, role, idx]))


def generate_synthetic_corpus(spec: SynthSpec, out: str | Path) -> Manifest:
    """Write a deterministic synthetic corpus and return its manifest.

    Identical (spec, seed) yields byte-identical files. Anomalous clips are
    their normal base plus exactly one injected anomaly family; the base is
    stored under ``_bases/`` for sample-wise comparisons.
    """
    spec.validate()
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InvalidCorpusError(f"cannot create corpus directory {out}: {exc}") from exc
    sr = spec.sample_rate
    n = int(round(spec.clip_seconds * sr))
    anomaly_meta: list[dict] = []

    for mi, machine in enumerate(spec.machines):
        params = _hum_params(mi)
        for idx in range(spec.normals_train):
            rng = _clip_rng(spec.seed, mi, 0, idx)
            wave = _normal_wave(n, sr, params, rng)
            _write_wav(out / machine / "train" / f"normal_id_00_{idx:08d}.wav", wave, sr)
        for idx in range(spec.normals_test):
            rng = _clip_rng(spec.seed, mi, 1, idx)
            wave = _normal_wave(n, sr, params, rng)
            _write_wav(out / machine / "test" / f"normal_id_00_{idx:08d}.wav", wave, sr)
        for idx in range(spec.anomalies_test):
            rng = _clip_rng(spec.seed, mi, 2, idx)
            base = _normal_wave(n, sr, params, rng)
            family = ANOMALY_FAMILIES[idx % len(ANOMALY_FAMILIES)]
            wave, inj_params, times = _INJECTORS[family](base, sr, params, rng, spec)
            name = f"anomaly_id_00_{idx:08d}.wav"
            _write_wav(out / machine / "test" / name, wave, sr)
            _write_wav(out / BASE_DIR_NAME / f"{machine}__{name}", base, sr)
            anomaly_meta.append({
                "path": f"{machine}/test/{name}",
                "family": family,
                "params": inj_params,
                "times_s": times,
            })

    with open(out / ANOMALY_META_NAME, "w") as fh:
        for item in anomaly_meta:
            fh.write(json.dumps(item, sort_keys=True) + "\n")

    manifest = scan_dcase_corpus(out, validation_fraction=spec.validation_fraction,
                                 seed=spec.seed)
    save_manifest(manifest, out / MANIFEST_NAME)
    return manifest


_ID_RE = re.compile(r"id[_-]?([0-9A-Za-z]+)")


def _parse_clip_name(name: str, split_dir: str) -> tuple[str, str]:
    stem = Path(name).stem
    if split_dir == "train":
        label = "normal"
    elif stem.startswith("normal"):
        label = "normal"
    elif stem.startswith("anomaly"):
        label = "anomaly"
    else:
        label = "unknown"
    m = _ID_RE.search(stem)
    machine_id = m.group(1) if m else "00"
    return label, machine_id


def _wav_header(path: Path) -> tuple[int, float, int]:
    """(sample_rate, duration_s, byte_size) without decoding all samples."""
    import wave as wavmod

    size = path.stat().st_size
    with wavmod.open(str(path), "rb") as fh:
        sr = fh.getframerate()
        nframes = fh.getnframes()
    return sr, nframes / sr, size


def _manifest_fingerprint(rows: list[tuple]) -> str:
    h = hashlib.sha256()
    for row in rows:
        h.update("|".join(str(x) for x in row).encode())
        h.update(b"\n")
    return h.hexdigest()[:16]


def scan_dcase_corpus(root: str | Path, validation_fraction: float = 0.5,
                      seed: int = 0) -> Manifest:
    """Walk a DCASE-convention corpus and build a deterministic manifest.

    Train clips are labelled normal (unsupervised premise). A stratified
    fraction of the labelled test clips per machine type is reassigned to the
    validation split, deterministically under ``seed``, keeping at least one
    clip of each class in both validation and test whenever possible.
    """
    root = Path(root)
    if not root.is_dir():
        raise CorpusNotFoundError(f"corpus root not found: {root}")
    machine_dirs = sorted(
        d for d in root.iterdir()
        if d.is_dir() and not d.name.startswith(("_", ".")) and (d / "train").is_dir()
    )
    if not machine_dirs:
        raise CorpusNotFoundError(f"no machine-type directories under {root}")

    records: list[ClipRecord] = []
    skipped = 0
    total = 0
    for mdir in machine_dirs:
        machine = mdir.name
        n_train = 0
        for split_dir in ("train", "test"):
            sdir = mdir / split_dir
            if not sdir.is_dir():
                continue
            for wav_path in sorted(sdir.glob("*.wav")):
                total += 1
                try:
                    sr, dur, _size = _wav_header(wav_path)
                except Exception as exc:
                    warnings.warn(f"skipping unreadable clip {wav_path}: {exc}")
                    skipped += 1
                    continue
                if not (1.0 <= dur <= 15.0):
                    warnings.warn(f"skipping {wav_path}: duration {dur:.2f}s outside [1, 15]s")
                    skipped += 1
                    continue
                label, machine_id = _parse_clip_name(wav_path.name, split_dir)
                records.append(ClipRecord(
                    path=str(wav_path.resolve()),
                    machine_type=machine,
                    machine_id=machine_id,
                    label=label,
                    split=split_dir,
                    sample_rate_hz=sr,
                    duration_s=dur,
                ))
                if split_dir == "train":
                    n_train += 1
        if n_train == 0:
            raise InvalidCorpusError(f"machine type {machine!r} has no train clips")

    if total == 0:
        raise CorpusNotFoundError(f"no audio clips under {root}")
    if skipped > 0.1 * total:
        raise InvalidCorpusError(
            f"{skipped}/{total} clips unreadable; corpus too damaged to use")

    _carve_validation(records, validation_fraction, seed)
    records.sort(key=lambda r: (r.machine_type, SPLITS.index(r.split), r.path))
    rows = [(Path(r.path).relative_to(root.resolve()), r.machine_type, r.machine_id,
             r.label, r.split, r.sample_rate_hz, f"{r.duration_s:.6f}",
             Path(r.path).stat().st_size) for r in records]
    return Manifest(records=records, corpus_fingerprint=_manifest_fingerprint(rows),
                    seed=seed, root=str(root.resolve()))


def _carve_validation(records: list[ClipRecord], fraction: float, seed: int) -> None:
    if fraction <= 0.0:
        return
    by_group: dict[tuple[str, str], list[ClipRecord]] = {}
    for r in records:
        if r.split == "test" and r.label in ("normal", "anomaly"):
            by_group.setdefault((r.machine_type, r.label), []).append(r)
    for (machine, label), group in sorted(by_group.items()):
        group.sort(key=lambda r: r.path)
        n = len(group)
        if n < 2:
            continue  # cannot keep both splits populated
        k = int(np.floor(fraction * n + 0.5))
        k = min(max(k, 1), n - 1)
        group_hash = int.from_bytes(
            hashlib.sha256(f"{machine}|{label}".encode()).digest()[:4], "big")
        rng = np.random.default_rng(np.random.SeedSequence([seed, group_hash]))
        chosen = rng.permutation(n)[:k]
        for i in chosen:
            group[i].split = "validation"


def validate_for_selection(manifest: Manifest) -> None:
    """Loudly reject manifests that cannot drive validation-based selection."""
    problems = []
    test_machines = {r.machine_type for r in manifest.records if r.split == "test"}
    for machine in sorted(test_machines):
        for split in ("validation", "test"):
            labels = {r.label for r in manifest.by(split=split, machine_type=machine)}
            missing = {"normal", "anomaly"} - labels
            if missing:
                problems.append(f"{machine}: {split} split lacks {sorted(missing)} clips")
    for r in manifest.records:
        if r.split == "train" and r.label != "normal":
            problems.append(f"{r.path}: train clip labelled {r.label}")
    if problems:
        raise InvalidCorpusError("manifest unusable for detector selection:\n  "
                                 + "\n  ".join(problems))


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    root = Path(manifest.root)
    with open(path, "w") as fh:
        meta = {"corpus_fingerprint": manifest.corpus_fingerprint, "seed": manifest.seed}
        fh.write(json.dumps(meta, sort_keys=True) + "\n")
        for r in manifest.records:
            p = Path(r.path)
            try:
                rel = str(p.relative_to(root))
            except ValueError:
                rel = str(p)
            fh.write(json.dumps({
                "path": rel,
                "machine_type": r.machine_type,
                "machine_id": r.machine_id,
                "label": r.label,
                "split": r.split,
                "sample_rate_hz": r.sample_rate_hz,
                "duration_s": round(r.duration_s, 6),
            }, sort_keys=True) + "\n")


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    if not path.exists():
        raise CorpusNotFoundError(f"manifest not found: {path}")
    root = path.parent.resolve()
    records = []
    with open(path) as fh:
        header = json.loads(fh.readline())
        for line in fh:
            d = json.loads(line)
            p = Path(d["path"])
            if not p.is_absolute():
                p = root / p
            records.append(ClipRecord(
                path=str(p), machine_type=d["machine_type"], machine_id=d["machine_id"],
                label=d["label"], split=d["split"], sample_rate_hz=d["sample_rate_hz"],
                duration_s=d["duration_s"]))
    return Manifest(records=records, corpus_fingerprint=header["corpus_fingerprint"],
                    seed=header["seed"], root=str(root))


def load_anomaly_metadata(corpus_root: str | Path) -> dict[str, dict]:
    """Injection metadata of a synthetic corpus, keyed by relative clip path."""
    path = Path(corpus_root) / ANOMALY_META_NAME
    if not path.exists():
        return {}
    out = {}
    with open(path) as fh:
        for line in fh:
            d = json.loads(line)
            out[d["path"]] = d
    return out


def load_waveform(record: ClipRecord) -> Waveform:
    """Decode a clip to mono float64 in [-1, 1] at the manifest sample rate."""
    from .errors import AnosoundError

    try:
        sr, data = wavfile.read(record.path)
    except Exception as exc:
        raise AnosoundError(f"cannot decode {record.path}: {exc}") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    else:
        samples = data.astype(np.float64)
    if samples.ndim > 1:
        samples = samples.mean(axis=1)
    if sr != record.sample_rate_hz:
        from scipy.signal import resample_poly

        warnings.warn(f"{record.path}: resampling {sr} Hz -> {record.sample_rate_hz} Hz")
        g = np.gcd(sr, record.sample_rate_hz)
        samples = resample_poly(samples, record.sample_rate_hz // g, sr // g)
    return Waveform(samples=np.clip(samples, -1.0, 1.0), sample_rate=record.sample_rate_hz)


def clip_fingerprint(path: str | Path) -> str:
    """Content hash of one clip file; keys embedding and feature caches."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()[:16]
