"""Synthetic dataset generator: four texture-distinct audio classes.

Stands in for a real instrument corpus at desk scale. The classes are
designed around contrasting time-frequency textures: sharp-onset stable
harmonics, vibrato harmonics with no onsets, percussive noise-burst trains,
and smooth broadband noise. Four more parameter-shifted variants back
eight-class stress runs. Every recording is deterministic given the
``SynthSpec`` seed, with per-recording random base pitch and tempo.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.signal import butter, sosfilt

from .audio import AudioClip
from .errors import ValidationError
from .evaluation import Recording

DEFAULT_SYNTH_RATE = 11025


def _fade(n: int, sr: int, seconds: float = 0.2) -> np.ndarray:
    t = np.arange(n) / sr
    total = n / sr
    return np.minimum(t / seconds, 1.0) * np.minimum((total - t) / seconds, 1.0)


def _gen_harmonic_onsets(rng, n, sr, f0_range=(200.0, 400.0), tempo_range=(1.5, 3.0)):
    """Sharp-attack notes with a stable harmonic stack and silence between them."""
    f0 = rng.uniform(*f0_range)
    tempo = rng.uniform(*tempo_range)
    beat = 1.0 / tempo
    note_len = 0.55 * beat
    steps = np.array([0, 3, 5, 7, 10, 12])
    out = np.zeros(n)
    t0 = 0.0
    while t0 * sr < n:
        start = int(round(t0 * sr))
        length = min(int(round(note_len * sr)), n - start)
        if length <= 0:
            break
        pitch = f0 * 2.0 ** (rng.choice(steps) / 12.0)
        t = np.arange(length) / sr
        env = np.minimum(t / 0.002, 1.0) * np.exp(-t / (note_len / 3.0))
        note = np.zeros(length)
        for h in range(1, 7):
            if pitch * h < sr / 2:
                note += (1.0 / h) * np.sin(2 * np.pi * pitch * h * t + rng.uniform(0, 2 * np.pi))
        out[start : start + length] += env * note
        t0 += beat
    return out


def _gen_vibrato_tone(
    rng, n, sr, f0_range=(250.0, 500.0), vib_rate_range=(4.0, 7.0), depth_range=(0.01, 0.03)
):
    """A continuous harmonic tone with frequency vibrato and no attacks."""
    f0 = rng.uniform(*f0_range)
    vib_rate = rng.uniform(*vib_rate_range)
    depth = rng.uniform(*depth_range)
    t = np.arange(n) / sr
    inst_freq = f0 * (1.0 + depth * np.sin(2 * np.pi * vib_rate * t + rng.uniform(0, 2 * np.pi)))
    phase = 2 * np.pi * np.cumsum(inst_freq) / sr
    out = np.zeros(n)
    for h in range(1, 6):
        if f0 * h * (1 + depth) < sr / 2:
            out += (1.0 / h) * np.sin(h * phase + rng.uniform(0, 2 * np.pi))
    slow = 1.0 + 0.25 * np.sin(2 * np.pi * 0.2 * t + rng.uniform(0, 2 * np.pi))
    return out * slow * _fade(n, sr)


def _gen_noise_bursts(rng, n, sr, rate_range=(3.0, 6.0), center_range=(1000.0, 3500.0)):
    """A train of short band-passed noise bursts with fast decay."""
    rate = rng.uniform(*rate_range)
    center = rng.uniform(*center_range)
    beat = 1.0 / rate
    out = np.zeros(n)
    t0 = rng.uniform(0, 0.5 * beat)
    while t0 * sr < n:
        start = int(round(t0 * sr))
        length = min(int(round(0.05 * sr)), n - start)
        if length <= 0:
            break
        t = np.arange(length) / sr
        env = np.minimum(t / 0.0005, 1.0) * np.exp(-t / 0.01)
        out[start : start + length] += env * rng.normal(size=length)
        t0 += beat * rng.uniform(0.9, 1.1)
    lo, hi = 0.7 * center, min(1.4 * center, 0.47 * sr)
    sos = butter(2, [lo, hi], btype="bandpass", fs=sr, output="sos")
    return sosfilt(sos, out)


def _gen_smooth_noise(rng, n, sr, cutoff_range=(500.0, 2000.0), highpass=False):
    """Slowly modulated colored noise with no transients."""
    cutoff = rng.uniform(*cutoff_range)
    sos = butter(4, cutoff, btype="highpass" if highpass else "lowpass", fs=sr, output="sos")
    out = sosfilt(sos, rng.normal(size=n))
    t = np.arange(n) / sr
    slow = 1.0 + 0.3 * np.sin(2 * np.pi * rng.uniform(0.1, 0.3) * t + rng.uniform(0, 2 * np.pi))
    return out * slow * _fade(n, sr)


@dataclass(frozen=True)
class SynthClass:
    name: str
    generator: Callable
    params: dict = field(default_factory=dict)


SYNTH_CLASSES: tuple[SynthClass, ...] = (
    SynthClass("harmonic_onsets", _gen_harmonic_onsets),
    SynthClass("vibrato_tone", _gen_vibrato_tone),
    SynthClass("noise_bursts", _gen_noise_bursts),
    SynthClass("smooth_noise", _gen_smooth_noise),
    SynthClass(
        "harmonic_onsets_low",
        _gen_harmonic_onsets,
        {"f0_range": (90.0, 180.0), "tempo_range": (1.0, 1.8)},
    ),
    SynthClass(
        "vibrato_tone_fast",
        _gen_vibrato_tone,
        {"f0_range": (600.0, 1100.0), "vib_rate_range": (8.0, 12.0), "depth_range": (0.05, 0.08)},
    ),
    SynthClass(
        "noise_bursts_sparse",
        _gen_noise_bursts,
        {"rate_range": (1.0, 2.2), "center_range": (300.0, 900.0)},
    ),
    SynthClass(
        "smooth_noise_bright",
        _gen_smooth_noise,
        {"cutoff_range": (2500.0, 4200.0), "highpass": True},
    ),
)


@dataclass(frozen=True)
class SynthSpec:
    """Shape of the generated corpus; four classes by default, up to eight."""

    classes: int = 4
    recordings_per_class: int = 4
    seconds_per_recording: float = 30.0
    sample_rate: int = DEFAULT_SYNTH_RATE
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.classes <= len(SYNTH_CLASSES):
            raise ValidationError(
                f"classes must be between 1 and {len(SYNTH_CLASSES)}, got {self.classes}"
            )
        if self.recordings_per_class < 1:
            raise ValidationError("recordings_per_class must be >= 1")
        if not self.seconds_per_recording > 0:
            raise ValidationError("seconds_per_recording must be positive")
        if self.sample_rate < 1:
            raise ValidationError("sample_rate must be positive")


def synth_dataset(spec: SynthSpec) -> list[Recording]:
    """Generate the synthetic corpus; bit-identical for identical specs."""
    n = int(round(spec.seconds_per_recording * spec.sample_rate))
    recordings: list[Recording] = []
    for class_index in range(spec.classes):
        cls = SYNTH_CLASSES[class_index]
        for rec_index in range(spec.recordings_per_class):
            ss = np.random.SeedSequence(entropy=spec.seed, spawn_key=(class_index, rec_index))
            rng = np.random.Generator(np.random.PCG64(ss))
            samples = cls.generator(rng, n, spec.sample_rate, **cls.params)
            peak = np.max(np.abs(samples))
            if peak > 0:
                samples = samples * (0.5 / peak)
            recording_id = f"{cls.name}/rec{rec_index:02d}"
            clip = AudioClip(
                samples, spec.sample_rate, source_id=recording_id, label=cls.name
            )
            recordings.append(Recording(clip=clip, class_label=cls.name, recording_id=recording_id))
    return recordings
