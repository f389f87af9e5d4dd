"""Audio ingestion: WAV decoding, mono conversion, and sample-rate conversion."""

import math
from dataclasses import dataclass

import numpy as np
import scipy.io.wavfile
from scipy.signal import firwin, resample_poly

from .errors import ValidationError

# Polyphase anti-alias filter: windowed sinc, Kaiser-shaped, 32 taps per phase.
RESAMPLE_TAPS_PER_PHASE = 32
RESAMPLE_KAISER_BETA = 8.0


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AudioClip:
    """A mono sample buffer with its rate and provenance.

    ``samples`` is stored as a read-only float64 vector; amplitudes are
    dimensionless (WAV ingestion normalises integer formats to [-1, 1]).
    """

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""
    label: str | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValidationError(f"samples must be 1-D, got shape {samples.shape}")
        if samples.size < 1:
            raise ValidationError("clip must contain at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ValidationError(f"clip {self.source_id!r} contains non-finite samples")
        rate = self.sample_rate
        if not (isinstance(rate, (int, np.integer)) and not isinstance(rate, bool)) or rate <= 0:
            raise ValidationError(f"sample_rate must be a positive integer, got {rate!r}")
        object.__setattr__(self, "samples", _readonly(samples))
        object.__setattr__(self, "sample_rate", int(rate))

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def with_identity(self, source_id: str, label: str | None) -> "AudioClip":
        return AudioClip(self.samples, self.sample_rate, source_id, label)


def read_wav(path, *, source_id: str | None = None, label: str | None = None) -> AudioClip:
    """Decode a PCM WAV file (8/16/24-bit int or 32-bit float, mono or stereo).

    Integer formats are scaled to [-1, 1]; stereo channels are averaged.
    """
    rate, data = scipy.io.wavfile.read(str(path))
    if data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        # 24-bit PCM arrives as int32 with the low byte zeroed, so one scale fits both.
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise ValidationError(f"unsupported WAV sample format {data.dtype} in {path}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    elif samples.ndim != 1:
        raise ValidationError(f"unsupported WAV channel layout {samples.shape} in {path}")
    return AudioClip(samples, int(rate), source_id=source_id or str(path), label=label)


def write_wav(path, clip: AudioClip) -> None:
    """Write a clip as 16-bit mono PCM."""
    x = np.clip(clip.samples, -1.0, 1.0)
    pcm = np.round(x * 32767.0).astype(np.int16)
    scipy.io.wavfile.write(str(path), clip.sample_rate, pcm)


def design_resample_filter(up: int, down: int) -> np.ndarray:
    """Low-pass FIR for a rational rate change, cut at the narrower Nyquist."""
    taps = RESAMPLE_TAPS_PER_PHASE * max(up, down) + 1
    cutoff = min(1.0 / up, 1.0 / down)  # relative to the intermediate Nyquist
    return firwin(taps, cutoff, window=("kaiser", RESAMPLE_KAISER_BETA))


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Convert a clip to ``target_rate`` with a polyphase windowed-sinc filter.

    A matching rate returns the clip unchanged. Output length is
    ceil(n * target / original), so duration is preserved to within one
    sample period.
    """
    if not float(target_rate).is_integer() or target_rate <= 0:
        raise ValidationError(f"target_rate must be a positive integer, got {target_rate!r}")
    target_rate = int(target_rate)
    if target_rate == clip.sample_rate:
        return clip
    g = math.gcd(clip.sample_rate, target_rate)
    up = target_rate // g
    down = clip.sample_rate // g
    h = design_resample_filter(up, down)
    # resample_poly applies the interpolation gain to array windows itself.
    out = resample_poly(clip.samples, up, down, window=h)
    return AudioClip(out, target_rate, source_id=clip.source_id, label=clip.label)
