"""Short-time Fourier analysis producing the log-spectrogram texture image.

The analysis window is a periodic Hanning window of K samples shifted by a
hop of u = K / hop_divisor. Coefficients keep the absolute-time phase
convention

    F[l, k] = sum_n f[n] w[n - l u] exp(-i 2 pi k n / K)

with frames l = 0 .. floor((N - K) / u) and bins k = 0 .. floor(K / 2)
(the upper half of the spectrum is redundant for real input). The texture
image used downstream is S = ln(max(|F|, epsilon)).
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .audio import AudioClip
from .errors import ValidationError


@dataclass(frozen=True)
class StftConfig:
    """Analysis parameters: window length in ms, overlap divisor, log floor."""

    window_ms: float = 50.0
    hop_divisor: int = 2
    epsilon: float = 1e-10

    def __post_init__(self):
        if not self.window_ms > 0:
            raise ValidationError(f"window_ms must be positive, got {self.window_ms}")
        if not (isinstance(self.hop_divisor, (int, np.integer)) and self.hop_divisor >= 1):
            raise ValidationError(f"hop_divisor must be an integer >= 1, got {self.hop_divisor}")
        if not self.epsilon > 0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")

    def window_length(self, sample_rate: int) -> int:
        """Window size K in samples, rounded so the hop K / hop_divisor is exact."""
        exact = self.window_ms * sample_rate / 1000.0
        k = round(exact / self.hop_divisor) * self.hop_divisor
        k = max(k, self.hop_divisor, 2)
        return int(k)

    def hop_length(self, sample_rate: int) -> int:
        return self.window_length(sample_rate) // self.hop_divisor


@dataclass(frozen=True)
class ComplexSpectrogram:
    """STFT coefficients, time-major: values[l, k] for frame l, bin k."""

    values: np.ndarray
    frame_hop_s: float
    bin_hz: float
    source_id: str = ""
    label: str | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.ndim != 2:
            raise ValidationError(f"spectrogram values must be 2-D, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("spectrogram contains non-finite coefficients")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class LogSpectrogram:
    """Log-magnitude spectrogram, the texture image blocks are matched against."""

    values: np.ndarray
    frame_hop_s: float
    bin_hz: float
    source_id: str = ""
    label: str | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError(f"spectrogram values must be 2-D, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("log-spectrogram contains non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def bins(self) -> int:
        return self.values.shape[1]


def hanning_window(window_length: int) -> np.ndarray:
    """Periodic Hanning window w[n] = 0.5 (1 - cos(2 pi n / K)), n = 0 .. K-1."""
    if not (isinstance(window_length, (int, np.integer)) and window_length >= 2):
        raise ValidationError(f"window length must be an integer >= 2, got {window_length!r}")
    n = np.arange(window_length, dtype=np.float64)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * n / window_length))


def stft_with_params(clip: AudioClip, window_length: int, hop_length: int) -> ComplexSpectrogram:
    """STFT with explicit window and hop in samples (see module formula)."""
    if hop_length < 1 or hop_length > window_length:
        raise ValidationError(f"hop {hop_length} must lie in [1, window {window_length}]")
    x = clip.samples
    if x.size < window_length:
        raise ValidationError(
            f"clip {clip.source_id!r} has {x.size} samples, shorter than one "
            f"window of {window_length}"
        )
    w = hanning_window(window_length)
    frames = sliding_window_view(x, window_length)[::hop_length] * w
    coeffs = np.fft.rfft(frames, axis=1)
    # Restore the absolute-time phase: each frame's DFT is taken relative to
    # its own start l*u, so twist by exp(-i 2 pi k l u / K).
    n_frames, n_bins = coeffs.shape
    starts = np.arange(n_frames, dtype=np.float64) * hop_length
    bins = np.arange(n_bins, dtype=np.float64)
    coeffs *= np.exp(-2j * np.pi * np.outer(starts, bins) / window_length)
    return ComplexSpectrogram(
        values=coeffs,
        frame_hop_s=hop_length / clip.sample_rate,
        bin_hz=clip.sample_rate / window_length,
        source_id=clip.source_id,
        label=clip.label,
    )


def stft(clip: AudioClip, cfg: StftConfig) -> ComplexSpectrogram:
    """STFT of a clip with window/hop derived from the configuration."""
    window_length = cfg.window_length(clip.sample_rate)
    return stft_with_params(clip, window_length, cfg.hop_length(clip.sample_rate))


def log_spectrogram(spec: ComplexSpectrogram, epsilon: float) -> LogSpectrogram:
    """S = ln(max(|F|, epsilon)); the floor keeps silent frames finite."""
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    values = np.log(np.maximum(np.abs(spec.values), epsilon))
    return LogSpectrogram(
        values=values,
        frame_hop_s=spec.frame_hop_s,
        bin_hz=spec.bin_hz,
        source_id=spec.source_id,
        label=spec.label,
    )


def to_log_spectrogram(clip: AudioClip, cfg: StftConfig) -> LogSpectrogram:
    """Full analysis of one clip: STFT then log magnitudes."""
    return log_spectrogram(stft(clip, cfg), cfg.epsilon)
