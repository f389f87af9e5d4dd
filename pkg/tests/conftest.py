import numpy as np
import pytest

from tftex import AudioClip, Block, LogSpectrogram

LOG_FLOOR = float(np.log(1e-10))


def sine_clip(freq, seconds, rate, amp=1.0, source_id="sine", label=None):
    t = np.arange(int(round(seconds * rate))) / rate
    return AudioClip(amp * np.sin(2 * np.pi * freq * t), rate, source_id=source_id, label=label)


def random_spectrogram(rng, frames, bins, source_id="synthetic"):
    """A plausible log-spectrogram: bounded below by the default log floor."""
    values = np.maximum(rng.normal(loc=-2.0, scale=3.0, size=(frames, bins)), LOG_FLOOR)
    return LogSpectrogram(values, frame_hop_s=0.025, bin_hz=20.0, source_id=source_id)


def block_from(spect, origin, w, l):
    i, j = origin
    return Block(
        values=np.array(spect.values[i : i + w, j : j + l]),
        source_id=spect.source_id,
        origin=(i, j),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
